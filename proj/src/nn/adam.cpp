#include "sinpaint/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sinpaint::nn {

template <typename T>
Adam<T>::Adam(std::vector<BasicTensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), T(0));
        v_.emplace_back(p.numel(), T(0));
    }
}

template <typename T>
void Adam<T>::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) {
            throw std::logic_error("Adam::step: parameter " + std::to_string(i) + " of shape " +
                                   shape_str(params_[i].shape()) + " has no gradient");
        }
    }
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].mutable_data();
        auto g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            const double mj = b1 * m[j] + (1.0 - b1) * gj;
            const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double update = options_.lr * (mj / c1) / (std::sqrt(vj / c2) + options_.eps);
            w[j] = static_cast<T>(static_cast<double>(w[j]) - update);
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sinpaint::nn
