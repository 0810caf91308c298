#pragma once

#include <cstddef>
#include <vector>

#include "sinpaint/nn/tensor.hpp"

namespace sinpaint::nn {

struct AdamOptions {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Holds handles to the parameters it updates and
/// one pair of moment buffers per parameter.
template <typename T>
class Adam {
public:
    Adam(std::vector<BasicTensor<T>> params, AdamOptions options = {});

    // Throws if any parameter has no gradient buffer.
    void step();
    void zero_grad();

    std::size_t step_count() const { return steps_; }
    const AdamOptions& options() const { return options_; }
    AdamOptions& options() { return options_; }
    const std::vector<BasicTensor<T>>& params() const { return params_; }

    // Moment state, exposed for checkpointing.
    std::vector<std::vector<T>>& first_moments() { return m_; }
    std::vector<std::vector<T>>& second_moments() { return v_; }
    const std::vector<std::vector<T>>& first_moments() const { return m_; }
    const std::vector<std::vector<T>>& second_moments() const { return v_; }
    void set_step_count(std::size_t steps) { steps_ = steps; }

private:
    std::vector<BasicTensor<T>> params_;
    AdamOptions options_;
    std::vector<std::vector<T>> m_;
    std::vector<std::vector<T>> v_;
    std::size_t steps_ = 0;
};

}  // namespace sinpaint::nn
