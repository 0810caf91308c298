#include "sinpaint/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "sinpaint/errors.hpp"

namespace sinpaint::nn {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

namespace detail {

template <typename T>
std::vector<T>& Node<T>::grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
}

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                           std::vector<BasicTensor<T>> inputs,
                           std::function<void(Node<T>&)> backward) {
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    bool track = false;
    if (grad_enabled()) {
        for (const auto& in : inputs) track = track || in.requires_grad();
    }
    if (track) {
        node->requires_grad = true;
        for (const auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(backward);
    }
    return BasicTensor<T>::from_node(std::move(node));
}

}  // namespace detail

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) {
    node_ = std::make_shared<detail::Node<T>>();
    node_->data.assign(shape_numel(shape), fill);
    node_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) {
    if (values.size() != shape_numel(shape)) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<detail::Node<T>>();
    node_->shape = std::move(shape);
    node_->data = std::move(values);
}

template <typename T>
const detail::Node<T>& BasicTensor<T>::checked() const {
    if (!node_) throw std::logic_error("use of an undefined tensor");
    return *node_;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
    return checked().shape;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t i) const {
    const auto& s = shape();
    if (i >= s.size()) throw ShapeError("axis " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[i];
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
    return checked().data;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
    checked();
    return node_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return data()[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
    return node_ && node_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool flag) {
    checked();
    node_->requires_grad = flag;
    return *this;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
    return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
    return checked().grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
    checked();
    return node_->grad_buffer();
}

template <typename T>
void BasicTensor<T>::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void BasicTensor<T>::backward() const {
    const auto& root = checked();
    if (root.data.size() != 1) {
        throw ShapeError("backward() requires a scalar loss, got shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) return;

    // Iterative post-order DFS gives a topological order (inputs before users).
    std::vector<detail::Node<T>*> order;
    std::unordered_set<detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            auto* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Interior grads are recomputed from scratch; leaf grads accumulate.
    for (auto* n : order) {
        auto& g = n->grad_buffer();
        if (n->backward) std::fill(g.begin(), g.end(), T(0));
    }
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
    const auto& n = checked();
    return BasicTensor(n.shape, n.data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshape(Shape shape) const {
    if (shape_numel(shape) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(this->shape()) + " to " + shape_str(shape));
    }
    return detail::make_result<T>(std::move(shape), node_->data, "reshape", {*this},
                                  [](detail::Node<T>& self) {
                                      auto& in = *self.inputs[0];
                                      if (!in.requires_grad) return;
                                      auto& g = in.grad_buffer();
                                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                  });
}

namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

// Unary element-wise op whose derivative is expressed through (input, output).
template <typename T, typename F, typename D>
BasicTensor<T> unary(const BasicTensor<T>& a, const char* op, F f, D df) {
    auto in = a.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return detail::make_result<T>(a.shape(), std::move(out), op, {a},
                                  [df](detail::Node<T>& self) {
                                      auto& x = *self.inputs[0];
                                      if (!x.requires_grad) return;
                                      auto& g = x.grad_buffer();
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                          g[i] += self.grad[i] * df(x.data[i], self.data[i]);
                                      }
                                  });
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "add");
    auto x = a.data();
    auto y = b.data();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return detail::make_result<T>(a.shape(), std::move(out), "add", {a, b},
                                  [](detail::Node<T>& self) {
                                      for (auto& in : self.inputs) {
                                          if (!in->requires_grad) continue;
                                          auto& g = in->grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                                      }
                                  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "sub");
    auto x = a.data();
    auto y = b.data();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return detail::make_result<T>(a.shape(), std::move(out), "sub", {a, b},
                                  [](detail::Node<T>& self) {
                                      for (std::size_t k = 0; k < 2; ++k) {
                                          auto& in = *self.inputs[k];
                                          if (!in.requires_grad) continue;
                                          const T sign = k == 0 ? T(1) : T(-1);
                                          auto& g = in.grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
                                      }
                                  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "mul");
    auto x = a.data();
    auto y = b.data();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return detail::make_result<T>(a.shape(), std::move(out), "mul", {a, b},
                                  [](detail::Node<T>& self) {
                                      auto& l = *self.inputs[0];
                                      auto& r = *self.inputs[1];
                                      if (l.requires_grad) {
                                          auto& g = l.grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * r.data[i];
                                      }
                                      if (r.requires_grad) {
                                          auto& g = r.grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * l.data[i];
                                      }
                                  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    return unary(a, "scale", [factor](T v) { return v * factor; },
                 [factor](T, T) { return factor; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset) {
    return unary(a, "add_scalar", [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a) {
    return unary(a, "relu", [](T v) { return v > T(0) ? v : T(0); },
                 [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& a, T slope) {
    return unary(a, "leaky_relu", [slope](T v) { return v > T(0) ? v : slope * v; },
                 [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& a) {
    return unary(a, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a) {
    return unary(a, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                 [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a) {
    return unary(a, "abs", [](T v) { return std::abs(v); },
                 [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> binary_cross_entropy(const BasicTensor<T>& prob, const BasicTensor<T>& target) {
    require_same_shape(prob, target, "binary_cross_entropy");
    constexpr T lo = T(1e-7);
    constexpr T hi = T(1) - T(1e-7);
    auto p = prob.data();
    auto t = target.data();
    std::vector<T> out(p.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T q = std::clamp(p[i], lo, hi);
        out[i] = -(t[i] * std::log(q) + (T(1) - t[i]) * std::log(T(1) - q));
    }
    return detail::make_result<T>(prob.shape(), std::move(out), "bce", {prob, target},
                                  [lo, hi](detail::Node<T>& self) {
                                      auto& pn = *self.inputs[0];
                                      auto& tn = *self.inputs[1];
                                      if (pn.requires_grad) {
                                          auto& g = pn.grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) {
                                              const T q = pn.data[i];
                                              if (q < lo || q > hi) continue;  // clamped: flat
                                              g[i] += self.grad[i] * (q - tn.data[i]) / (q * (T(1) - q));
                                          }
                                      }
                                      if (tn.requires_grad) {
                                          auto& g = tn.grad_buffer();
                                          for (std::size_t i = 0; i < g.size(); ++i) {
                                              const T q = std::clamp(pn.data[i], lo, hi);
                                              g[i] += self.grad[i] * (std::log(T(1) - q) - std::log(q));
                                          }
                                      }
                                  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    T total = T(0);
    for (T v : a.data()) total += v;
    return detail::make_result<T>(Shape{1}, {total}, "sum", {a}, [](detail::Node<T>& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad) return;
        auto& g = in.grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
BasicTensor<T> sum_per_sample(const BasicTensor<T>& a) {
    if (a.rank() < 1) throw ShapeError("sum_per_sample needs rank >= 1");
    const std::size_t batch = a.dim(0);
    const std::size_t inner = a.numel() / batch;
    auto x = a.data();
    std::vector<T> out(batch, T(0));
    for (std::size_t b = 0; b < batch; ++b) {
        T s = T(0);
        for (std::size_t i = 0; i < inner; ++i) s += x[b * inner + i];
        out[b] = s;
    }
    return detail::make_result<T>(Shape{batch}, std::move(out), "sum_per_sample", {a},
                                  [batch, inner](detail::Node<T>& self) {
                                      auto& in = *self.inputs[0];
                                      if (!in.requires_grad) return;
                                      auto& g = in.grad_buffer();
                                      for (std::size_t b = 0; b < batch; ++b) {
                                          for (std::size_t i = 0; i < inner; ++i) g[b * inner + i] += self.grad[b];
                                      }
                                  });
}

template <typename T>
BasicTensor<T> mean_per_sample(const BasicTensor<T>& a) {
    const std::size_t inner = a.numel() / a.dim(0);
    return scale(sum_per_sample(a), T(1) / static_cast<T>(inner));
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3)) {
        throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t batch = a.dim(0);
    const std::size_t ca = a.dim(1);
    const std::size_t cb = b.dim(1);
    const std::size_t plane = a.dim(2) * a.dim(3);
    std::vector<T> out(batch * (ca + cb) * plane);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(x.begin() + n * ca * plane, ca * plane, out.begin() + n * (ca + cb) * plane);
        std::copy_n(y.begin() + n * cb * plane, cb * plane,
                    out.begin() + (n * (ca + cb) + ca) * plane);
    }
    return detail::make_result<T>(Shape{batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out),
                                  "concat", {a, b},
                                  [batch, ca, cb, plane](detail::Node<T>& self) {
                                      for (std::size_t k = 0; k < 2; ++k) {
                                          auto& in = *self.inputs[k];
                                          if (!in.requires_grad) continue;
                                          const std::size_t c = k == 0 ? ca : cb;
                                          const std::size_t off = k == 0 ? 0 : ca;
                                          auto& g = in.grad_buffer();
                                          for (std::size_t n = 0; n < batch; ++n) {
                                              const T* src = self.grad.data() + (n * (ca + cb) + off) * plane;
                                              T* dst = g.data() + n * c * plane;
                                              for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                                          }
                                      }
                                  });
}

template <typename T>
T dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "dot");
    T s = T(0);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

template <typename T>
BasicTensor<T> concat_batch(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() < 1 || a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
        throw ShapeError("concat_batch: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    // Batch-major storage makes this a flat concatenation.
    const auto joined = concat_channels(a.reshape(Shape{1, a.numel(), 1, 1}), b.reshape(Shape{1, b.numel(), 1, 1}));
    Shape out = a.shape();
    out[0] += b.dim(0);
    return joined.reshape(std::move(out));
}

#define SINPAINT_INSTANTIATE(T)                                                                  \
    template struct detail::Node<T>;                                                             \
    template class BasicTensor<T>;                                                               \
    template BasicTensor<T> detail::make_result<T>(Shape, std::vector<T>, const char*,           \
                                                   std::vector<BasicTensor<T>>,                  \
                                                   std::function<void(detail::Node<T>&)>);       \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                     \
    template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                         \
    template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                                \
    template BasicTensor<T> tanh(const BasicTensor<T>&);                                         \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                      \
    template BasicTensor<T> abs(const BasicTensor<T>&);                                          \
    template BasicTensor<T> binary_cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&);  \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                          \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                         \
    template BasicTensor<T> sum_per_sample(const BasicTensor<T>&);                               \
    template BasicTensor<T> mean_per_sample(const BasicTensor<T>&);                              \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);       \
    template BasicTensor<T> concat_batch(const BasicTensor<T>&, const BasicTensor<T>&);          \
    template T dot(const BasicTensor<T>&, const BasicTensor<T>&);

SINPAINT_INSTANTIATE(float)
SINPAINT_INSTANTIATE(double)

#undef SINPAINT_INSTANTIATE

}  // namespace sinpaint::nn
