#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sinpaint::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a gradient is accumulated
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backward;

    // Zero-initialised grad buffer of matching size, allocated on first use.
    std::vector<T>& grad_buffer();
};

}  // namespace detail

/// Dense row-major N-d array with optional reverse-mode gradient tracking.
///
/// A tensor is a handle onto shared storage: copying the handle aliases the
/// same node, which is what lets an op's output hold references to its inputs
/// for the backward pass. Use clone() for an independent copy.
template <typename T>
class BasicTensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0));
    BasicTensor(Shape shape, std::vector<T> values);
    static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, std::vector<T>{value}); }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const { return data().size(); }

    std::span<const T> data() const;
    std::span<T> mutable_data();
    T item() const;

    bool requires_grad() const;
    BasicTensor& set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const T> grad() const;
    std::span<T> mutable_grad();
    void zero_grad();

    // Populates grads of every requires_grad tensor reachable from this scalar.
    // Leaf gradients accumulate across calls; call zero_grad() between steps.
    void backward() const;

    BasicTensor detach() const;
    BasicTensor clone() const { return detach(); }
    BasicTensor reshape(Shape shape) const;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data().begin(), data().end());
        return BasicTensor<U>(shape(), std::move(out));
    }

    const NodePtr& node() const { return node_; }
    static BasicTensor from_node(NodePtr node) {
        BasicTensor t;
        t.node_ = std::move(node);
        return t;
    }

private:
    const detail::Node<T>& checked() const;
    NodePtr node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Disables graph construction for its lifetime (inference, target building).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Element-wise arithmetic on equal shapes.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T offset);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& a, T slope);
template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a);

// Element-wise binary cross-entropy of probabilities against targets in [0, 1].
// Probabilities are clamped to [1e-7, 1 - 1e-7] before taking logs.
template <typename T>
BasicTensor<T> binary_cross_entropy(const BasicTensor<T>& prob, const BasicTensor<T>& target);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a);
// Reduces every axis except the leading one: [B, ...] -> [B].
template <typename T>
BasicTensor<T> sum_per_sample(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> mean_per_sample(const BasicTensor<T>& a);

// Concatenates two 4-D tensors along the channel axis.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
// Concatenates along the leading (batch) axis; trailing dims must agree.
template <typename T>
BasicTensor<T> concat_batch(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return add(a, b);
}
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return sub(a, b);
}
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return mul(a, b);
}

template <typename T>
T dot(const BasicTensor<T>& a, const BasicTensor<T>& b);

namespace detail {

// Builds an op output. Records inputs and the backward closure only when grad
// mode is on and some input requires grad.
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                           std::vector<BasicTensor<T>> inputs,
                           std::function<void(Node<T>&)> backward);

}  // namespace detail

}  // namespace sinpaint::nn
