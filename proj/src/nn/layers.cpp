#include "sinpaint/nn/layers.hpp"

#include "sinpaint/errors.hpp"

namespace sinpaint::nn {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv4x4s2: return "conv4x4s2";
        case LayerKind::deconv4x4s2: return "deconv4x4s2";
        case LayerKind::conv1x1: return "conv1x1";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dropout: return "dropout";
        case LayerKind::relu: return "relu";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::tanh: return "tanh";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>>> LayerParams<T>::parameters() const {
    std::vector<std::pair<std::string, BasicTensor<T>>> out;
    if (weight.defined()) out.emplace_back("weight", weight);
    if (bias.defined()) out.emplace_back("bias", bias);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>>> LayerParams<T>::buffers() const {
    std::vector<std::pair<std::string, BasicTensor<T>>> out;
    if (running_mean.defined()) out.emplace_back("running_mean", running_mean);
    if (running_var.defined()) out.emplace_back("running_var", running_var);
    return out;
}

namespace {

template <typename T>
BasicTensor<T> gaussian(Shape shape, double mean, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    BasicTensor<T> t(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    return t;
}

template <typename T>
BasicTensor<T> trainable_zeros(std::size_t n) {
    BasicTensor<T> t(Shape{n}, T(0));
    t.set_requires_grad(true);
    return t;
}

constexpr ConvGeometry kDown{4, 2, 1};
constexpr ConvGeometry kPointwise{1, 1, 0};

}  // namespace

template <typename T>
LayerParams<T> make_conv4x4s2(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                              double init_std) {
    LayerParams<T> p;
    p.kind = LayerKind::conv4x4s2;
    p.weight = gaussian<T>({out_channels, in_channels, 4, 4}, 0.0, init_std, rng);
    p.bias = trainable_zeros<T>(out_channels);
    return p;
}

template <typename T>
LayerParams<T> make_deconv4x4s2(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                                double init_std) {
    LayerParams<T> p;
    p.kind = LayerKind::deconv4x4s2;
    p.weight = gaussian<T>({in_channels, out_channels, 4, 4}, 0.0, init_std, rng);
    p.bias = trainable_zeros<T>(out_channels);
    return p;
}

template <typename T>
LayerParams<T> make_conv1x1(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                            double init_std) {
    LayerParams<T> p;
    p.kind = LayerKind::conv1x1;
    p.weight = gaussian<T>({out_channels, in_channels, 1, 1}, 0.0, init_std, rng);
    p.bias = trainable_zeros<T>(out_channels);
    return p;
}

template <typename T>
LayerParams<T> make_batchnorm(std::size_t channels, Rng& rng, double init_std) {
    LayerParams<T> p;
    p.kind = LayerKind::batchnorm;
    p.weight = gaussian<T>({channels}, 1.0, init_std, rng);
    p.bias = trainable_zeros<T>(channels);
    p.running_mean = BasicTensor<T>(Shape{channels}, T(0));
    p.running_var = BasicTensor<T>(Shape{channels}, T(1));
    return p;
}

template <typename T>
LayerParams<T> make_dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    LayerParams<T> p;
    p.kind = LayerKind::dropout;
    p.hyper.dropout_rate = rate;
    return p;
}

template <typename T>
LayerParams<T> make_activation(LayerKind kind, double leaky_slope) {
    switch (kind) {
        case LayerKind::relu:
        case LayerKind::leaky_relu:
        case LayerKind::tanh:
        case LayerKind::sigmoid: break;
        default:
            throw ConfigError(std::string("make_activation: ") + to_string(kind) +
                              " is not an activation");
    }
    LayerParams<T> p;
    p.kind = kind;
    p.hyper.leaky_slope = leaky_slope;
    return p;
}

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const LayerParams<T>& params) {
    if (params.kind == LayerKind::conv1x1) {
        return conv2d(input, params.weight, params.bias, kPointwise);
    }
    if (params.kind != LayerKind::conv4x4s2) {
        throw ConfigError(std::string("conv_forward called with a ") + to_string(params.kind) +
                          " layer");
    }
    if (input.rank() != 4 || input.dim(2) < 2 || input.dim(3) < 2 || input.dim(2) % 2 != 0 ||
        input.dim(3) % 2 != 0) {
        throw ShapeError("conv4x4s2 needs even spatial dims >= 2, got " + shape_str(input.shape()));
    }
    return conv2d(input, params.weight, params.bias, kDown);
}

template <typename T>
BasicTensor<T> deconv_forward(const BasicTensor<T>& input, const LayerParams<T>& params) {
    if (params.kind != LayerKind::deconv4x4s2) {
        throw ConfigError(std::string("deconv_forward called with a ") + to_string(params.kind) +
                          " layer");
    }
    return conv_transpose2d(input, params.weight, params.bias, kDown);
}

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, LayerParams<T>& params,
                                 bool training, bool update_running) {
    if (params.kind != LayerKind::batchnorm) {
        throw ConfigError(std::string("batchnorm_forward called with a ") +
                          to_string(params.kind) + " layer");
    }
    BatchNormOptions opts{training, params.hyper.bn_momentum, params.hyper.bn_eps, update_running};
    return batch_norm(input, params.weight, params.bias, params.running_mean, params.running_var,
                      opts);
}

template <typename T>
BasicTensor<T> layer_forward(const BasicTensor<T>& input, LayerParams<T>& params,
                             const ForwardContext& ctx) {
    switch (params.kind) {
        case LayerKind::conv4x4s2:
        case LayerKind::conv1x1: return conv_forward(input, params);
        case LayerKind::deconv4x4s2: return deconv_forward(input, params);
        case LayerKind::batchnorm: return batchnorm_forward(input, params, ctx.training, ctx.update_running_stats);
        case LayerKind::dropout:
            if (!ctx.training) return input;
            if (ctx.rng == nullptr) throw ConfigError("dropout in training mode needs an RNG");
            return dropout(input, params.hyper.dropout_rate, true, *ctx.rng);
        case LayerKind::relu: return relu(input);
        case LayerKind::leaky_relu: return leaky_relu(input, static_cast<T>(params.hyper.leaky_slope));
        case LayerKind::tanh: return tanh(input);
        case LayerKind::sigmoid: return sigmoid(input);
    }
    throw ConfigError("unknown layer kind");
}

#define SINPAINT_INSTANTIATE(T)                                                                  \
    template struct LayerParams<T>;                                                              \
    template LayerParams<T> make_conv4x4s2<T>(std::size_t, std::size_t, Rng&, double);           \
    template LayerParams<T> make_deconv4x4s2<T>(std::size_t, std::size_t, Rng&, double);         \
    template LayerParams<T> make_conv1x1<T>(std::size_t, std::size_t, Rng&, double);             \
    template LayerParams<T> make_batchnorm<T>(std::size_t, Rng&, double);                        \
    template LayerParams<T> make_dropout<T>(double);                                             \
    template LayerParams<T> make_activation<T>(LayerKind, double);                               \
    template BasicTensor<T> conv_forward(const BasicTensor<T>&, const LayerParams<T>&);          \
    template BasicTensor<T> deconv_forward(const BasicTensor<T>&, const LayerParams<T>&);        \
    template BasicTensor<T> batchnorm_forward(const BasicTensor<T>&, LayerParams<T>&, bool, bool); \
    template BasicTensor<T> layer_forward(const BasicTensor<T>&, LayerParams<T>&,                \
                                          const ForwardContext&);

SINPAINT_INSTANTIATE(float)
SINPAINT_INSTANTIATE(double)

#undef SINPAINT_INSTANTIATE

}  // namespace sinpaint::nn
