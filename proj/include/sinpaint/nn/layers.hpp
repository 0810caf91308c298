#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sinpaint/nn/functional.hpp"
#include "sinpaint/nn/tensor.hpp"
#include "sinpaint/rng.hpp"

namespace sinpaint::nn {

enum class LayerKind {
    conv4x4s2,    // 4x4 kernel, stride 2, padding 1: halves H and W
    deconv4x4s2,  // transposed 4x4, stride 2, padding 1: doubles H and W
    conv1x1,      // per-pixel channel projection (patch-score heads)
    batchnorm,
    dropout,
    relu,
    leaky_relu,
    tanh,
    sigmoid,
};

const char* to_string(LayerKind kind);

struct LayerHyper {
    double dropout_rate = 0.5;
    double leaky_slope = 0.2;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

// Weights and hyper-parameters of one layer.
//   conv4x4s2 / conv1x1: weight [Cout, Cin, k, k], bias [Cout]
//   deconv4x4s2:         weight [Cin, Cout, 4, 4], bias [Cout]
//   batchnorm:           weight = gamma [C], bias = beta [C], running_mean/var [C]
template <typename T>
struct LayerParams {
    LayerKind kind = LayerKind::relu;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;
    LayerHyper hyper;

    // Trainable tensors, with stable suffixes for checkpoint naming.
    std::vector<std::pair<std::string, BasicTensor<T>>> parameters() const;
    // Non-trainable state that still has to be persisted (batchnorm statistics).
    std::vector<std::pair<std::string, BasicTensor<T>>> buffers() const;
};

struct ForwardContext {
    bool training = true;
    Rng* rng = nullptr;  // required for dropout in training mode
    bool update_running_stats = true;
};

// Weights ~ N(0, init_std^2), zero bias.
template <typename T>
LayerParams<T> make_conv4x4s2(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                              double init_std = 0.02);
template <typename T>
LayerParams<T> make_deconv4x4s2(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                                double init_std = 0.02);
template <typename T>
LayerParams<T> make_conv1x1(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                            double init_std = 0.02);
// gamma ~ N(1, init_std^2), beta = 0, running mean 0, running variance 1.
template <typename T>
LayerParams<T> make_batchnorm(std::size_t channels, Rng& rng, double init_std = 0.02);
template <typename T>
LayerParams<T> make_dropout(double rate = 0.5);
template <typename T>
LayerParams<T> make_activation(LayerKind kind, double leaky_slope = 0.2);

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const LayerParams<T>& params);
template <typename T>
BasicTensor<T> deconv_forward(const BasicTensor<T>& input, const LayerParams<T>& params);
template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, LayerParams<T>& params,
                                 bool training, bool update_running = true);

// Dispatches on params.kind.
template <typename T>
BasicTensor<T> layer_forward(const BasicTensor<T>& input, LayerParams<T>& params,
                             const ForwardContext& ctx);

}  // namespace sinpaint::nn
