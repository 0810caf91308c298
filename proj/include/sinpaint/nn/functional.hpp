#pragma once

#include <cstddef>

#include "sinpaint/nn/tensor.hpp"
#include "sinpaint/rng.hpp"

namespace sinpaint::nn {

struct ConvGeometry {
    std::size_t kernel = 4;
    std::size_t stride = 2;
    std::size_t pad = 1;
};

// x: [B, Cin, H, W], weight: [Cout, Cin, k, k], bias: [Cout] (may be undefined).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, ConvGeometry geom);

// Transposed convolution, the adjoint of conv2d with the same geometry.
// x: [B, Cin, H, W], weight: [Cin, Cout, k, k], bias: [Cout] (may be undefined).
template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                                const BasicTensor<T>& bias, ConvGeometry geom);

struct BatchNormOptions {
    bool training = true;
    double momentum = 0.1;
    double eps = 1e-5;
    bool update_running = true;
};

// Per-channel normalisation over batch and spatial axes followed by the
// gamma/beta affine map. In training mode the running statistics are updated
// in place (unbiased variance); in eval mode they are used for normalisation.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                          BasicTensor<T>& running_var, const BatchNormOptions& opts);

// Inverted dropout: kept units are scaled by 1/(1-rate), so E[out] = x.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng);

}  // namespace sinpaint::nn
