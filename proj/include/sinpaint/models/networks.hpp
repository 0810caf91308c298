#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sinpaint/nn/checkpoint.hpp"
#include "sinpaint/nn/layers.hpp"

namespace sinpaint::models {

using nn::ForwardContext;
using nn::Tensor;

// A named list of layers with parameter bookkeeping and checkpoint I/O.
class Network {
public:
    virtual ~Network() = default;

    // "<layer>.<weight|bias>"
    std::vector<std::pair<std::string, Tensor>> parameters() const;
    // "<layer>.<running_mean|running_var>"
    std::vector<std::pair<std::string, Tensor>> buffers() const;
    std::vector<Tensor> parameter_tensors() const;
    std::size_t parameter_count() const;
    void set_trainable(bool on);

    virtual std::string spec_text() const = 0;

    // Records are "<prefix>.<name>"; the spec text goes to metadata key "<prefix>.spec".
    void save(nn::TensorFile& file, const std::string& prefix) const;
    // Throws ConfigError when the stored spec text or any tensor shape disagrees.
    void load(const nn::TensorFile& file, const std::string& prefix);

protected:
    // Returns the index for layer().
    std::size_t add(const std::string& name, nn::LayerParams<float> params);
    nn::LayerParams<float>& layer(std::size_t i) { return layers_[i].second; }

private:
    std::vector<std::pair<std::string, nn::LayerParams<float>>> layers_;
};

// U-net with `depth` stride-2 encoder blocks and mirrored decoder blocks.
// Encoder block i has min(base_width * 2^i, 8 * base_width) filters; decoder
// block k (1-based) upsamples to the width of encoder block depth-1-k and is
// concatenated with that block's output. The output stage is a transposed
// conv to out_channels, tanh and (x + 1) / 2, then an optional multiply by
// the prior mask.
struct UNetSpec {
    std::size_t in_channels = 3;
    std::size_t out_channels = 1;
    std::size_t depth = 8;
    std::size_t base_width = 64;
    std::size_t dropout_blocks = 3;
    double dropout_rate = 0.5;
    double leaky_slope = 0.2;
    double init_std = 0.02;
    bool mask_output = true;

    std::size_t encoder_width(std::size_t i) const;
    // Channel count entering decoder block k (1-based) and the output stage (k = depth).
    std::size_t decoder_input_width(std::size_t k) const;
    void validate() const;
    std::string text() const;
    static UNetSpec parse(const std::string& text);
};

class UNet : public Network {
public:
    UNet(const UNetSpec& spec, Rng& rng);

    // x: [B, in_channels, H, W] with H, W powers of two and >= 2^depth.
    // pmask: [B, 1, H, W], required when spec.mask_output.
    Tensor forward(const Tensor& x, const Tensor* pmask, const ForwardContext& ctx);

    const UNetSpec& spec() const { return spec_; }
    std::string spec_text() const override { return spec_.text(); }
    // Encoder output shapes from the last forward call.
    const std::vector<nn::Shape>& encoder_shapes() const { return enc_shapes_; }
    const std::vector<nn::Shape>& decoder_input_shapes() const { return dec_shapes_; }

private:
    UNetSpec spec_;
    std::vector<std::size_t> enc_conv_, enc_bn_, dec_deconv_, dec_bn_;
    std::size_t out_deconv_ = 0;
    nn::LayerParams<float> dropout_, leaky_, relu_;
    std::vector<nn::Shape> enc_shapes_, dec_shapes_;
};

// The sinogram generator: a 3-channel masked U-net.
UNetSpec generator_spec(std::size_t depth = 8, std::size_t base_width = 64);
// The refinement baseline: same topology, no mask stage, 1 or 3 input channels.
UNetSpec refiner_spec(std::size_t in_channels, std::size_t depth = 8, std::size_t base_width = 64);

// Patch discriminator: n_layers stride-2 convs (first without batchnorm,
// leaky activations), a 1x1 conv to one channel and a sigmoid. A HxW input
// yields a (H / 2^n_layers) x (W / 2^n_layers) grid of patch scores.
struct DiscriminatorSpec {
    std::size_t in_channels = 4;
    std::size_t n_layers = 4;
    std::size_t base_width = 64;
    double leaky_slope = 0.2;
    double init_std = 0.02;

    std::size_t width(std::size_t i) const;
    void validate() const;
    std::string text() const;
    static DiscriminatorSpec parse(const std::string& text);
};

class PatchDiscriminator : public Network {
public:
    PatchDiscriminator(const DiscriminatorSpec& spec, Rng& rng);

    // sino [B,1,H,W] and condition [B,in_channels-1,H,W] are concatenated.
    Tensor forward(const Tensor& sino, const Tensor& condition, const ForwardContext& ctx);
    // Input already concatenated: [B, in_channels, H, W].
    Tensor forward_joined(const Tensor& x, const ForwardContext& ctx);

    const DiscriminatorSpec& spec() const { return spec_; }
    std::string spec_text() const override { return spec_.text(); }

private:
    DiscriminatorSpec spec_;
    std::vector<std::size_t> conv_, bn_;
    std::size_t head_ = 0;
    nn::LayerParams<float> leaky_;
};

}  // namespace sinpaint::models
