#include "sinpaint/models/networks.hpp"

#include <algorithm>
#include <cstdint>

#include "sinpaint/errors.hpp"
#include "sinpaint/io/keyvalue.hpp"

namespace sinpaint::models {

using nn::LayerKind;
using nn::LayerParams;
using nn::Shape;

namespace {

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

// --- Network ---------------------------------------------------------------

std::size_t Network::add(const std::string& name, LayerParams<float> params) {
    layers_.emplace_back(name, std::move(params));
    return layers_.size() - 1;
}

std::vector<std::pair<std::string, Tensor>> Network::parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, l] : layers_)
        for (auto& [suffix, t] : l.parameters()) out.emplace_back(name + "." + suffix, t);
    return out;
}

std::vector<std::pair<std::string, Tensor>> Network::buffers() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, l] : layers_)
        for (auto& [suffix, t] : l.buffers()) out.emplace_back(name + "." + suffix, t);
    return out;
}

std::vector<Tensor> Network::parameter_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : parameters()) out.push_back(t);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : parameters()) n += t.numel();
    return n;
}

void Network::set_trainable(bool on) {
    for (auto& [name, t] : parameters()) t.set_requires_grad(on);
}

void Network::save(nn::TensorFile& file, const std::string& prefix) const {
    file.put_text(prefix + ".spec", spec_text());
    for (const auto& [name, t] : parameters()) file.put(prefix + "." + name, t);
    for (const auto& [name, t] : buffers()) file.put(prefix + "." + name, t);
}

void Network::load(const nn::TensorFile& file, const std::string& prefix) {
    const auto stored = file.text(prefix + ".spec");
    if (!stored) throw ConfigError("checkpoint has no '" + prefix + "' model spec");
    if (*stored != spec_text()) {
        throw ConfigError("checkpoint '" + prefix + "' spec does not match the model:\n--- stored\n" + *stored +
                          "--- expected\n" + spec_text());
    }
    auto copy_into = [&](const std::string& name, Tensor t) {
        const auto key = prefix + "." + name;
        if (!file.contains(key)) throw ConfigError("checkpoint is missing tensor '" + key + "'");
        const auto src = file.get(key);
        if (src.shape() != t.shape()) {
            throw ConfigError("checkpoint tensor '" + key + "' has shape " + nn::shape_str(src.shape()) +
                              ", model expects " + nn::shape_str(t.shape()));
        }
        std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
    };
    for (auto& [name, t] : parameters()) copy_into(name, t);
    for (auto& [name, t] : buffers()) copy_into(name, t);
}

// --- U-net -----------------------------------------------------------------

std::size_t UNetSpec::encoder_width(std::size_t i) const {
    return std::min(base_width << std::min<std::size_t>(i, 3), 8 * base_width);
}

std::size_t UNetSpec::decoder_input_width(std::size_t k) const {
    if (k == 1) return encoder_width(depth - 1);
    return 2 * encoder_width(depth - k);
}

void UNetSpec::validate() const {
    if (depth < 2 || depth > 12) throw ConfigError("U-net depth must lie in [2, 12]");
    if (in_channels == 0 || out_channels == 0 || base_width == 0) {
        throw ConfigError("U-net channel counts must be positive");
    }
    if (dropout_blocks > depth - 1) throw ConfigError("more dropout blocks than decoder blocks");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

std::string UNetSpec::text() const {
    io::KeyValue kv;
    kv.set("kind", "unet");
    kv.set("in_channels", std::uint64_t(in_channels));
    kv.set("out_channels", std::uint64_t(out_channels));
    kv.set("depth", std::uint64_t(depth));
    kv.set("base_width", std::uint64_t(base_width));
    kv.set("dropout_blocks", std::uint64_t(dropout_blocks));
    kv.set("dropout_rate", dropout_rate);
    kv.set("leaky_slope", leaky_slope);
    kv.set("mask_output", mask_output);
    return kv.str();
}

UNetSpec UNetSpec::parse(const std::string& text) {
    const auto kv = io::KeyValue::parse(text, "<unet spec>");
    if (kv.get_string("kind") != "unet") throw ConfigError("model spec is not a U-net");
    UNetSpec s;
    s.in_channels = kv.get_u64("in_channels");
    s.out_channels = kv.get_u64("out_channels");
    s.depth = kv.get_u64("depth");
    s.base_width = kv.get_u64("base_width");
    s.dropout_blocks = kv.get_u64("dropout_blocks");
    s.dropout_rate = kv.get_double("dropout_rate");
    s.leaky_slope = kv.get_double("leaky_slope");
    s.mask_output = kv.get_bool("mask_output");
    s.validate();
    return s;
}

UNet::UNet(const UNetSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    const std::size_t d = spec_.depth;
    const double sd = spec_.init_std;
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t cin = i == 0 ? spec_.in_channels : spec_.encoder_width(i - 1);
        const std::size_t cout = spec_.encoder_width(i);
        const auto tag = "enc" + std::to_string(i);
        enc_conv_.push_back(add(tag + ".conv", nn::make_conv4x4s2<float>(cin, cout, rng, sd)));
        enc_bn_.push_back(i == 0 ? SIZE_MAX : add(tag + ".bn", nn::make_batchnorm<float>(cout, rng, sd)));
    }
    for (std::size_t k = 1; k < d; ++k) {
        const std::size_t cin = spec_.decoder_input_width(k);
        const std::size_t cout = spec_.encoder_width(d - 1 - k);
        const auto tag = "dec" + std::to_string(k);
        dec_deconv_.push_back(add(tag + ".deconv", nn::make_deconv4x4s2<float>(cin, cout, rng, sd)));
        dec_bn_.push_back(add(tag + ".bn", nn::make_batchnorm<float>(cout, rng, sd)));
    }
    out_deconv_ = add("out.deconv",
                      nn::make_deconv4x4s2<float>(spec_.decoder_input_width(d), spec_.out_channels, rng, sd));
    dropout_ = nn::make_dropout<float>(spec_.dropout_rate);
    leaky_ = nn::make_activation<float>(LayerKind::leaky_relu, spec_.leaky_slope);
    relu_ = nn::make_activation<float>(LayerKind::relu);
}

Tensor UNet::forward(const Tensor& x, const Tensor* pmask, const ForwardContext& ctx) {
    const std::size_t d = spec_.depth;
    if (x.rank() != 4 || x.dim(1) != spec_.in_channels) {
        throw ShapeError("U-net expects [B," + std::to_string(spec_.in_channels) + ",H,W] input, got " +
                         nn::shape_str(x.shape()));
    }
    const std::size_t h = x.dim(2), w = x.dim(3);
    if (!is_pow2(h) || !is_pow2(w) || h < (std::size_t{1} << d) || w < (std::size_t{1} << d)) {
        throw ShapeError("U-net of depth " + std::to_string(d) + " needs power-of-two spatial sizes >= " +
                         std::to_string(std::size_t{1} << d) + ", got " + nn::shape_str(x.shape()));
    }
    if (spec_.mask_output) {
        if (pmask == nullptr) throw ShapeError("masked U-net needs a prior mask");
        if (pmask->shape() != Shape{x.dim(0), 1, h, w}) {
            throw ShapeError("prior mask shape " + nn::shape_str(pmask->shape()) + " does not match input " +
                             nn::shape_str(x.shape()));
        }
    }
    enc_shapes_.clear();
    dec_shapes_.clear();
    std::vector<Tensor> skips;
    Tensor hcur = x;
    for (std::size_t i = 0; i < d; ++i) {
        hcur = nn::conv_forward(hcur, layer(enc_conv_[i]));
        if (enc_bn_[i] != SIZE_MAX) hcur = nn::layer_forward(hcur, layer(enc_bn_[i]), ctx);
        hcur = nn::layer_forward(hcur, leaky_, ctx);
        enc_shapes_.push_back(hcur.shape());
        skips.push_back(hcur);
    }
    for (std::size_t k = 1; k < d; ++k) {
        dec_shapes_.push_back(hcur.shape());
        hcur = nn::deconv_forward(hcur, layer(dec_deconv_[k - 1]));
        hcur = nn::layer_forward(hcur, layer(dec_bn_[k - 1]), ctx);
        if (k <= spec_.dropout_blocks) hcur = nn::layer_forward(hcur, dropout_, ctx);
        hcur = nn::layer_forward(hcur, relu_, ctx);
        hcur = nn::concat_channels(hcur, skips[d - 1 - k]);
    }
    dec_shapes_.push_back(hcur.shape());
    hcur = nn::deconv_forward(hcur, layer(out_deconv_));
    hcur = nn::scale(nn::add_scalar(nn::tanh(hcur), 1.0f), 0.5f);
    if (spec_.mask_output) hcur = nn::mul(hcur, *pmask);
    return hcur;
}

UNetSpec generator_spec(std::size_t depth, std::size_t base_width) {
    UNetSpec s;
    s.depth = depth;
    s.base_width = base_width;
    s.dropout_blocks = std::min<std::size_t>(3, depth - 1);
    return s;
}

UNetSpec refiner_spec(std::size_t in_channels, std::size_t depth, std::size_t base_width) {
    if (in_channels != 1 && in_channels != 3) throw ConfigError("refiner takes 1 or 3 input channels");
    UNetSpec s;
    s.in_channels = in_channels;
    s.depth = depth;
    s.base_width = base_width;
    s.dropout_blocks = std::min<std::size_t>(3, depth - 1);
    s.mask_output = false;
    return s;
}

// --- patch discriminator ----------------------------------------------------

std::size_t DiscriminatorSpec::width(std::size_t i) const {
    return std::min(base_width << std::min<std::size_t>(i, 3), 8 * base_width);
}

void DiscriminatorSpec::validate() const {
    if (n_layers < 1 || n_layers > 10) throw ConfigError("discriminator needs 1 to 10 layers");
    if (in_channels < 2 || base_width == 0) throw ConfigError("discriminator channel counts invalid");
}

std::string DiscriminatorSpec::text() const {
    io::KeyValue kv;
    kv.set("kind", "patch_discriminator");
    kv.set("in_channels", std::uint64_t(in_channels));
    kv.set("n_layers", std::uint64_t(n_layers));
    kv.set("base_width", std::uint64_t(base_width));
    kv.set("leaky_slope", leaky_slope);
    return kv.str();
}

DiscriminatorSpec DiscriminatorSpec::parse(const std::string& text) {
    const auto kv = io::KeyValue::parse(text, "<discriminator spec>");
    if (kv.get_string("kind") != "patch_discriminator") throw ConfigError("model spec is not a discriminator");
    DiscriminatorSpec s;
    s.in_channels = kv.get_u64("in_channels");
    s.n_layers = kv.get_u64("n_layers");
    s.base_width = kv.get_u64("base_width");
    s.leaky_slope = kv.get_double("leaky_slope");
    s.validate();
    return s;
}

PatchDiscriminator::PatchDiscriminator(const DiscriminatorSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    for (std::size_t i = 0; i < spec_.n_layers; ++i) {
        const std::size_t cin = i == 0 ? spec_.in_channels : spec_.width(i - 1);
        const auto tag = "c" + std::to_string(i);
        conv_.push_back(add(tag + ".conv", nn::make_conv4x4s2<float>(cin, spec_.width(i), rng, spec_.init_std)));
        bn_.push_back(i == 0 ? SIZE_MAX
                             : add(tag + ".bn", nn::make_batchnorm<float>(spec_.width(i), rng, spec_.init_std)));
    }
    head_ = add("head.conv", nn::make_conv1x1<float>(spec_.width(spec_.n_layers - 1), 1, rng, spec_.init_std));
    leaky_ = nn::make_activation<float>(LayerKind::leaky_relu, spec_.leaky_slope);
}

Tensor PatchDiscriminator::forward(const Tensor& sino, const Tensor& condition, const ForwardContext& ctx) {
    if (sino.rank() != 4 || condition.rank() != 4 || sino.dim(1) != 1 ||
        sino.dim(1) + condition.dim(1) != spec_.in_channels || sino.dim(0) != condition.dim(0) ||
        sino.dim(2) != condition.dim(2) || sino.dim(3) != condition.dim(3)) {
        throw ShapeError("discriminator: sinogram " + nn::shape_str(sino.shape()) + " and condition " +
                         nn::shape_str(condition.shape()) + " do not form a [B," +
                         std::to_string(spec_.in_channels) + ",H,W] input");
    }
    return forward_joined(nn::concat_channels(sino, condition), ctx);
}

Tensor PatchDiscriminator::forward_joined(const Tensor& x, const ForwardContext& ctx) {
    const std::size_t f = std::size_t{1} << spec_.n_layers;
    if (x.rank() != 4 || x.dim(1) != spec_.in_channels || x.dim(2) % f || x.dim(3) % f) {
        throw ShapeError("discriminator expects [B," + std::to_string(spec_.in_channels) +
                         ",H,W] with H, W multiples of " + std::to_string(f) + ", got " + nn::shape_str(x.shape()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < spec_.n_layers; ++i) {
        h = nn::conv_forward(h, layer(conv_[i]));
        if (bn_[i] != SIZE_MAX) h = nn::layer_forward(h, layer(bn_[i]), ctx);
        h = nn::layer_forward(h, leaky_, ctx);
    }
    return nn::sigmoid(nn::conv_forward(h, layer(head_)));
}

}  // namespace sinpaint::models
