#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sinpaint/errors.hpp"
#include "sinpaint/models/networks.hpp"
#include "sinpaint/nn/adam.hpp"

using namespace sinpaint;
using namespace sinpaint::models;
using nn::Shape;

namespace {

Tensor uniform(const Shape& s, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(nn::shape_numel(s));
    for (auto& x : v) x = u(rng);
    return Tensor(s, std::move(v));
}

Tensor binary(const Shape& s, Rng& rng, double p = 0.4) {
    std::bernoulli_distribution b(p);
    std::vector<float> v(nn::shape_numel(s));
    for (auto& x : v) x = b(rng) ? 1.0f : 0.0f;
    return Tensor(s, std::move(v));
}

std::size_t conv_params(std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k * k + cout; }

}  // namespace

TEST_CASE("generator widths follow the encoder and decoder schedules") {
    const auto g = generator_spec();
    const std::size_t enc[] = {64, 128, 256, 512, 512, 512, 512, 512};
    const std::size_t dec[] = {512, 1024, 1024, 1024, 1024, 512, 256, 128};
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(g.encoder_width(i) == enc[i]);
        CHECK(g.decoder_input_width(i + 1) == dec[i]);
    }
    CHECK(g.dropout_blocks == 3);
    CHECK(g.in_channels == 3);
    CHECK(g.mask_output);
}

TEST_CASE("generator parameter count matches the layer schedule") {
    const std::size_t enc[] = {64, 128, 256, 512, 512, 512, 512, 512};
    const std::size_t dec_in[] = {512, 1024, 1024, 1024, 1024, 512, 256, 128};
    std::size_t expected = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        expected += conv_params(i == 0 ? 3 : enc[i - 1], enc[i], 4);
        if (i > 0) expected += 2 * enc[i];
    }
    for (std::size_t k = 0; k < 7; ++k) expected += conv_params(dec_in[k], enc[6 - k], 4) + 2 * enc[6 - k];
    expected += conv_params(dec_in[7], 1, 4);
    Rng rng(1);
    const UNet g(generator_spec(), rng);
    CHECK(g.parameter_count() == expected);
    CHECK(g.parameter_count() == 54416385);
}

TEST_CASE("256x256 generator: bottleneck, skip widths and mask annihilation") {
    Rng rng(2);
    UNet g(generator_spec(), rng);
    const auto x = uniform({1, 3, 256, 256}, rng);
    const auto pmask = binary({1, 1, 256, 256}, rng);
    nn::NoGradGuard no_grad;
    const auto y = g.forward(x, &pmask, ForwardContext{false, nullptr});
    CHECK(y.shape() == Shape{1, 1, 256, 256});
    REQUIRE(g.encoder_shapes().size() == 8);
    CHECK(g.encoder_shapes().back() == Shape{1, 512, 1, 1});
    CHECK(g.decoder_input_shapes()[1][1] == 1024);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        if (pmask.data()[i] == 0.0f) {
            CHECK(y.data()[i] == 0.0f);
        } else {
            CHECK((y.data()[i] >= 0.0f && y.data()[i] <= 1.0f));
        }
    }
    const Tensor zero_mask(Shape{1, 1, 256, 256}, 0.0f);
    const auto z = g.forward(x, &zero_mask, ForwardContext{false, nullptr});
    CHECK(std::all_of(z.data().begin(), z.data().end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("generator input validation") {
    Rng rng(3);
    UNet g(generator_spec(6, 8), rng);
    const auto pm = binary({1, 1, 96, 96}, rng);
    CHECK_THROWS_AS(g.forward(uniform({1, 3, 96, 96}, rng), &pm, {false, nullptr}), ShapeError);
    CHECK_THROWS_AS(g.forward(uniform({1, 2, 64, 64}, rng), nullptr, {false, nullptr}), ShapeError);
    CHECK_THROWS_AS(g.forward(uniform({1, 3, 64, 64}, rng), nullptr, {false, nullptr}), ShapeError);
    CHECK_THROWS_AS(g.forward(uniform({1, 3, 32, 32}, rng), &pm, {false, nullptr}), ShapeError);
}

TEST_CASE("training-mode forward reaches every parameter") {
    Rng rng(4);
    UNet g(generator_spec(5, 4), rng);
    g.set_trainable(true);
    const auto x = uniform({2, 3, 32, 32}, rng);
    const Tensor pm(Shape{2, 1, 32, 32}, 1.0f);
    nn::mean(g.forward(x, &pm, ForwardContext{true, &rng})).backward();
    for (const auto& [name, t] : g.parameters()) {
        CAPTURE(name);
        CHECK(t.has_grad());
    }
}

TEST_CASE("eval-mode forwards are deterministic") {
    Rng rng(5);
    UNet g(generator_spec(6, 8), rng);
    const auto x = uniform({2, 3, 64, 64}, rng);
    const auto pm = binary({2, 1, 64, 64}, rng);
    const auto a = g.forward(x, &pm, {false, nullptr});
    const auto b = g.forward(x, &pm, {false, nullptr});
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("discriminator scores a 16x16 patch grid inside (0, 1)") {
    Rng rng(6);
    PatchDiscriminator d(DiscriminatorSpec{}, rng);
    const auto sino = uniform({2, 1, 256, 256}, rng);
    const auto cond = uniform({2, 3, 256, 256}, rng);
    nn::NoGradGuard no_grad;
    const auto y = d.forward(sino, cond, ForwardContext{true, &rng});
    CHECK(y.shape() == Shape{2, 1, 16, 16});
    for (float v : y.data()) CHECK((v > 0.0f && v < 1.0f));
    CHECK_THROWS_AS(d.forward(sino, uniform({2, 2, 256, 256}, rng), {false, nullptr}), ShapeError);
}

TEST_CASE("discriminator outputs follow a batch permutation in eval mode") {
    Rng rng(7);
    PatchDiscriminator d(DiscriminatorSpec{4, 4, 16}, rng);
    const auto x = uniform({3, 4, 64, 64}, rng);
    const std::size_t per = 4 * 64 * 64;
    std::vector<float> permuted(x.numel());
    const std::size_t order[] = {2, 0, 1};
    for (std::size_t b = 0; b < 3; ++b)
        std::copy_n(x.data().begin() + order[b] * per, per, permuted.begin() + b * per);
    const auto y = d.forward_joined(x, {false, nullptr});
    const auto yp = d.forward_joined(Tensor(x.shape(), permuted), {false, nullptr});
    const std::size_t out = 16;
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < out; ++i) CHECK(yp.data()[b * out + i] == y.data()[order[b] * out + i]);
}

TEST_CASE("refiner keeps the input shape and takes 1 or 3 channels") {
    Rng rng(8);
    for (std::size_t c : {1u, 3u}) {
        UNet r(refiner_spec(c, 6, 8), rng);
        const auto y = r.forward(uniform({2, c, 64, 64}, rng), nullptr, {false, nullptr});
        CHECK(y.shape() == Shape{2, 1, 64, 64});
    }
    CHECK_THROWS_AS(refiner_spec(2), ConfigError);
}

TEST_CASE("refiner fits the identity on a single sample") {
    Rng rng(9);
    UNet r(refiner_spec(1, 5, 16), rng);
    r.set_trainable(true);
    nn::Adam<float> opt(r.parameter_tensors());
    // Smooth, sinogram-like rows: a Gaussian band whose height varies with angle.
    const std::size_t n = 64;
    std::vector<float> v(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double a = 2.0 * M_PI * double(i) / n, k = (double(j) - n / 2.0) / (n / 4.0);
            v[i * n + j] = float(std::exp(-k * k) * (0.6 + 0.3 * std::sin(a)));
        }
    const Tensor x(Shape{1, 1, n, n}, v);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 200; ++step) {
        opt.zero_grad();
        auto loss = nn::mean(nn::abs(nn::sub(r.forward(x, nullptr, {true, &rng}), x)));
        if (step == 0) first = loss.item();
        last = loss.item();
        loss.backward();
        opt.step();
    }
    MESSAGE("refiner L1 " << first << " -> " << last);
    CHECK(last < 0.1 * first);
}

TEST_CASE("checkpoint round trip restores outputs and rejects mismatched specs") {
    Rng rng(10);
    UNet a(generator_spec(6, 8), rng);
    PatchDiscriminator d(DiscriminatorSpec{4, 3, 8}, rng);
    // Move the batchnorm statistics away from their defaults.
    const auto x = uniform({4, 3, 64, 64}, rng);
    const auto pm = binary({4, 1, 64, 64}, rng);
    {
        nn::NoGradGuard ng;
        a.forward(x, &pm, {true, &rng});
    }
    nn::TensorFile f;
    a.save(f, "generator");
    d.save(f, "discriminator");
    const auto restored_file = nn::TensorFile::deserialize(f.serialize());

    Rng other(99);
    UNet b(generator_spec(6, 8), other);
    b.load(restored_file, "generator");
    const auto ya = a.forward(x, &pm, {false, nullptr});
    const auto yb = b.forward(x, &pm, {false, nullptr});
    CHECK(std::equal(ya.data().begin(), ya.data().end(), yb.data().begin()));
    CHECK(UNetSpec::parse(*restored_file.text("generator.spec")).text() == b.spec_text());
    CHECK(DiscriminatorSpec::parse(*restored_file.text("discriminator.spec")).text() == d.spec_text());

    UNet wrong(generator_spec(6, 16), other);
    CHECK_THROWS_AS(wrong.load(restored_file, "generator"), ConfigError);
    CHECK_THROWS_AS(b.load(restored_file, "missing"), ConfigError);
}
