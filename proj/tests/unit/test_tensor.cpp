#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sinpaint/errors.hpp"
#include "sinpaint/nn/adam.hpp"
#include "sinpaint/nn/checkpoint.hpp"
#include "sinpaint/nn/gemm.hpp"
#include "sinpaint/nn/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace sinpaint;
using namespace sinpaint::nn;

TEST_CASE("tensor data length matches shape") {
    Tensor t(Shape{2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>(3)), ShapeError);
}

TEST_CASE("grad of sum(w * x) with respect to w is x") {
    Tensor x(Shape{5}, std::vector<float>{1, -2, 3, 0.5f, 7});
    Tensor w(Shape{5}, 0.3f);
    w.set_requires_grad(true);
    sum(mul(w, x)).backward();
    REQUIRE(w.has_grad());
    for (std::size_t i = 0; i < 5; ++i) CHECK(w.grad()[i] == doctest::Approx(x.data()[i]));
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("tanh derivative at zero is one") {
    TensorD x(Shape{1}, 0.0);
    x.set_requires_grad(true);
    nn::tanh(x).backward();
    CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("backward on a non-scalar is rejected") {
    Tensor x(Shape{3}, 1.0f);
    x.set_requires_grad(true);
    CHECK_THROWS_AS(relu(x).backward(), ShapeError);
}

TEST_CASE("repeated backward accumulates leaf grads until zero_grad") {
    TensorD x(Shape{2}, std::vector<double>{1.0, 2.0});
    x.set_requires_grad(true);
    auto loss = sum(mul(x, x));
    loss.backward();
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
    x.zero_grad();
    loss.backward();
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("every reachable requires_grad tensor gets a gradient") {
    TensorD a(Shape{3}, 1.0), b(Shape{3}, 2.0), unused(Shape{3}, 0.0);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto mid = relu(add(a, b));
    // b also feeds a branch that contributes zero gradient.
    auto loss = sum(add(mid, scale(b, 0.0)));
    loss.backward();
    CHECK(a.has_grad());
    CHECK(b.has_grad());
    CHECK(mid.has_grad());
    CHECK_FALSE(unused.has_grad());
}

TEST_CASE("no-grad guard suppresses graph construction") {
    Tensor w(Shape{2}, 1.0f);
    w.set_requires_grad(true);
    Tensor y;
    {
        NoGradGuard g;
        y = relu(w);
    }
    CHECK_FALSE(y.requires_grad());
    CHECK(relu(w).requires_grad());
}

TEST_CASE("gemm matches naive product for all transpose combinations") {
    Rng rng(3);
    std::uniform_int_distribution<int> dim(1, 70);
    std::normal_distribution<double> val;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
        const bool ta = trial & 1, tb = trial & 2;
        std::vector<double> a(m * k), b(k * n), c(m * n), ref(m * n);
        for (auto& v : a) v = val(rng);
        for (auto& v : b) v = val(rng);
        for (auto& v : c) v = val(rng);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = ta ? a[p * m + i] : a[i * k + p];
                    const double bv = tb ? b[j * k + p] : b[p * n + j];
                    s += av * bv;
                }
                ref[i * n + j] = 1.5 * s + 0.5 * c[i * n + j];
            }
        gemm<double>(ta, tb, m, n, k, 1.5, a.data(), ta ? m : k, b.data(), tb ? k : n, 0.5,
                     c.data(), n);
        for (std::size_t i = 0; i < m * n; ++i) REQUIRE(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("loss primitive gradients match finite differences") {
    for (const auto& c : testing::layer_gradient_cases()) {
        if (c.name.find('+') == std::string::npos && c.name != "concat_channels" && c.name != "concat_batch") continue;
        CAPTURE(c.name);
        CHECK(c.run().max_rel_error < 1e-3);
    }
}

TEST_CASE("binary cross-entropy at p = 0.5 is ln 2 for any target") {
    Tensor p(Shape{4}, 0.5f);
    for (float t : {0.0f, 0.9f, 1.0f}) {
        auto v = mean(binary_cross_entropy(p, Tensor(Shape{4}, t))).item();
        CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }
}

TEST_CASE("first Adam step moves by exactly lr") {
    Tensor w(Shape{1}, 0.0f);
    w.set_requires_grad(true);
    Adam<float> opt({w}, AdamOptions{0.0002, 0.5, 0.999, 1e-8});
    w.mutable_grad()[0] = 1.0f;
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(-0.0002).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("Adam leaves parameters unchanged under zero gradient") {
    Tensor w(Shape{3}, std::vector<float>{1, 2, 3});
    w.set_requires_grad(true);
    Adam<float> opt({w});
    w.mutable_grad();
    opt.step();
    CHECK(w.data()[0] == 1.0f);
    CHECK(w.data()[2] == 3.0f);
}

TEST_CASE("Adam rejects parameters without gradients") {
    Tensor w(Shape{1}, 1.0f);
    w.set_requires_grad(true);
    Adam<float> opt({w});
    CHECK_THROWS(opt.step());
}

TEST_CASE("Adam decreases a quadratic bowl monotonically") {
    TensorD w(Shape{1}, 1.0);
    w.set_requires_grad(true);
    Adam<double> opt({w}, AdamOptions{0.01, 0.5, 0.999, 1e-8});
    double prev = 1.0;
    for (int i = 0; i < 100; ++i) {
        opt.zero_grad();
        auto f = sum(mul(w, w));
        CHECK(f.item() <= prev);
        prev = f.item();
        f.backward();
        opt.step();
    }
    CHECK(prev < 0.5);
}

TEST_CASE("tensor container round-trips names, shapes and bits") {
    Rng rng(11);
    std::normal_distribution<float> dist;
    TensorFile file;
    std::vector<Tensor> originals;
    for (int i = 0; i < 6; ++i) {
        Shape s;
        for (int r = 0; r <= i % 4; ++r) s.push_back(1 + (rng() % 5));
        std::vector<float> v(shape_numel(s));
        for (auto& x : v) x = dist(rng);
        originals.emplace_back(s, v);
        file.put("layer" + std::to_string(i) + ".weight", originals.back());
    }
    file.put_text("spec", "generator depth=8\nwidth=64");
    const auto path = std::filesystem::temp_directory_path() / "sinpaint_container_test.sptn";
    file.save(path);
    auto loaded = TensorFile::load(path);
    CHECK(loaded.names() == file.names());
    for (int i = 0; i < 6; ++i) {
        auto t = loaded.get("layer" + std::to_string(i) + ".weight");
        CHECK(t.shape() == originals[i].shape());
        CHECK(std::equal(t.data().begin(), t.data().end(), originals[i].data().begin()));
    }
    CHECK(loaded.text("spec").value() == "generator depth=8\nwidth=64");
    CHECK(loaded.serialize() == file.serialize());

    std::ifstream in(path, std::ios::binary);
    char magic[5];
    in.read(magic, 5);
    CHECK(std::string(magic, 5) == "SPTN1");
    std::filesystem::remove(path);
}

TEST_CASE("tensor container rejects corrupt input") {
    TensorFile file;
    file.put("w", Tensor(Shape{4}, 1.0f));
    auto bytes = file.serialize();
    CHECK_THROWS(TensorFile::deserialize("SPTN2" + bytes.substr(5)));
    CHECK_THROWS(TensorFile::deserialize(bytes.substr(0, bytes.size() - 3)));
    CHECK_THROWS_AS(file.get("missing"), std::out_of_range);
}
