#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sinpaint/tomo/projector.hpp"
#include "support/images.hpp"

using namespace sinpaint;
using namespace sinpaint::tomo;
using sinpaint::testing::disk_image;
using sinpaint::testing::inner;
using sinpaint::testing::random_image;

namespace {

Geometry small_geometry(std::size_t n) {
    Geometry g;
    g.n_detectors = n;
    g.n_angles = n;
    return g;
}

// Pixel-center disk rasterization at arbitrary center.
void add_disk(Array2D& img, double cx, double cy, double r, float d) {
    const double c = (double(img.rows) - 1.0) / 2.0;
    for (std::size_t i = 0; i < img.rows; ++i)
        for (std::size_t j = 0; j < img.cols; ++j) {
            const double x = double(j) - c - cx, y = double(i) - c - cy;
            if (x * x + y * y <= r * r) img(i, j) += d;
        }
}

double psnr_direct(const Array2D& ref, const Array2D& x) {
    const auto [lo, hi] = std::minmax_element(ref.values.begin(), ref.values.end());
    double mse = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = double(ref.values[i]) - double(x.values[i]);
        mse += d * d;
    }
    mse /= double(ref.size());
    const double range = double(*hi) - double(*lo);
    return 10.0 * std::log10(range * range / mse);
}

}  // namespace

TEST_CASE("geometry defaults and angle spacing") {
    Geometry g;
    CHECK(g.n_detectors == 256);
    CHECK(g.n_angles == 256);
    CHECK(g.angle(0) == 0.0);
    CHECK(g.angle(128) == doctest::Approx(M_PI / 2));
    CHECK(g.angle(255) < M_PI);
    g.n_angles = 0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("radon of the zero image is zero") {
    const auto s = radon(Array2D(64, 64), small_geometry(64));
    CHECK(std::all_of(s.values.begin(), s.values.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("radon rejects non-square or mis-sized images") {
    CHECK_THROWS_AS(radon(Array2D(64, 32), small_geometry(64)), ShapeError);
    CHECK_THROWS_AS(radon(Array2D(32, 32), small_geometry(64)), ShapeError);
}

TEST_CASE("radon is linear and non-negative") {
    Rng rng(1);
    const auto geom = small_geometry(48);
    const auto f = random_image(48, 48, rng), g = random_image(48, 48, rng);
    Array2D combo(48, 48);
    for (std::size_t i = 0; i < combo.size(); ++i) combo.values[i] = 2.0f * f.values[i] + 0.5f * g.values[i];
    const Projector p(geom);
    const auto rf = p.forward(f), rg = p.forward(g), rc = p.forward(combo);
    for (std::size_t i = 0; i < rc.size(); ++i) {
        CHECK(rc.values[i] == doctest::Approx(2.0 * rf.values[i] + 0.5 * rg.values[i]).epsilon(1e-5));
        CHECK(rf.values[i] >= 0.0f);
    }
}

TEST_CASE("backprojection is the adjoint of the projector") {
    Rng rng(2);
    for (std::size_t n : {32u, 64u}) {
        Geometry geom = small_geometry(n);
        geom.n_angles = n / 2 + 3;
        const Projector p(geom);
        const auto f = random_image(n, n, rng, -1.0, 1.0);
        const auto g = random_image(geom.n_angles, n, rng, -1.0, 1.0);
        const double lhs = inner(p.forward(f), g), rhs = inner(f, p.backproject(g));
        CHECK(std::abs(lhs - rhs) <= 1e-3 * std::abs(lhs));
    }
}

TEST_CASE("centered disk projects to the analytic chord profile at every angle") {
    const std::size_t n = 256;
    const double rho = 100.0, d = 1.0;
    const auto sino = radon(disk_image(n, rho, d), Geometry{});
    const double peak = 2.0 * d * rho;
    double worst = 0.0;
    for (std::size_t a = 0; a < sino.rows; ++a)
        for (std::size_t k = 0; k < n; ++k) {
            const double s = double(k) - 127.5;
            const double chord = std::abs(s) < rho ? 2.0 * d * std::sqrt(rho * rho - s * s) : 0.0;
            worst = std::max(worst, std::abs(sino(a, k) - chord));
        }
    MESSAGE("worst chord deviation / peak = " << worst / peak);
    CHECK(worst < 0.02 * peak);
}

TEST_CASE("per-angle mass is constant for a phantom inside the field of view") {
    const std::size_t n = 128;
    Array2D img(n, n);
    add_disk(img, 0, 0, 62, 1.0f);
    add_disk(img, 20, -10, 15, 24.0f);
    add_disk(img, -30, 25, 9, 24.0f);
    add_disk(img, 5, 40, 6, 24.0f);
    const auto sino = radon(img, small_geometry(n));
    const double dev = testing::max_mass_deviation(sino);
    MESSAGE("max per-angle mass deviation = " << dev);
    CHECK(dev < 0.005);
}

TEST_CASE("rotating the image by 90 degrees shifts the angle axis") {
    const std::size_t n = 64;
    Array2D img(n, n);
    add_disk(img, 8, -5, 10, 3.0f);
    add_disk(img, -12, 14, 6, 5.0f);
    add_disk(img, 0, 0, 28, 1.0f);
    // g(x, y) = f(y, -x): g[i][j] = f[n-1-j][i]
    Array2D rot(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) rot(i, j) = img(n - 1 - j, i);
    const auto geom = small_geometry(n);
    const auto sf = radon(img, geom), sg = radon(rot, geom);
    const float peak = *std::max_element(sf.values.begin(), sf.values.end());
    const std::size_t half = geom.n_angles / 2;
    double worst = 0.0;
    for (std::size_t a = 0; a < geom.n_angles; ++a)
        for (std::size_t k = 0; k < n; ++k) {
            // R g(theta, s) = R f(theta - 90deg, s); below 90 deg wrap with s -> -s.
            const float expected = a >= half ? sf(a - half, k) : sf(a + half, n - 1 - k);
            worst = std::max(worst, double(std::abs(sg(a, k) - expected)));
        }
    CHECK(worst <= 0.02 * peak);
}

TEST_CASE("SIRT of a zero sinogram is zero") {
    const auto geom = small_geometry(32);
    const auto x = sirt(Array2D(32, 32), geom, SirtOptions{5});
    CHECK(std::all_of(x.values.begin(), x.values.end(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS_AS(sirt(Array2D(32, 32), geom, SirtOptions{0}), ConfigError);
}

TEST_CASE("SIRT residual decreases on consistent data") {
    const std::size_t n = 64;
    Array2D img(n, n);
    add_disk(img, 0, 0, 25, 1.0f);
    add_disk(img, 6, 3, 8, 20.0f);
    const auto geom = small_geometry(n);
    std::vector<double> res;
    sirt(radon(img, geom), geom, SirtOptions{100}, {}, &res);
    REQUIRE(res.size() == 100);
    CHECK(res[99] <= res[9]);
    for (std::size_t i = 1; i < res.size(); ++i) CHECK(res[i] <= res[i - 1] * (1.0 + 1e-9));
}

TEST_CASE("SIRT ignores missing rows entirely") {
    const std::size_t n = 32;
    Array2D img(n, n);
    add_disk(img, 0, 0, 10, 2.0f);
    const auto geom = small_geometry(n);
    auto sino = radon(img, geom);
    std::vector<bool> observed(n, true);
    for (std::size_t a = 8; a < 20; ++a) observed[a] = false;
    const auto base = sirt(sino, geom, SirtOptions{20}, observed);
    for (std::size_t a = 8; a < 20; ++a)
        for (auto& v : sino.row(a)) v = 1000.0f;
    CHECK(sirt(sino, geom, SirtOptions{20}, observed) == base);
}

TEST_CASE("SIRT recovers a 256x256 disk phantom above 30 dB") {
    Array2D img(256, 256);
    add_disk(img, 0, 0, 126.5, 1.0f);
    add_disk(img, 0, 0, 50, 24.0f);
    const Geometry geom;
    const auto x = sirt(radon(img, geom), geom, SirtOptions{200});
    const double p = psnr_direct(img, x);
    MESSAGE("SIRT disk PSNR = " << p);
    CHECK(p > 30.0);
}
