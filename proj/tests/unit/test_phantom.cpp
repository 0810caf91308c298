#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sinpaint/data/dataset.hpp"
#include "sinpaint/data/phantom.hpp"
#include "sinpaint/errors.hpp"
#include "sinpaint/io/keyvalue.hpp"
#include "sinpaint/tomo/projector.hpp"

using namespace sinpaint;
using namespace sinpaint::data;
namespace fs = std::filesystem;

namespace {

double total(const Array2D& a) {
    double s = 0.0;
    for (float v : a.values) s += v;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sinpaint_test_" + name);
    fs::remove_all(p);
    return p;
}

DatasetConfig small_config(std::size_t n) {
    DatasetConfig c;
    c.n_samples = n;
    c.image_side = 64;
    c.n_angles = 64;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("empty phantom is pure background") {
    CirclePhantomSpec spec;
    spec.image_side = 32;
    spec.background = Background::full;
    const auto full = render_phantom(spec);
    for (float v : full.values) CHECK(v == 1.0f);

    spec.background = Background::fov;
    const auto disk = render_phantom(spec);
    const double c = 15.5, r = fov_radius(32);
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j) {
            const bool in = (i - c) * (i - c) + (j - c) * (j - c) <= r * r;
            CHECK(disk(i, j) == (in ? 1.0f : 0.0f));
        }
}

TEST_CASE("centered disk of radius 50 covers about pi r^2 pixels") {
    CirclePhantomSpec spec;
    spec.noise_sigma = 0.0;
    spec.circles = {Circle{0, 0, 50, 25}};
    const auto img = render_phantom(spec);
    std::size_t count = 0;
    for (float v : img.values) count += v == 25.0f;
    const double area = M_PI * 50 * 50;
    CHECK(std::abs(double(count) - area) <= 0.02 * area);
}

TEST_CASE("object noise has the configured variance") {
    CirclePhantomSpec spec;
    spec.noise_sigma = 0.5;
    spec.seed = 9;
    spec.circles = {Circle{0, 0, 50, 25}};
    const auto img = render_phantom(spec);
    double s = 0.0, ss = 0.0;
    std::size_t n = 0;
    const double c = 127.5;
    for (std::size_t i = 0; i < 256; ++i)
        for (std::size_t j = 0; j < 256; ++j) {
            if ((i - c) * (i - c) + (j - c) * (j - c) > 2500) continue;
            s += img(i, j);
            ss += double(img(i, j)) * img(i, j);
            ++n;
        }
    REQUIRE(n > 7000);
    const double mean = s / n, var = ss / n - mean * mean;
    CHECK(mean == doctest::Approx(25.0).epsilon(0.01));
    CHECK(var == doctest::Approx(0.25).epsilon(0.10));
    CHECK(render_phantom(spec) == img);
}

TEST_CASE("circles outside the field of view are rejected") {
    CirclePhantomSpec spec;
    spec.circles = {Circle{100, 0, 40, 25}};
    CHECK_THROWS_AS(render_phantom(spec), ConfigError);
    spec.circles = {Circle{0, 0, 10, -1}};
    CHECK_THROWS_AS(render_phantom(spec), ConfigError);
}

TEST_CASE("two-object prior holds two distinct densities over a zero background") {
    CirclePhantomSpec spec;
    spec.circles = {Circle{-40, 0, 20, 25}, Circle{40, 10, 15, 25}};
    PriorDistribution pd;
    pd.drop_fraction = 0.0;
    Rng rng(3);
    const auto prior = render_prior(make_prior_spec(spec, pd, rng));
    std::set<float> values(prior.values.begin(), prior.values.end());
    CHECK(values.size() == 3);
    CHECK(values.count(0.0f) == 1);
    for (float v : values) CHECK((v == 0.0f || (v >= 0.2f * 25 && v <= 25.0f)));

    PriorSpec empty;
    empty.image_side = 32;
    const auto blank = render_prior(empty);
    for (float v : blank.values) CHECK(v == 0.0f);
}

TEST_CASE("phantom and prior share the same support") {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const auto spec = random_phantom_spec(128, PhantomDistribution{}, rng);
        PriorDistribution pd;
        pd.drop_fraction = 0.0;
        const auto phantom = render_phantom(spec);
        const auto prior = render_prior(make_prior_spec(spec, pd, rng));
        // Inside the field of view the background is 1, objects are ~25.
        for (std::size_t i = 0; i < phantom.size(); ++i) {
            CHECK((phantom.values[i] > 5.0f) == (prior.values[i] != 0.0f));
        }
    }
}

TEST_CASE("random layouts are non-overlapping and inside the field of view") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spec = random_phantom_spec(256, PhantomDistribution{}, rng);
        CHECK(spec.circles.size() >= 5);
        CHECK(spec.circles.size() <= 15);
        for (std::size_t a = 0; a < spec.circles.size(); ++a) {
            const auto& c = spec.circles[a];
            CHECK(c.radius >= 10.0);
            CHECK(c.radius <= 40.0);
            CHECK(std::hypot(c.cx, c.cy) + c.radius <= fov_radius(256));
            for (std::size_t b = a + 1; b < spec.circles.size(); ++b) {
                const auto& o = spec.circles[b];
                CHECK(std::hypot(c.cx - o.cx, c.cy - o.cy) >= c.radius + o.radius);
            }
        }
    }
}

TEST_CASE("prior drops the smallest tenth of the circles") {
    CirclePhantomSpec spec;
    for (int i = 0; i < 10; ++i) spec.circles.push_back(Circle{-90.0 + 20 * i, 0, 3.0 + i * 0.5, 25});
    Rng rng(6);
    const auto prior = make_prior_spec(spec, PriorDistribution{}, rng);
    REQUIRE(prior.circles.size() == 9);
    for (const auto& c : prior.circles) CHECK(c.radius > 3.0);
}

TEST_CASE("boundary-only prior leaves the interior empty") {
    PriorSpec p;
    p.mode = PriorMode::boundary_only;
    p.circles = {Circle{0, 0, 20, 10}};
    const auto img = render_prior(p);
    CHECK(img(127, 127) == 0.0f);
    CHECK(img(127, 127 + 20) == 10.0f);  // x = 19.5, inside the outer 1-pixel band
}

TEST_CASE("defect injection") {
    CirclePhantomSpec spec;
    spec.noise_sigma = 0.0;
    spec.circles = {Circle{0, 0, 40, 25}};
    SUBCASE("zero defects leave the spec unchanged") {
        const auto out = inject_defects(spec, DefectSpec{});
        CHECK(out.holes.empty());
        CHECK(render_phantom(out) == render_phantom(spec));
    }
    SUBCASE("one radius-5 defect removes about 24 pi 25 of mass") {
        DefectSpec d;
        d.count = 1;
        d.radius_min = d.radius_max = 5.0;
        d.seed = 11;
        const auto out = inject_defects(spec, d);
        REQUIRE(out.holes.size() == 1);
        const double drop = total(render_phantom(spec)) - total(render_phantom(out));
        const double expected = 24.0 * M_PI * 25.0;
        CHECK(std::abs(drop - expected) <= 0.05 * expected);
    }
    SUBCASE("the prior is untouched by defects") {
        DefectSpec d;
        d.count = 2;
        d.seed = 12;
        const auto out = inject_defects(spec, d);
        Rng r1(1), r2(1);
        const tomo::Projector proj(tomo::Geometry{});
        CHECK(proj.forward(render_prior(make_prior_spec(spec, {}, r1))) ==
              proj.forward(render_prior(make_prior_spec(out, {}, r2))));
    }
    SUBCASE("unplaceable defects are reported") {
        CirclePhantomSpec tiny = spec;
        tiny.circles = {Circle{0, 0, 5, 25}};
        DefectSpec d;
        d.count = 1;
        d.radius_min = d.radius_max = 8.0;
        CHECK_THROWS_AS(inject_defects(tiny, d), InvariantError);
    }
}

TEST_CASE("percentile interpolates between order statistics") {
    CHECK(percentile({4, 1, 3, 2}, 50) == doctest::Approx(2.5));
    CHECK(percentile({4, 1, 3, 2}, 100) == 4.0);
    CHECK(percentile({4, 1, 3, 2}, 0) == 1.0);
    std::vector<float> v(201);
    for (int i = 0; i <= 200; ++i) v[i] = float(i);
    CHECK(percentile(v, 99.5) == doctest::Approx(199.0));
}

TEST_CASE("dataset split arithmetic") {
    DatasetConfig c;
    c.n_samples = 10;
    c.split = 0.9;
    CHECK(c.n_train() == 9);
    c.n_samples = 200;
    CHECK(c.n_train() == 180);
    c.n_samples = 80;
    c.split = 0.8;
    CHECK(c.n_train() == 64);
}

TEST_CASE("build_dataset writes a reproducible, mass-conserving dataset") {
    auto cfg = small_config(10);
    cfg.defects = true;
    const auto root = scratch("dataset_a");
    const auto m = build_dataset(cfg, root);
    CHECK(m.split(true).size() == 9);
    CHECK(m.split(false).size() == 1);
    CHECK(m.norm_constant > 0.0);

    const auto loaded = DatasetManifest::load(root / "manifest.txt");
    CHECK(loaded.to_keyvalue().str() == m.to_keyvalue().str());
    for (const auto& e : loaded.samples) {
        const auto s = load_sample(root / e.file);
        CHECK(s.id == e.id);
        CHECK(mass_deviation(s.sinogram) < 0.005);
        REQUIRE(s.sinogram_defect.has_value());
        for (float v : s.sinogram.values) CHECK(v >= 0.0f);
        for (float v : s.prior_sinogram.values) CHECK(v >= 0.0f);
        CHECK(total(*s.phantom_defect) < total(s.phantom));
    }

    const auto root_b = scratch("dataset_b");
    build_dataset(cfg, root_b);
    CHECK(slurp(root / "manifest.txt") == slurp(root_b / "manifest.txt"));
    for (const auto& e : m.samples) CHECK(slurp(root / e.file) == slurp(root_b / e.file));

    const tomo::Projector proj(cfg.geometry());
    CHECK(generate_sample(cfg, 3, proj).sinogram == load_sample(root / m.samples[3].file).sinogram);
    fs::remove_all(root);
    fs::remove_all(root_b);
}

TEST_CASE("manifest rejects foreign files") {
    CHECK_THROWS_AS(DatasetManifest::from_keyvalue(io::KeyValue::parse("seed = 3\n")), ConfigError);
}

TEST_CASE("key-value text round trip and errors") {
    io::KeyValue kv;
    kv.set("alpha", 0.1);
    kv.set("steps", std::uint64_t(12));
    kv.set("name", "x y");
    kv.set("flag", true);
    const auto back = io::KeyValue::parse("# comment\n" + kv.str());
    CHECK(back.get_double("alpha") == 0.1);
    CHECK(back.get_u64("steps") == 12);
    CHECK(back.get_string("name") == "x y");
    CHECK(back.get_bool("flag"));
    CHECK(back.get_u64("missing", 7) == 7);
    CHECK_THROWS_AS(back.get_u64("alpha"), ConfigError);
    CHECK_THROWS_AS(back.get_string("missing"), ConfigError);
    CHECK_THROWS_AS(io::KeyValue::parse("no equals sign"), ConfigError);
}
