#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sinpaint/errors.hpp"
#include "sinpaint/eval/evaluate.hpp"
#include "sinpaint/eval/metrics.hpp"
#include "sinpaint/train/trainer.hpp"

using namespace sinpaint;
using namespace sinpaint::eval;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("sinpaint_test_eval_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// 20 train and 20 test slices of 32x32 with 32 angles.
const fs::path& toy_root() {
    static const fs::path root = [] {
        data::DatasetConfig c;
        c.seed = 21;
        c.n_samples = 40;
        c.split = 0.5;
        c.image_side = 32;
        c.n_angles = 32;
        c.mass_tolerance = 0.02;
        const auto r = scratch("dataset");
        data::build_dataset(c, r);
        return r;
    }();
    return root;
}

const fs::path& toy_checkpoint() {
    static const fs::path ckpt = [] {
        train::TrainConfig c;
        c.seed = 3;
        c.depth = 5;
        c.base_width = 8;
        c.disc_layers = 3;
        c.disc_base_width = 8;
        c.epochs = 1;
        c.checkpoint_every = 1;
        const auto out = scratch("run");
        return train::train(data::load_dataset(toy_root(), true), c, out).final_checkpoint;
    }();
    return ckpt;
}

EvalConfig fast_config() {
    EvalConfig c;
    c.seed = 4;
    c.sirt_iterations = 20;
    c.checkpoints["pix2pix_prior"] = toy_checkpoint();
    return c;
}

}  // namespace

TEST_CASE("config round trip and validation") {
    EvalConfig c = fast_config();
    c.fractions = {0.1, 0.6};
    c.methods = {"linear", "unet"};
    c.reconstruct = false;
    io::KeyValue kv;
    c.write(kv);
    const auto r = EvalConfig::read(io::KeyValue::parse(kv.str()));
    CHECK(r.fractions == c.fractions);
    CHECK(r.methods == c.methods);
    CHECK(r.checkpoints == c.checkpoints);
    CHECK(r.reconstruct == false);
    CHECK(r.sirt_iterations == 20);

    EvalConfig bad;
    bad.methods = {"nearest"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = EvalConfig{};
    bad.fractions = {0.99};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sweep yields one row per sample, fraction and method") {
    const auto test = data::load_dataset(toy_root(), false);
    REQUIRE(test.samples.size() == 20);
    const auto report = evaluate(test, fast_config());
    CHECK(report.rows.size() == 240);
    CHECK(report.notices.empty());
    REQUIRE(report.summary.size() == 12);
    for (const auto& s : report.summary) CHECK(s.count == 20);
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const auto& a = report.rows[i - 1];
        const auto& b = report.rows[i];
        CHECK((a.method < b.method || (a.method == b.method && (a.fraction < b.fraction ||
                                                                  (a.fraction == b.fraction && a.sample_id < b.sample_id)))));
    }
    for (const auto& r : report.rows) {
        CHECK(std::isfinite(r.psnr_sino));
        CHECK(std::isfinite(r.psnr_img));
        CHECK(r.ssim_img <= 1.0);
    }
}

TEST_CASE("all methods share one mask per sample and fraction") {
    const auto cfg = fast_config();
    const auto a = evaluation_mask(cfg, 32, 7, 1);
    const auto b = evaluation_mask(cfg, 32, 7, 1);
    CHECK(a.start == b.start);
    CHECK(a.count == ops::AngularMask::missing_count(32, 0.5));
    bool differs = false;
    for (std::size_t id = 0; id < 20; ++id) differs |= evaluation_mask(cfg, 32, id, 1).start != a.start;
    CHECK(differs);
}

TEST_CASE("perfect prior gives the PSNR cap for cad_replace") {
    auto test = data::load_dataset(toy_root(), false);
    for (auto& s : test.samples) s.prior_sinogram = s.sinogram;
    EvalConfig cfg;
    cfg.methods = {"cad", "scaled_cad"};
    cfg.reconstruct = false;
    const auto report = evaluate(test, cfg);
    for (const auto& r : report.rows) {
        if (r.method == "cad") {
            CHECK(r.psnr_sino == kPsnrCap);
            CHECK(r.l1_missing == 0.0);
        }
        CHECK(std::isnan(r.psnr_img));
    }
}

TEST_CASE("missing checkpoints skip learned methods with a notice") {
    const auto test = data::load_dataset(toy_root(), false);
    EvalConfig cfg;
    cfg.methods = {"linear", "unet", "pix2pix_prior"};
    cfg.checkpoints["pix2pix_prior"] = "/nonexistent/final.sptn";
    cfg.reconstruct = false;
    cfg.max_samples = 2;
    const auto report = evaluate(test, cfg);
    CHECK(report.notices.size() == 2);
    CHECK(report.rows.size() == 6);
    for (const auto& r : report.rows) CHECK(r.method == "linear");

    cfg.methods = {"unet"};
    cfg.checkpoints["unet"] = toy_checkpoint();
    CHECK_THROWS_AS(evaluate(test, cfg), ConfigError);
}

TEST_CASE("repeated evaluation writes identical CSV bytes") {
    const auto test = data::load_dataset(toy_root(), false);
    auto cfg = fast_config();
    cfg.max_samples = 5;
    const auto dir = scratch("csv");
    write_results_csv(evaluate(test, cfg), dir / "a.csv");
    const auto report = evaluate(test, cfg);
    write_results_csv(report, dir / "b.csv");
    write_summary_csv(report, dir / "s.csv");
    const auto a = slurp(dir / "a.csv");
    CHECK(a == slurp(dir / "b.csv"));
    CHECK(a.rfind("sample_id,fraction,method,psnr_sino,ssim_sino,psnr_img,ssim_img\n", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 61);
    const auto table = summary_table(report);
    CHECK(table.find("scaled_cad") != std::string::npos);
    CHECK(table.find("+-") != std::string::npos);
}
