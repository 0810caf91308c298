// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "sinpaint/errors.hpp"
#include "sinpaint/eval/baselines.hpp"
#include "sinpaint/eval/evaluate.hpp"
#include "sinpaint/eval/metrics.hpp"
#include "sinpaint/models/networks.hpp"
#include "sinpaint/train/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/images.hpp"

using namespace sinpaint;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

void add_disk(Array2D& img, double r, float d) {
    const double c = (double(img.rows) - 1.0) / 2.0;
    for (std::size_t i = 0; i < img.rows; ++i)
        for (std::size_t j = 0; j < img.cols; ++j) {
            const double x = double(j) - c, y = double(i) - c;
            if (x * x + y * y <= r * r) img(i, j) += d;
        }
}

// Criterion 1.
Verdict gradient_suite() {
    const auto t = Clock::now();
    double worst = 0.0;
    std::string worst_name;
    std::size_t cases = 0;
    for (const auto& c : testing::layer_gradient_cases()) {
        const auto r = c.run();
        ++cases;
        if (r.checked == 0 || r.max_rel_error > worst) {
            worst = r.checked == 0 ? INFINITY : r.max_rel_error;
            worst_name = c.name;
        }
    }
    const double s = seconds_since(t);
    return {worst < 1e-3 && s < 60.0, std::to_string(cases) + " cases, worst relative error " + num(worst) + " (" +
                                          worst_name + "), " + num(s, 3) + " s"};
}

// Criterion 2: writes sample_id,mass_deviation to `csv`.
Verdict conservation(const fs::path& csv) {
    const auto t = Clock::now();
    data::DatasetConfig c;
    c.seed = 1;
    const tomo::Projector projector(c.geometry());
    std::ofstream out(csv);
    out << "sample_id,mass_deviation\n";
    double worst = 0.0;
    for (std::size_t id = 0; id < 50; ++id) {
        const auto s = data::generate_sample(c, id, projector);
        const double d = data::mass_deviation(s.sinogram);
        worst = std::max(worst, d);
        out << id << ',' << std::setprecision(9) << d << '\n';
    }
    const double sec = seconds_since(t);
    return {worst < 0.005 && sec < 60.0,
            "50 phantoms at 256x256, 256 angles, worst deviation " + num(100 * worst) + "%, " + num(sec, 3) + " s"};
}

// Criterion 3.
Verdict projector_oracle() {
    const std::size_t n = 256;
    const double rho = 100.0;
    const auto sino = tomo::radon(testing::disk_image(n, rho, 1.0), tomo::Geometry{});
    const double peak = 2.0 * rho;
    double worst = 0.0;
    for (std::size_t a = 0; a < sino.rows; ++a)
        for (std::size_t k = 0; k < n; ++k) {
            const double s = double(k) - 127.5;
            const double chord = std::abs(s) < rho ? 2.0 * std::sqrt(rho * rho - s * s) : 0.0;
            worst = std::max(worst, std::abs(double(sino(a, k)) - chord));
        }
    return {worst < 0.02 * peak, "disk radius 100, worst deviation " + num(100 * worst / peak) + "% of peak"};
}

// Criterion 4.
Verdict sirt_round_trip() {
    const auto t = Clock::now();
    Array2D img(256, 256);
    add_disk(img, 126.5, 1.0f);
    add_disk(img, 50.0, 24.0f);
    const tomo::Geometry geom;
    const auto x = tomo::sirt(tomo::radon(img, geom), geom, tomo::SirtOptions{200});
    const double p = eval::psnr(x, img);
    const double s = seconds_since(t);
    return {p > 30.0 && s < 300.0, "PSNR " + num(p) + " dB after 200 iterations, " + num(s, 3) + " s"};
}

// Criterion 6: ten inputs one at a time in eval mode, then as one training-mode batch with dropout.
Verdict mask_annihilation() {
    Rng rng(derive_seed(1, {6}));
    models::UNet g(models::generator_spec(), rng);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::bernoulli_distribution b(0.5);
    const std::size_t n = 256 * 256, count = 10;
    std::vector<float> xs(count * 3 * n), ms(count * n);
    for (auto& v : xs) v = u(rng);
    // Row blocks like a real prior mask plus scattered pixels.
    for (std::size_t k = 0; k < ms.size(); ++k) ms[k] = ((k / 256) % 64 < 24 || b(rng)) ? 1.0f : 0.0f;
    std::size_t off = 0, violations = 0;
    auto count_off_mask = [&](const nn::Tensor& y, std::size_t first) {
        for (std::size_t k = 0; k < y.numel(); ++k) {
            if (ms[first * n + k] != 0.0f) continue;
            ++off;
            violations += y.data()[k] != 0.0f;
        }
    };
    nn::NoGradGuard no_grad;
    for (std::size_t i = 0; i < count; ++i) {
        const nn::Tensor x(nn::Shape{1, 3, 256, 256}, std::vector<float>(xs.begin() + i * 3 * n, xs.begin() + (i + 1) * 3 * n));
        const nn::Tensor pmask(nn::Shape{1, 1, 256, 256}, std::vector<float>(ms.begin() + i * n, ms.begin() + (i + 1) * n));
        count_off_mask(g.forward(x, &pmask, {false, nullptr}), i);
    }
    const nn::Tensor pmask(nn::Shape{count, 1, 256, 256}, ms);
    count_off_mask(g.forward(nn::Tensor(nn::Shape{count, 3, 256, 256}, xs), &pmask, {true, &rng}), 0);
    return {violations == 0 && off > 0, "10 random 256x256 inputs in eval and training mode, " + std::to_string(off) +
                                             " off-mask pixels, " + std::to_string(violations) + " nonzero"};
}

// Rotation-invariant sinogram (concentric annuli), so per-angle mass is constant by construction.
Array2D concentric_sinogram(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> radius(10.0, 120.0), density(0.2, 2.0);
    std::vector<std::pair<double, double>> rings;
    for (int k = 0; k < 5; ++k) rings.emplace_back(radius(rng), density(rng));
    Array2D sino(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = double(k) - (double(n) - 1.0) / 2.0;
        double v = 0.0;
        for (const auto& [r, d] : rings)
            if (std::abs(s) < r) v += 2.0 * d * std::sqrt(r * r - s * s);
        for (std::size_t a = 0; a < n; ++a) sino(a, k) = float(v);
    }
    return sino;
}

// Criterion 7.
Verdict perfect_prior() {
    data::DatasetConfig c;
    const tomo::Projector projector(c.geometry());
    const auto s = data::generate_sample(c, 0, projector);
    Rng rng(derive_seed(1, {7}));
    double min_psnr = INFINITY, worst_rel = 0.0, phantom_rel = 0.0;
    for (double f : {0.25, 0.5, 0.75}) {
        const auto mask = ops::AngularMask::random(256, f, rng);
        min_psnr = std::min(min_psnr, eval::psnr(eval::cad_replace(ops::apply_mask(s.sinogram, mask), s.sinogram,
                                                                   mask, false),
                                                 s.sinogram));
        auto rel_error = [&](const Array2D& truth) {
            Array2D half = truth;
            for (auto& v : half.values) v *= 0.5f;
            const auto out = eval::cad_replace(ops::apply_mask(truth, mask), half, mask, true);
            double err = 0.0, peak = 0.0;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                err = std::max(err, std::abs(double(out.values[i]) - double(truth.values[i])));
                peak = std::max(peak, std::abs(double(truth.values[i])));
            }
            return err / peak;
        };
        worst_rel = std::max(worst_rel, rel_error(concentric_sinogram(256, rng)));
        phantom_rel = std::max(phantom_rel, rel_error(s.sinogram));
    }
    return {min_psnr == eval::kPsnrCap && phantom_rel < 1e-5 && worst_rel < 1e-5,
            "cad with exact prior " + num(min_psnr) + " dB (cap " + num(eval::kPsnrCap) +
                "), scaled_cad with 0.5x prior: max error / peak " + num(phantom_rel) +
                " on a generated phantom, " + num(worst_rel) + " on rotation-invariant sinograms"};
}

// Criterion 8: writes the evaluation CSV to `csv`.
Verdict scaling_direction(const fs::path& root, const fs::path& csv) {
    data::DatasetConfig c;
    c.seed = 8;
    c.n_samples = 22;
    c.split = 0.1;  // 2 train slices for the normalization constant, 20 test slices
    data::build_dataset(c, root);
    const auto test = data::load_dataset(root, false);
    eval::EvalConfig e;
    e.seed = 8;
    e.methods = {"cad", "scaled_cad"};
    e.reconstruct = false;
    const auto report = eval::evaluate(test, e);
    eval::write_results_csv(report, csv);
    std::map<std::string, std::vector<double>> l1;
    for (const auto& r : report.rows) l1[r.method].push_back(r.l1_missing);
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
    const double cad = mean(l1["cad"]), scaled = mean(l1["scaled_cad"]);
    std::string per;
    for (const auto& s : report.summary) per += " " + s.method + "@" + num(s.fraction, 2) + "=" + num(s.l1_missing.mean);
    return {test.samples.size() == 20 && scaled <= cad, std::to_string(test.samples.size()) +
                                                            " test slices, mean missing-row L1 scaled_cad " +
                                                            num(scaled) + " <= cad " + num(cad) + ";" + per};
}

struct ToyRun {
    fs::path checkpoint;
    fs::path dataset;
};

// Criterion 9: training logs and the fraction-0.5 evaluation CSV land in `dir`.
Verdict toy_training(const fs::path& dir, ToyRun* run) {
    const auto t = Clock::now();
    data::DatasetConfig c;
    c.seed = 9;
    c.n_samples = 80;
    c.split = 0.8;
    c.image_side = 64;
    c.n_angles = 64;
    c.mass_tolerance = 0.02;
    data::build_dataset(c, dir / "data");
    train::TrainConfig tc;
    tc.seed = 9;
    tc.depth = 6;
    tc.base_width = 32;
    tc.epochs = 20;
    tc.batch_size = 8;
    tc.lambda_l1 = 100.0;
    tc.checkpoint_every = 20;
    const auto split = data::load_dataset(dir / "data", true);
    const auto result = train::train(split, tc, dir / "run");

    bool finite = true;
    for (const auto& s : result.steps)
        for (double v : {s.d_loss, s.d_real, s.d_fake, s.g_adv, s.g_l1, s.g_total}) finite &= std::isfinite(v);
    const double first = result.epochs.front().mean.g_l1, last = result.epochs.back().mean.g_l1;

    eval::EvalConfig e;
    e.seed = 9;
    e.fractions = {0.5};
    e.methods = {"linear", "pix2pix_prior"};
    e.checkpoints["pix2pix_prior"] = result.final_checkpoint;
    e.reconstruct = false;
    const auto report = eval::evaluate(data::load_dataset(dir / "data", false), e);
    eval::write_results_csv(report, dir / "results.csv");
    double lin = 0.0, gan = 0.0;
    for (const auto& s : report.summary) (s.method == "linear" ? lin : gan) = s.psnr_sino.mean;
    const double sec = seconds_since(t);
    if (run) *run = {result.final_checkpoint, dir / "data"};
    return {split.samples.size() == 64 && finite && last < 0.5 * first && gan >= lin && sec < 1800.0,
            std::to_string(split.samples.size()) + " train slices, " + std::to_string(result.steps.size()) +
                " steps, losses " + (finite ? "finite" : "NOT finite") + ", masked L1 epoch 1 " + num(first) +
                " -> epoch 20 " + num(last) + " (ratio " + num(last / first, 3) + "), PSNR at 0.5: pix2pix_prior " +
                num(gan) + " dB vs linear " + num(lin) + " dB, " + num(sec, 4) + " s"};
}

// Criterion 5.
Verdict non_interference(const fs::path& dir, const ToyRun& toy) {
    data::DatasetConfig c;
    c.seed = 5;
    c.n_samples = 24;
    c.split = 1.0 / 6.0;  // 4 train, 20 test
    c.image_side = 64;
    c.n_angles = 64;
    c.mass_tolerance = 0.02;
    data::build_dataset(c, dir / "data");
    const auto test = data::load_dataset(dir / "data", false);

    std::map<std::string, train::InpaintingModel> learned;
    learned.emplace("pix2pix_prior", train::InpaintingModel::load(toy.checkpoint));
    for (auto kind : {train::ModelKind::unet, train::ModelKind::unet_prior}) {
        train::TrainConfig tc;
        tc.model = kind;
        tc.depth = 6;
        tc.base_width = 16;
        const train::Trainer fresh(tc, 1000.0);
        learned.emplace(train::to_string(kind), train::InpaintingModel::from_file(fresh.checkpoint(0)));
    }
    std::size_t checked = 0, changed = 0;
    Rng rng(derive_seed(5, {5}));
    for (const auto& s : test.samples) {
        for (double f : {0.25, 0.5, 0.75}) {
            const auto mask = ops::AngularMask::random(64, f, rng);
            const auto scarce = ops::apply_mask(s.sinogram, mask);
            std::vector<Array2D> outs = {eval::linear_interp(scarce, mask),
                                         eval::cad_replace(scarce, s.prior_sinogram, mask, false),
                                         eval::cad_replace(scarce, s.prior_sinogram, mask, true)};
            for (const auto& [name, m] : learned) outs.push_back(m.inpaint(scarce, s.prior_sinogram, mask));
            for (const auto& out : outs) {
                for (std::size_t a = 0; a < 64; ++a) {
                    if (mask.missing(a)) continue;
                    ++checked;
                    changed += !std::equal(out.row(a).begin(), out.row(a).end(), scarce.row(a).begin());
                }
            }
        }
    }
    return {test.samples.size() == 20 && changed == 0 && checked > 0,
            std::to_string(test.samples.size()) +
                " samples x 3 fractions x 6 methods (linear, cad, scaled_cad, pix2pix_prior, unet, unet_prior), " +
                std::to_string(checked) + " observed rows, " + std::to_string(changed) + " changed"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string workdir = (fs::temp_directory_path() / "sinpaint_acceptance").string();
    app.add_option("--workdir", workdir, "scratch directory, wiped at start");
    CLI11_PARSE(app, argc, argv);
    const fs::path root = workdir;
    fs::remove_all(root);
    fs::create_directories(root);

    int failures = 0;
    auto report = [&](int id, const std::string& title, const std::function<Verdict()>& fn) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << "criterion " << std::setw(2) << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << title << "  ["
                  << v.detail << "]" << std::endl;
    };

    ToyRun toy;
    report(1, "gradient suite", gradient_suite);
    report(2, "per-angle mass conservation", [&] { return conservation(root / "c2_a.csv"); });
    report(3, "projector chord oracle", projector_oracle);
    report(4, "SIRT round trip", sirt_round_trip);
    report(6, "mask annihilation", mask_annihilation);
    report(7, "perfect-prior sanity", perfect_prior);
    report(8, "scaling improves CAD", [&] { return scaling_direction(root / "c8_a", root / "c8_a.csv"); });
    report(9, "toy training run", [&] { return toy_training(root / "c9_a", &toy); });
    report(5, "non-interference", [&] {
        if (toy.checkpoint.empty()) return Verdict{false, "no trained checkpoint from criterion 9"};
        return non_interference(root / "c5", toy);
    });
    report(10, "determinism", [&] {
        conservation(root / "c2_b.csv");
        scaling_direction(root / "c8_b", root / "c8_b.csv");
        toy_training(root / "c9_b", nullptr);
        std::vector<std::pair<fs::path, fs::path>> pairs = {
            {root / "c2_a.csv", root / "c2_b.csv"},
            {root / "c8_a.csv", root / "c8_b.csv"},
            {root / "c9_a/run/losses.csv", root / "c9_b/run/losses.csv"},
            {root / "c9_a/run/epochs.csv", root / "c9_b/run/epochs.csv"},
            {root / "c9_a/results.csv", root / "c9_b/results.csv"},
        };
        std::size_t same = 0;
        std::string diff;
        for (const auto& [a, b] : pairs) {
            const auto x = slurp(a);
            if (!x.empty() && x == slurp(b)) ++same;
            else diff += " " + a.filename().string();
        }
        return Verdict{same == pairs.size(), std::to_string(same) + "/" + std::to_string(pairs.size()) +
                                                 " CSV files byte-identical" + (diff.empty() ? "" : "; differ:" + diff)};
    });
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
