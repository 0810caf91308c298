#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "sinpaint/cli/run_config.hpp"
#include "sinpaint/errors.hpp"
#include "sinpaint/eval/baselines.hpp"
#include "sinpaint/eval/metrics.hpp"
#include "sinpaint/io/image.hpp"
#include "sinpaint/nn/checkpoint.hpp"
#include "sinpaint/rng.hpp"
#include "sinpaint/tomo/projector.hpp"

namespace sinpaint::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInferMaskTag = 0x696e666572;

void archive(const RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    cfg.to_keyvalue().save(dir / "run_config.txt");
}

void put_array(nn::TensorFile& f, const std::string& name, const Array2D& a) {
    f.put(name, nn::Shape{a.rows, a.cols}, a.values);
}

std::string zero_pad(std::size_t v, int width) {
    std::string s = std::to_string(v);
    return std::string(std::max(0, width - int(s.size())), '0') + s;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    const auto manifest = data::build_dataset(cfg.dataset, cfg.data_dir);
    archive(cfg, cfg.data_dir);
    out << "dataset " << cfg.data_dir.string() << "\n"
        << "  train slices       " << manifest.split(true).size() << "\n"
        << "  test slices        " << manifest.split(false).size() << "\n"
        << "  geometry           " << cfg.dataset.image_side << "x" << cfg.dataset.image_side << ", "
        << cfg.dataset.n_angles << " angles\n"
        << "  defects            " << (cfg.dataset.defects ? "yes" : "no") << "\n"
        << "  norm constant      " << manifest.norm_constant << "\n"
        << "  max mass deviation " << manifest.max_mass_deviation << "\n"
        << "  manifest digest    " << file_digest(cfg.data_dir / "manifest.txt") << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto split = data::load_dataset(cfg.data_dir, true);
    archive(cfg, cfg.out_dir);
    const auto result = train::train(split, cfg.train, cfg.out_dir, cfg.resume, &out);
    for (const auto& s : result.steps) {
        for (double v : {s.d_loss, s.g_adv, s.g_l1}) {
            if (!std::isfinite(v)) throw InvariantError("non-finite loss in training run");
        }
    }
    out << "final checkpoint " << result.final_checkpoint.string() << "\n";
    return 0;
}

int cmd_infer(const RunConfig& cfg, std::ostream& out) {
    const auto manifest = data::DatasetManifest::load(cfg.data_dir / "manifest.txt");
    const auto it = std::find_if(manifest.samples.begin(), manifest.samples.end(),
                                 [&](const data::SampleEntry& e) { return e.id == cfg.sample_id; });
    if (it == manifest.samples.end()) throw ConfigError("no sample with id " + std::to_string(cfg.sample_id));
    const auto sample = data::load_sample(cfg.data_dir / it->file);
    const bool defect = cfg.eval.use_defects && sample.sinogram_defect && sample.phantom_defect;
    const Array2D& truth = defect ? *sample.sinogram_defect : sample.sinogram;
    const Array2D& slice = defect ? *sample.phantom_defect : sample.phantom;

    ops::AngularMask mask;
    if (cfg.mask_start) {
        mask = ops::AngularMask::from_fraction(truth.rows, cfg.fraction, *cfg.mask_start);
    } else {
        Rng rng(derive_seed(cfg.seed, {kInferMaskTag, sample.id}));
        mask = ops::AngularMask::random(truth.rows, cfg.fraction, rng);
    }
    const auto scarce = ops::apply_mask(truth, mask);

    Array2D inpainted;
    if (cfg.method == "linear") {
        inpainted = eval::linear_interp(scarce, mask);
    } else if (cfg.method == "cad" || cfg.method == "scaled_cad") {
        inpainted = eval::cad_replace(scarce, sample.prior_sinogram, mask, cfg.method == "scaled_cad");
    } else {
        if (!cfg.checkpoint) throw ConfigError("method " + cfg.method + " needs --checkpoint");
        const auto model = train::InpaintingModel::load(*cfg.checkpoint);
        if (train::to_string(model.kind()) != cfg.method) {
            throw ConfigError("checkpoint holds a " + train::to_string(model.kind()) + " model, not " + cfg.method);
        }
        inpainted = model.inpaint(scarce, sample.prior_sinogram, mask);
    }
    for (std::size_t a = 0; a < truth.rows; ++a) {
        if (!mask.missing(a) && !std::equal(inpainted.row(a).begin(), inpainted.row(a).end(), scarce.row(a).begin()))
            throw InvariantError("observed row " + std::to_string(a) + " changed during inpainting");
    }

    const auto geom = manifest.config.geometry();
    tomo::SirtOptions so;
    so.iterations = cfg.sirt_iterations;
    const auto recon = tomo::sirt(inpainted, geom, so);
    const auto scarce_recon = tomo::sirt(scarce, geom, so, mask.observed());

    const fs::path dir = cfg.out_dir / ("infer_" + zero_pad(sample.id, 4) + "_" + cfg.method);
    archive(cfg, dir);
    nn::TensorFile f;
    f.put_text("sample_id", std::to_string(sample.id));
    f.put_text("method", cfg.method);
    f.put_text("mask.start", std::to_string(mask.start));
    f.put_text("mask.count", std::to_string(mask.count));
    put_array(f, "scarce", scarce);
    put_array(f, "inpainted", inpainted);
    put_array(f, "truth", truth);
    put_array(f, "reconstruction", recon);
    put_array(f, "scarce_reconstruction", scarce_recon);
    put_array(f, "phantom", slice);
    f.save(dir / "inpainted.sptn");
    io::write_png(dir / "sinogram_scarce.png", scarce);
    io::write_png(dir / "sinogram_inpainted.png", inpainted);
    io::write_png(dir / "sinogram_truth.png", truth);
    io::write_png(dir / "reconstruction.png", recon);
    io::write_png(dir / "reconstruction_scarce.png", scarce_recon);
    io::write_png(dir / "phantom.png", slice);

    out << "sample " << sample.id << ", method " << cfg.method << ", missing angles [" << mask.start << ", "
        << mask.start + mask.count << ")\n"
        << "  sinogram       psnr " << eval::psnr(inpainted, truth) << "  ssim " << eval::ssim(inpainted, truth)
        << "\n"
        << "  reconstruction psnr " << eval::psnr(recon, slice) << "  ssim " << eval::ssim(recon, slice) << "\n"
        << "  outputs in " << dir.string() << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto split = data::load_dataset(cfg.data_dir, false);
    archive(cfg, cfg.out_dir);
    const auto report = eval::evaluate(split, cfg.eval, &out);
    eval::write_results_csv(report, cfg.out_dir / "results.csv");
    eval::write_summary_csv(report, cfg.out_dir / "summary.csv");
    const auto table = eval::summary_table(report);
    {
        std::ofstream t(cfg.out_dir / "summary.txt");
        t << table;
    }
    out << table;

    using Getter = double (*)(const eval::SummaryRow&);
    const std::vector<std::pair<std::string, Getter>> metrics = {
        {"psnr_sino", [](const eval::SummaryRow& s) { return s.psnr_sino.mean; }},
        {"ssim_sino", [](const eval::SummaryRow& s) { return s.ssim_sino.mean; }},
        {"psnr_img", [](const eval::SummaryRow& s) { return s.psnr_img.mean; }},
        {"ssim_img", [](const eval::SummaryRow& s) { return s.ssim_img.mean; }},
    };
    for (const auto& [name, get] : metrics) {
        if (!cfg.eval.reconstruct && name.ends_with("_img")) continue;
        io::LinePlot plot;
        plot.title = name + " vs missing fraction";
        plot.x_label = "missing fraction";
        plot.y_label = name;
        std::map<std::string, io::Series> by_method;
        for (const auto& s : report.summary) {
            auto& series = by_method[s.method];
            series.name = s.method;
            series.x.push_back(s.fraction);
            series.y.push_back(get(s));
        }
        for (auto& [m, s] : by_method) plot.series.push_back(std::move(s));
        io::write_png(cfg.out_dir / (name + ".png"), io::render(plot));
    }
    out << "results in " << cfg.out_dir.string() << "\n";
    return 0;
}

template <typename T>
void apply(std::optional<T>& flag, T& target) {
    if (flag) target = *flag;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Prior-conditioned sinogram inpainting for limited-angle CT", "sinpaint"};
    app.require_subcommand(1);
    std::optional<std::string> config_file;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_file, "key = value run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed for every random draw of the run");

    std::optional<std::string> data_dir, out_dir, checkpoint, resume;
    std::optional<std::size_t> n, side, angles, sample_id, mask_start, sirt_iters, epochs, batch, depth, width,
        disc_layers, disc_width, topk, ckpt_every, max_samples;
    std::optional<double> split, mass_tol, lr, lambda, fraction;
    std::optional<std::string> prior_mode, model, method;
    std::vector<double> fractions;
    std::vector<std::string> methods, checkpoints;
    bool defects = false, use_defects = false, no_reconstruct = false;

    auto* gen = app.add_subcommand("generate", "build a synthetic phantom dataset");
    gen->add_option("--out,--data", data_dir, "dataset directory");
    gen->add_option("--n", n, "number of slices");
    gen->add_option("--split", split, "training share of the slices");
    gen->add_option("--side", side, "image side and detector count");
    gen->add_option("--angles", angles, "projection angles over 180 degrees");
    gen->add_option("--prior-mode", prior_mode, "boundary_only, uniform or per_object_random");
    gen->add_option("--mass-tolerance", mass_tol, "allowed relative per-angle mass deviation");
    gen->add_flag("--defects", defects, "also store defect variants of every slice");

    auto* tr = app.add_subcommand("train", "train an inpainting network");
    tr->add_option("--data", data_dir, "dataset directory");
    tr->add_option("--out", out_dir, "run directory for checkpoints and loss logs");
    tr->add_option("--model", model, "pix2pix_prior, unet or unet_prior");
    tr->add_option("--epochs", epochs);
    tr->add_option("--batch-size", batch);
    tr->add_option("--lr", lr);
    tr->add_option("--lambda", lambda, "weight of the masked L1 term");
    tr->add_option("--depth", depth, "U-Net depth; the input side must be 2^depth");
    tr->add_option("--base-width", width);
    tr->add_option("--disc-layers", disc_layers);
    tr->add_option("--disc-base-width", disc_width);
    tr->add_option("--topk", topk, "generator samples kept per batch of 8");
    tr->add_option("--checkpoint-every", ckpt_every, "epochs between checkpoints");
    tr->add_option("--resume", resume, "checkpoint to continue from");
    tr->add_flag("--use-defects", use_defects, "train on the defect variants");

    auto* inf = app.add_subcommand("infer", "inpaint one slice and reconstruct it");
    inf->add_option("--data", data_dir, "dataset directory");
    inf->add_option("--out", out_dir, "output directory");
    inf->add_option("--checkpoint", checkpoint, "trained checkpoint for learned methods");
    inf->add_option("--sample", sample_id, "sample id");
    inf->add_option("--method", method, "linear, cad, scaled_cad, unet, unet_prior or pix2pix_prior");
    inf->add_option("--fraction", fraction, "missing share of the angles");
    inf->add_option("--mask-start", mask_start, "first missing angle; random when omitted");
    inf->add_option("--sirt-iterations", sirt_iters);
    inf->add_flag("--use-defects", use_defects, "inpaint the defect variant");

    auto* ev = app.add_subcommand("evaluate", "compare methods over the test split");
    ev->add_option("--data", data_dir, "dataset directory");
    ev->add_option("--out", out_dir, "output directory");
    ev->add_option("--fractions", fractions, "missing fractions to sweep")->delimiter(',');
    ev->add_option("--methods", methods, "methods to compare")->delimiter(',');
    ev->add_option("--checkpoint", checkpoints, "method=path for a learned method");
    ev->add_option("--sirt-iterations", sirt_iters);
    ev->add_option("--max-samples", max_samples, "evaluate only the first N test slices");
    ev->add_flag("--no-reconstruct", no_reconstruct, "skip SIRT and image-space metrics");
    ev->add_flag("--use-defects", use_defects, "evaluate on the defect variants");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (config_file) cfg = RunConfig::from_keyvalue(io::KeyValue::load(*config_file));
        if (seed) {
            cfg.seed = *seed;
            cfg.propagate_seed();
        }
        cfg.subcommand = app.get_subcommands().front()->get_name();
        if (data_dir) cfg.data_dir = *data_dir;
        if (out_dir) cfg.out_dir = *out_dir;
        if (checkpoint) cfg.checkpoint = fs::path(*checkpoint);
        if (resume) cfg.resume = fs::path(*resume);

        apply(n, cfg.dataset.n_samples);
        apply(split, cfg.dataset.split);
        apply(side, cfg.dataset.image_side);
        apply(angles, cfg.dataset.n_angles);
        apply(mass_tol, cfg.dataset.mass_tolerance);
        if (prior_mode) cfg.dataset.prior.mode = data::parse_prior_mode(*prior_mode);
        if (defects) cfg.dataset.defects = true;

        if (model) cfg.train.model = train::parse_model_kind(*model);
        apply(epochs, cfg.train.epochs);
        apply(batch, cfg.train.batch_size);
        apply(lr, cfg.train.lr);
        apply(lambda, cfg.train.lambda_l1);
        apply(depth, cfg.train.depth);
        apply(width, cfg.train.base_width);
        apply(disc_layers, cfg.train.disc_layers);
        apply(disc_width, cfg.train.disc_base_width);
        apply(topk, cfg.train.topk_keep);
        apply(ckpt_every, cfg.train.checkpoint_every);

        apply(sample_id, cfg.sample_id);
        apply(method, cfg.method);
        apply(fraction, cfg.fraction);
        if (mask_start) cfg.mask_start = *mask_start;
        if (sirt_iters) cfg.sirt_iterations = cfg.eval.sirt_iterations = *sirt_iters;

        if (!fractions.empty()) cfg.eval.fractions = fractions;
        if (!methods.empty()) cfg.eval.methods = methods;
        for (const auto& c : checkpoints) {
            const auto eq = c.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--checkpoint expects method=path, got '" + c + "'");
            cfg.eval.checkpoints[c.substr(0, eq)] = c.substr(eq + 1);
        }
        apply(max_samples, cfg.eval.max_samples);
        if (no_reconstruct) cfg.eval.reconstruct = false;
        if (use_defects) cfg.train.use_defects = cfg.eval.use_defects = true;

        apply_env_overrides(cfg);
        cfg.validate();

        if (cfg.subcommand == "generate") return cmd_generate(cfg, out);
        if (cfg.subcommand == "train") return cmd_train(cfg, out);
        if (cfg.subcommand == "infer") return cmd_infer(cfg, out);
        return cmd_evaluate(cfg, out);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantError& e) {
        err << "invariant check failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sinpaint::cli
