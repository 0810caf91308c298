#include "sinpaint/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "sinpaint/errors.hpp"
#include "sinpaint/eval/baselines.hpp"
#include "sinpaint/eval/metrics.hpp"
#include "sinpaint/train/trainer.hpp"

namespace sinpaint::eval {

namespace {

constexpr std::uint64_t kEvalMaskTag = 0x6576616c;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

Stat stat(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= double(v.size());
    for (double x : v) s.std += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(s.std / double(v.size()));
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void require_observed_rows(const Array2D& out, const Array2D& scarce, const ops::AngularMask& m,
                           const std::string& method, std::size_t id) {
    for (std::size_t a = 0; a < out.rows; ++a) {
        if (m.missing(a)) continue;
        if (!std::equal(out.row(a).begin(), out.row(a).end(), scarce.row(a).begin())) {
            throw InvariantError("method " + method + " altered observed row " + std::to_string(a) + " of sample " +
                                 std::to_string(id));
        }
    }
}

}  // namespace

bool is_learned(const std::string& method) {
    return method == "unet" || method == "unet_prior" || method == "pix2pix_prior";
}

void EvalConfig::validate() const {
    if (fractions.empty()) throw ConfigError("evaluation needs at least one missing fraction");
    for (double f : fractions) ops::AngularMask::missing_count(256, f);
    if (methods.empty()) throw ConfigError("evaluation needs at least one method");
    for (const auto& m : methods) {
        if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end()) {
            throw ConfigError("unknown method '" + m + "'");
        }
    }
    if (reconstruct && sirt_iterations < 1) throw ConfigError("sirt_iterations must be at least 1");
}

void EvalConfig::write(io::KeyValue& kv) const {
    std::string f, m;
    for (double x : fractions) f += (f.empty() ? "" : ",") + io::format_double(x);
    for (const auto& x : methods) m += (m.empty() ? "" : ",") + x;
    kv.set("eval.fractions", f);
    kv.set("eval.methods", m);
    for (const auto& [method, path] : checkpoints) kv.set("eval.checkpoint." + method, path.string());
    kv.set("eval.seed", seed);
    kv.set("eval.reconstruct", reconstruct);
    kv.set("eval.sirt_iterations", std::uint64_t(sirt_iterations));
    kv.set("eval.use_defects", use_defects);
    kv.set("eval.max_samples", std::uint64_t(max_samples));
}

EvalConfig EvalConfig::read(const io::KeyValue& kv) {
    EvalConfig c;
    if (kv.contains("eval.fractions")) {
        c.fractions.clear();
        for (const auto& s : split_list(kv.get_string("eval.fractions"))) {
            try {
                c.fractions.push_back(std::stod(s));
            } catch (const std::exception&) {
                throw ConfigError("eval.fractions: '" + s + "' is not a number");
            }
        }
    }
    if (kv.contains("eval.methods")) c.methods = split_list(kv.get_string("eval.methods"));
    for (const auto& [key, value] : kv.entries()) {
        const std::string prefix = "eval.checkpoint.";
        if (key.rfind(prefix, 0) == 0) c.checkpoints[key.substr(prefix.size())] = value;
    }
    c.seed = kv.get_u64("eval.seed", c.seed);
    c.reconstruct = kv.get_bool("eval.reconstruct", c.reconstruct);
    c.sirt_iterations = std::size_t(kv.get_u64("eval.sirt_iterations", c.sirt_iterations));
    c.use_defects = kv.get_bool("eval.use_defects", c.use_defects);
    c.max_samples = std::size_t(kv.get_u64("eval.max_samples", c.max_samples));
    c.validate();
    return c;
}

ops::AngularMask evaluation_mask(const EvalConfig& cfg, std::size_t n_angles, std::size_t sample_id,
                                 std::size_t fraction_index) {
    Rng rng(derive_seed(cfg.seed, {kEvalMaskTag, sample_id, fraction_index}));
    return ops::AngularMask::random(n_angles, cfg.fractions.at(fraction_index), rng);
}

EvalReport evaluate(const data::Dataset& split, const EvalConfig& cfg, std::ostream* log) {
    cfg.validate();
    EvalReport report;
    std::map<std::string, train::InpaintingModel> models;
    std::vector<std::string> methods;
    for (const auto& m : cfg.methods) {
        if (is_learned(m)) {
            const auto it = cfg.checkpoints.find(m);
            if (it == cfg.checkpoints.end() || !std::filesystem::exists(it->second)) {
                report.notices.push_back("skipping " + m + ": no checkpoint" +
                                         (it == cfg.checkpoints.end() ? "" : " at " + it->second.string()));
                continue;
            }
            auto model = train::InpaintingModel::load(it->second);
            if (train::to_string(model.kind()) != m) {
                throw ConfigError("checkpoint " + it->second.string() + " holds a " + train::to_string(model.kind()) +
                                  " model, not " + m);
            }
            models.emplace(m, std::move(model));
        }
        methods.push_back(m);
    }
    if (log)
        for (const auto& n : report.notices) *log << n << "\n";

    const std::size_t n = cfg.max_samples ? std::min(cfg.max_samples, split.samples.size()) : split.samples.size();
    for (std::size_t si = 0; si < n; ++si) {
        const auto& s = split.samples[si];
        const bool defect = cfg.use_defects && s.sinogram_defect && s.phantom_defect;
        const Array2D& truth = defect ? *s.sinogram_defect : s.sinogram;
        const Array2D& slice = defect ? *s.phantom_defect : s.phantom;
        const tomo::Geometry geom = split.manifest.config.geometry();
        for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
            const auto mask = evaluation_mask(cfg, truth.rows, s.id, fi);
            const auto scarce = ops::apply_mask(truth, mask);
            for (const auto& m : methods) {
                Array2D out;
                if (m == "linear") out = linear_interp(scarce, mask);
                else if (m == "cad") out = cad_replace(scarce, s.prior_sinogram, mask, false);
                else if (m == "scaled_cad") out = cad_replace(scarce, s.prior_sinogram, mask, true);
                else out = models.at(m).inpaint(scarce, s.prior_sinogram, mask);
                require_observed_rows(out, scarce, mask, m, s.id);

                MethodResult r;
                r.sample_id = s.id;
                r.fraction = cfg.fractions[fi];
                r.method = m;
                r.psnr_sino = psnr(out, truth);
                r.ssim_sino = ssim(out, truth);
                r.l1_missing = missing_row_l1(out, truth, mask);
                r.psnr_img = r.ssim_img = std::numeric_limits<double>::quiet_NaN();
                if (cfg.reconstruct) {
                    tomo::SirtOptions so;
                    so.iterations = cfg.sirt_iterations;
                    const auto recon = tomo::sirt(out, geom, so);
                    r.psnr_img = psnr(recon, slice);
                    r.ssim_img = ssim(recon, slice);
                }
                report.rows.push_back(r);
            }
        }
        if (log) *log << "evaluated sample " << s.id << " (" << (si + 1) << "/" << n << ")\n";
    }

    std::stable_sort(report.rows.begin(), report.rows.end(), [](const MethodResult& a, const MethodResult& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.fraction != b.fraction) return a.fraction < b.fraction;
        return a.sample_id < b.sample_id;
    });
    for (std::size_t i = 0; i < report.rows.size();) {
        std::size_t j = i;
        std::vector<double> ps, ss, pi, si, l1;
        while (j < report.rows.size() && report.rows[j].method == report.rows[i].method &&
               report.rows[j].fraction == report.rows[i].fraction) {
            const auto& r = report.rows[j++];
            ps.push_back(r.psnr_sino);
            ss.push_back(r.ssim_sino);
            pi.push_back(r.psnr_img);
            si.push_back(r.ssim_img);
            l1.push_back(r.l1_missing);
        }
        report.summary.push_back(SummaryRow{report.rows[i].method, report.rows[i].fraction, j - i, stat(ps), stat(ss),
                                            stat(pi), stat(si), stat(l1)});
        i = j;
    }
    return report;
}

void write_results_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "sample_id,fraction,method,psnr_sino,ssim_sino,psnr_img,ssim_img\n";
    for (const auto& r : report.rows) {
        out << r.sample_id << ',' << fmt(r.fraction) << ',' << r.method << ',' << fmt(r.psnr_sino) << ','
            << fmt(r.ssim_sino) << ',' << fmt(r.psnr_img) << ',' << fmt(r.ssim_img) << '\n';
    }
}

void write_summary_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "method,fraction,count,psnr_sino_mean,psnr_sino_std,ssim_sino_mean,ssim_sino_std,psnr_img_mean,"
           "psnr_img_std,ssim_img_mean,ssim_img_std,l1_missing_mean,l1_missing_std\n";
    for (const auto& s : report.summary) {
        out << s.method << ',' << fmt(s.fraction) << ',' << s.count;
        for (const auto* st : {&s.psnr_sino, &s.ssim_sino, &s.psnr_img, &s.ssim_img, &s.l1_missing})
            out << ',' << fmt(st->mean) << ',' << fmt(st->std);
        out << '\n';
    }
}

std::string summary_table(const EvalReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %8s %5s  %-17s %-17s %-17s %-17s\n", "method", "fraction", "n",
                  "psnr_sino", "ssim_sino", "psnr_img", "ssim_img");
    os << line;
    auto cell = [](const Stat& s, int digits) {
        char b[64];
        if (std::isnan(s.mean)) return std::string("-");
        std::snprintf(b, sizeof b, "%.*f +- %.*f", digits, s.mean, digits, s.std);
        return std::string(b);
    };
    for (const auto& s : report.summary) {
        std::snprintf(line, sizeof line, "%-14s %8.3f %5zu  %-17s %-17s %-17s %-17s\n", s.method.c_str(), s.fraction,
                      s.count, cell(s.psnr_sino, 2).c_str(), cell(s.ssim_sino, 4).c_str(), cell(s.psnr_img, 2).c_str(),
                      cell(s.ssim_img, 4).c_str());
        os << line;
    }
    return os.str();
}

}  // namespace sinpaint::eval
