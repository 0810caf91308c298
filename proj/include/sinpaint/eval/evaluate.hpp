#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sinpaint/data/dataset.hpp"
#include "sinpaint/io/keyvalue.hpp"
#include "sinpaint/ops/sinogram_ops.hpp"

namespace sinpaint::eval {

// Method ids in evaluation order.
inline const std::vector<std::string> kAllMethods = {"linear", "cad", "scaled_cad", "unet", "unet_prior",
                                                     "pix2pix_prior"};
bool is_learned(const std::string& method);

struct EvalConfig {
    std::vector<double> fractions = {0.25, 0.5, 0.75};
    std::vector<std::string> methods = {"linear", "cad", "scaled_cad", "pix2pix_prior"};
    // Learned method id -> training checkpoint.
    std::map<std::string, std::filesystem::path> checkpoints;
    std::uint64_t seed = 1;
    // Image-space metrics need one SIRT reconstruction per row; off leaves them NaN.
    bool reconstruct = true;
    std::size_t sirt_iterations = 200;
    bool use_defects = false;
    // 0 evaluates the whole split.
    std::size_t max_samples = 0;

    void validate() const;
    void write(io::KeyValue& kv) const;
    static EvalConfig read(const io::KeyValue& kv);
};

struct MethodResult {
    std::size_t sample_id = 0;
    double fraction = 0.0;
    std::string method;
    double psnr_sino = 0.0;
    double ssim_sino = 0.0;
    double psnr_img = 0.0;
    double ssim_img = 0.0;
    double l1_missing = 0.0;  // mean absolute error over missing rows
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

struct SummaryRow {
    std::string method;
    double fraction = 0.0;
    std::size_t count = 0;
    Stat psnr_sino, ssim_sino, psnr_img, ssim_img, l1_missing;
};

struct EvalReport {
    std::vector<MethodResult> rows;      // sorted by method, fraction, sample id
    std::vector<SummaryRow> summary;     // sorted by method, fraction
    std::vector<std::string> notices;    // skipped methods and similar
};

// The mask used for (sample, fraction) by every method.
ops::AngularMask evaluation_mask(const EvalConfig& cfg, std::size_t n_angles, std::size_t sample_id,
                                 std::size_t fraction_index);

// Throws InvariantError if any method alters an observed row.
EvalReport evaluate(const data::Dataset& test_split, const EvalConfig& cfg, std::ostream* log = nullptr);

// sample_id,fraction,method,psnr_sino,ssim_sino,psnr_img,ssim_img
void write_results_csv(const EvalReport& report, const std::filesystem::path& path);
void write_summary_csv(const EvalReport& report, const std::filesystem::path& path);
// Fixed-width "mean +- std" table.
std::string summary_table(const EvalReport& report);

}  // namespace sinpaint::eval
