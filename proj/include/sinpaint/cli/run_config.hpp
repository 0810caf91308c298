#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "sinpaint/data/dataset.hpp"
#include "sinpaint/eval/evaluate.hpp"
#include "sinpaint/io/keyvalue.hpp"
#include "sinpaint/train/trainer.hpp"

namespace sinpaint::cli {

// Everything a subcommand needs, archived as run_config.txt next to its outputs.
struct RunConfig {
    std::string subcommand;
    std::uint64_t seed = 1;

    std::filesystem::path data_dir = "data";
    std::filesystem::path out_dir = "runs";
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> resume;

    // infer
    std::size_t sample_id = 0;
    std::string method = "pix2pix_prior";
    double fraction = 0.5;
    std::optional<std::size_t> mask_start;  // drawn from the seed when unset
    std::size_t sirt_iterations = 200;

    data::DatasetConfig dataset;
    train::TrainConfig train;
    eval::EvalConfig eval;

    // Copies `seed` into the dataset, training and evaluation configs.
    void propagate_seed();
    void validate() const;
    io::KeyValue to_keyvalue() const;
    static RunConfig from_keyvalue(const io::KeyValue& kv);
};

// SINPAINT_DATA_DIR, SINPAINT_OUT_DIR and SINPAINT_CHECKPOINT replace the
// corresponding paths when set. Only paths can be overridden this way.
void apply_env_overrides(RunConfig& cfg);

// Entry point of the sinpaint tool. Returns 0 on success, 2 on configuration
// errors, 3 when an invariant check fails and 1 for any other failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace sinpaint::cli
