#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sinpaint/array2d.hpp"
#include "sinpaint/data/phantom.hpp"
#include "sinpaint/io/keyvalue.hpp"
#include "sinpaint/tomo/projector.hpp"

namespace sinpaint::data {

struct DatasetConfig {
    std::uint64_t seed = 1;
    std::size_t n_samples = 200;
    double split = 0.9;
    std::size_t image_side = 256;
    std::size_t n_angles = 256;
    PhantomDistribution phantom;
    PriorDistribution prior;
    bool defects = false;
    std::size_t defect_count_min = 1;
    std::size_t defect_count_max = 3;
    double defect_radius_min = 3.0;
    double defect_radius_max = 8.0;
    double norm_percentile = 99.5;
    double mass_tolerance = 0.005;

    tomo::Geometry geometry() const;
    std::size_t n_train() const;
    void validate() const;
    void write(io::KeyValue& kv) const;
    static DatasetConfig read(const io::KeyValue& kv);
};

struct SampleEntry {
    std::size_t id = 0;
    std::uint64_t seed = 0;
    bool train = true;
    std::string file;  // relative to the dataset root
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<SampleEntry> samples;
    double norm_constant = 1.0;
    double max_mass_deviation = 0.0;

    std::vector<const SampleEntry*> split(bool train) const;
    io::KeyValue to_keyvalue() const;
    static DatasetManifest from_keyvalue(const io::KeyValue& kv);
    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);
};

struct Sample {
    std::size_t id = 0;
    Array2D phantom;
    Array2D prior;
    Array2D sinogram;
    Array2D prior_sinogram;
    std::optional<Array2D> phantom_defect;
    std::optional<Array2D> sinogram_defect;
};

// Fully determined by (config, id); the per-sample seed is derive_seed(config.seed, {id}).
Sample generate_sample(const DatasetConfig& config, std::size_t id, const tomo::Projector& projector);

void save_sample(const Sample& s, const std::filesystem::path& path);
Sample load_sample(const std::filesystem::path& path);

// Writes <root>/manifest.txt and <root>/samples/sample_NNNN.sptn. Throws
// InvariantError when a clean full sinogram violates per-angle mass
// constancy beyond config.mass_tolerance.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& root);

// Loaded dataset: manifest plus the samples of one split, in manifest order.
struct Dataset {
    DatasetManifest manifest;
    std::filesystem::path root;
    std::vector<Sample> samples;
};
Dataset load_dataset(const std::filesystem::path& root, bool train);

// max |mass(a) - mean| / mean over sinogram rows; 0 for an all-zero sinogram.
double mass_deviation(const Array2D& sino);

// Percentile with linear interpolation between order statistics (q in [0, 100]).
double percentile(std::vector<float> values, double q);

}  // namespace sinpaint::data
