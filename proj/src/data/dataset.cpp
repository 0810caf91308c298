#include "sinpaint/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sinpaint/errors.hpp"
#include "sinpaint/nn/checkpoint.hpp"

namespace sinpaint::data {

namespace fs = std::filesystem;

tomo::Geometry DatasetConfig::geometry() const {
    tomo::Geometry g;
    g.n_detectors = image_side;
    g.n_angles = n_angles;
    return g;
}

std::size_t DatasetConfig::n_train() const {
    return std::size_t(std::floor(double(n_samples) * split + 1e-9));
}

void DatasetConfig::validate() const {
    if (n_samples == 0) throw ConfigError("dataset needs at least one sample");
    if (!(split >= 0.0 && split <= 1.0)) throw ConfigError("split must lie in [0, 1]");
    if (image_side < 8) throw ConfigError("image side must be >= 8");
    if (n_angles == 0) throw ConfigError("n_angles must be positive");
    if (defects && (defect_count_min > defect_count_max || defect_count_max == 0)) {
        throw ConfigError("defect counts need 1 <= max and min <= max");
    }
    if (!(norm_percentile > 0.0 && norm_percentile <= 100.0)) {
        throw ConfigError("normalization percentile must lie in (0, 100]");
    }
}

void DatasetConfig::write(io::KeyValue& kv) const {
    kv.set("seed", seed);
    kv.set("n_samples", std::uint64_t(n_samples));
    kv.set("split", split);
    kv.set("image_side", std::uint64_t(image_side));
    kv.set("n_angles", std::uint64_t(n_angles));
    kv.set("circles_min", std::uint64_t(phantom.circles_min));
    kv.set("circles_max", std::uint64_t(phantom.circles_max));
    kv.set("radius_min", phantom.radius_min);
    kv.set("radius_max", phantom.radius_max);
    kv.set("noise_sigma", phantom.noise_sigma);
    kv.set("prior_mode", to_string(prior.mode));
    kv.set("prior_density_scale", prior.density_scale);
    kv.set("prior_density_min", prior.density_min);
    kv.set("prior_density_max", prior.density_max);
    kv.set("prior_drop_fraction", prior.drop_fraction);
    kv.set("defects", defects);
    kv.set("defect_count_min", std::uint64_t(defect_count_min));
    kv.set("defect_count_max", std::uint64_t(defect_count_max));
    kv.set("defect_radius_min", defect_radius_min);
    kv.set("defect_radius_max", defect_radius_max);
    kv.set("norm_percentile", norm_percentile);
    kv.set("mass_tolerance", mass_tolerance);
}

DatasetConfig DatasetConfig::read(const io::KeyValue& kv) {
    DatasetConfig c;
    c.seed = kv.get_u64("seed", c.seed);
    c.n_samples = kv.get_u64("n_samples", c.n_samples);
    c.split = kv.get_double("split", c.split);
    c.image_side = kv.get_u64("image_side", c.image_side);
    c.n_angles = kv.get_u64("n_angles", c.image_side);
    c.phantom.circles_min = kv.get_u64("circles_min", c.phantom.circles_min);
    c.phantom.circles_max = kv.get_u64("circles_max", c.phantom.circles_max);
    c.phantom.radius_min = kv.get_double("radius_min", c.phantom.radius_min);
    c.phantom.radius_max = kv.get_double("radius_max", c.phantom.radius_max);
    c.phantom.noise_sigma = kv.get_double("noise_sigma", c.phantom.noise_sigma);
    c.prior.mode = parse_prior_mode(kv.get_string("prior_mode", to_string(c.prior.mode)));
    c.prior.density_scale = kv.get_double("prior_density_scale", c.prior.density_scale);
    c.prior.density_min = kv.get_double("prior_density_min", c.prior.density_min);
    c.prior.density_max = kv.get_double("prior_density_max", c.prior.density_max);
    c.prior.drop_fraction = kv.get_double("prior_drop_fraction", c.prior.drop_fraction);
    c.defects = kv.get_bool("defects", c.defects);
    c.defect_count_min = kv.get_u64("defect_count_min", c.defect_count_min);
    c.defect_count_max = kv.get_u64("defect_count_max", c.defect_count_max);
    c.defect_radius_min = kv.get_double("defect_radius_min", c.defect_radius_min);
    c.defect_radius_max = kv.get_double("defect_radius_max", c.defect_radius_max);
    c.norm_percentile = kv.get_double("norm_percentile", c.norm_percentile);
    c.mass_tolerance = kv.get_double("mass_tolerance", c.mass_tolerance);
    c.validate();
    return c;
}

std::vector<const SampleEntry*> DatasetManifest::split(bool train) const {
    std::vector<const SampleEntry*> out;
    for (const auto& s : samples)
        if (s.train == train) out.push_back(&s);
    return out;
}

io::KeyValue DatasetManifest::to_keyvalue() const {
    io::KeyValue kv;
    kv.set("format", "sinpaint-dataset-1");
    config.write(kv);
    kv.set("n_train", std::uint64_t(split(true).size()));
    kv.set("n_test", std::uint64_t(split(false).size()));
    kv.set("norm_constant", norm_constant);
    kv.set("max_mass_deviation", max_mass_deviation);
    for (const auto& s : samples) {
        const auto p = "sample." + std::to_string(s.id) + ".";
        kv.set(p + "seed", s.seed);
        kv.set(p + "split", s.train ? "train" : "test");
        kv.set(p + "file", s.file);
    }
    return kv;
}

DatasetManifest DatasetManifest::from_keyvalue(const io::KeyValue& kv) {
    if (kv.get_string("format", "") != "sinpaint-dataset-1") {
        throw ConfigError(kv.origin() + ": not a dataset manifest (format key missing or unknown)");
    }
    DatasetManifest m;
    m.config = DatasetConfig::read(kv);
    m.norm_constant = kv.get_double("norm_constant");
    m.max_mass_deviation = kv.get_double("max_mass_deviation", 0.0);
    for (std::size_t i = 0; i < m.config.n_samples; ++i) {
        const auto p = "sample." + std::to_string(i) + ".";
        SampleEntry e;
        e.id = i;
        e.seed = kv.get_u64(p + "seed");
        const auto split = kv.get_string(p + "split");
        if (split != "train" && split != "test") throw ConfigError(kv.origin() + ": bad split for sample " + std::to_string(i));
        e.train = split == "train";
        e.file = kv.get_string(p + "file");
        m.samples.push_back(e);
    }
    return m;
}

void DatasetManifest::save(const fs::path& path) const { to_keyvalue().save(path); }

DatasetManifest DatasetManifest::load(const fs::path& path) {
    return from_keyvalue(io::KeyValue::load(path));
}

Sample generate_sample(const DatasetConfig& config, std::size_t id, const tomo::Projector& projector) {
    const std::uint64_t seed = derive_seed(config.seed, {id});
    Rng layout_rng(derive_seed(seed, {1}));
    Rng prior_rng(derive_seed(seed, {2}));
    Rng defect_rng(derive_seed(seed, {3}));

    Sample s;
    s.id = id;
    const auto spec = random_phantom_spec(config.image_side, config.phantom, layout_rng);
    const auto prior = make_prior_spec(spec, config.prior, prior_rng);
    s.phantom = render_phantom(spec);
    s.prior = render_prior(prior);
    s.sinogram = projector.forward(s.phantom);
    s.prior_sinogram = projector.forward(s.prior);
    if (config.defects) {
        std::uniform_int_distribution<std::size_t> count(config.defect_count_min, config.defect_count_max);
        DefectSpec d;
        d.count = count(defect_rng);
        d.radius_min = config.defect_radius_min;
        d.radius_max = config.defect_radius_max;
        d.seed = defect_rng();
        s.phantom_defect = render_phantom(inject_defects(spec, d));
        s.sinogram_defect = projector.forward(*s.phantom_defect);
    }
    return s;
}

namespace {

nn::Tensor as_tensor(const Array2D& a) { return nn::Tensor(nn::Shape{a.rows, a.cols}, a.values); }

Array2D from_record(const nn::TensorFile& f, const std::string& name, const fs::path& path) {
    const auto t = f.get(name);
    if (t.rank() != 2) throw std::runtime_error(path.string() + ": record '" + name + "' is not 2-D");
    return Array2D(t.dim(0), t.dim(1), std::vector<float>(t.data().begin(), t.data().end()));
}

}  // namespace

void save_sample(const Sample& s, const fs::path& path) {
    nn::TensorFile f;
    f.put_text("sample_id", std::to_string(s.id));
    f.put("phantom", as_tensor(s.phantom));
    f.put("prior", as_tensor(s.prior));
    f.put("sinogram", as_tensor(s.sinogram));
    f.put("prior_sinogram", as_tensor(s.prior_sinogram));
    if (s.phantom_defect) f.put("phantom_defect", as_tensor(*s.phantom_defect));
    if (s.sinogram_defect) f.put("sinogram_defect", as_tensor(*s.sinogram_defect));
    f.save(path);
}

Sample load_sample(const fs::path& path) {
    const auto f = nn::TensorFile::load(path);
    Sample s;
    s.id = std::stoull(f.text("sample_id").value_or("0"));
    s.phantom = from_record(f, "phantom", path);
    s.prior = from_record(f, "prior", path);
    s.sinogram = from_record(f, "sinogram", path);
    s.prior_sinogram = from_record(f, "prior_sinogram", path);
    if (f.contains("phantom_defect")) s.phantom_defect = from_record(f, "phantom_defect", path);
    if (f.contains("sinogram_defect")) s.sinogram_defect = from_record(f, "sinogram_defect", path);
    return s;
}

double mass_deviation(const Array2D& sino) {
    std::vector<double> m(sino.rows, 0.0);
    double mean = 0.0;
    for (std::size_t a = 0; a < sino.rows; ++a) {
        for (float v : sino.row(a)) m[a] += v;
        mean += m[a];
    }
    mean /= double(sino.rows);
    if (mean == 0.0) return 0.0;
    double dev = 0.0;
    for (double v : m) dev = std::max(dev, std::abs(v - mean) / std::abs(mean));
    return dev;
}

double percentile(std::vector<float> values, double q) {
    if (values.empty()) throw ConfigError("percentile of an empty set");
    const double pos = q / 100.0 * double(values.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + lo, values.end());
    const double a = values[lo];
    const double b = hi == lo ? a : *std::min_element(values.begin() + lo + 1, values.end());
    return a + (pos - double(lo)) * (b - a);
}

DatasetManifest build_dataset(const DatasetConfig& config, const fs::path& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root / "samples", ec);
    if (ec) throw std::runtime_error("cannot create " + (root / "samples").string() + ": " + ec.message());

    DatasetManifest manifest;
    manifest.config = config;
    const tomo::Projector projector(config.geometry());
    const std::size_t n_train = config.n_train();
    std::vector<float> train_values;
    for (std::size_t id = 0; id < config.n_samples; ++id) {
        const auto s = generate_sample(config, id, projector);
        const double dev = mass_deviation(s.sinogram);
        if (dev > config.mass_tolerance) {
            throw InvariantError("sample " + std::to_string(id) + ": per-angle mass deviation " +
                                 std::to_string(dev) + " exceeds " + std::to_string(config.mass_tolerance));
        }
        manifest.max_mass_deviation = std::max(manifest.max_mass_deviation, dev);
        char name[32];
        std::snprintf(name, sizeof name, "sample_%04zu.sptn", id);
        SampleEntry e{id, derive_seed(config.seed, {id}), id < n_train, std::string("samples/") + name};
        save_sample(s, root / e.file);
        if (e.train) train_values.insert(train_values.end(), s.sinogram.values.begin(), s.sinogram.values.end());
        manifest.samples.push_back(e);
    }
    // With no training split, fall back to every sample's values.
    if (train_values.empty()) {
        for (const auto& e : manifest.samples) {
            const auto s = load_sample(root / e.file);
            train_values.insert(train_values.end(), s.sinogram.values.begin(), s.sinogram.values.end());
        }
    }
    manifest.norm_constant = percentile(std::move(train_values), config.norm_percentile);
    if (!(manifest.norm_constant > 0.0)) throw InvariantError("normalization constant is not positive");
    manifest.save(root / "manifest.txt");
    return manifest;
}

Dataset load_dataset(const fs::path& root, bool train) {
    Dataset d;
    d.root = root;
    d.manifest = DatasetManifest::load(root / "manifest.txt");
    for (const auto* e : d.manifest.split(train)) d.samples.push_back(load_sample(root / e->file));
    return d;
}

}  // namespace sinpaint::data
