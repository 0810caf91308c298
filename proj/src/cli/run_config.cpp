#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sinpaint/cli/run_config.hpp"
#include "sinpaint/errors.hpp"

namespace sinpaint::cli {

namespace {

const std::string kDatasetPrefix = "dataset.";

}  // namespace

void RunConfig::propagate_seed() {
    dataset.seed = seed;
    train.seed = seed;
    eval.seed = seed;
}

void RunConfig::validate() const {
    dataset.validate();
    train.validate();
    eval.validate();
    ops::AngularMask::missing_count(dataset.n_angles, fraction);
    if (sirt_iterations < 1) throw ConfigError("sirt_iterations must be at least 1");
    const auto& m = eval::kAllMethods;
    if (std::find(m.begin(), m.end(), method) == m.end()) throw ConfigError("unknown method '" + method + "'");
}

io::KeyValue RunConfig::to_keyvalue() const {
    io::KeyValue kv;
    kv.set("run.subcommand", subcommand);
    kv.set("run.seed", seed);
    kv.set("run.data_dir", data_dir.string());
    kv.set("run.out_dir", out_dir.string());
    if (checkpoint) kv.set("run.checkpoint", checkpoint->string());
    if (resume) kv.set("run.resume", resume->string());
    kv.set("run.sample_id", std::uint64_t(sample_id));
    kv.set("run.method", method);
    kv.set("run.fraction", fraction);
    if (mask_start) kv.set("run.mask_start", std::uint64_t(*mask_start));
    kv.set("run.sirt_iterations", std::uint64_t(sirt_iterations));
    io::KeyValue d;
    dataset.write(d);
    for (const auto& [k, v] : d.entries()) kv.set(kDatasetPrefix + k, v);
    train.write(kv);
    eval.write(kv);
    return kv;
}

RunConfig RunConfig::from_keyvalue(const io::KeyValue& kv) {
    RunConfig c;
    c.subcommand = kv.get_string("run.subcommand", c.subcommand);
    c.seed = kv.get_u64("run.seed", c.seed);
    c.data_dir = kv.get_string("run.data_dir", c.data_dir.string());
    c.out_dir = kv.get_string("run.out_dir", c.out_dir.string());
    if (kv.contains("run.checkpoint")) c.checkpoint = kv.get_string("run.checkpoint");
    if (kv.contains("run.resume")) c.resume = kv.get_string("run.resume");
    c.sample_id = std::size_t(kv.get_u64("run.sample_id", c.sample_id));
    c.method = kv.get_string("run.method", c.method);
    c.fraction = kv.get_double("run.fraction", c.fraction);
    if (kv.contains("run.mask_start")) c.mask_start = std::size_t(kv.get_u64("run.mask_start"));
    c.sirt_iterations = std::size_t(kv.get_u64("run.sirt_iterations", c.sirt_iterations));

    // Sub-configs without explicit seeds follow run.seed.
    c.propagate_seed();
    io::KeyValue d;
    d.set("seed", c.seed);
    for (const auto& [k, v] : kv.entries())
        if (k.rfind(kDatasetPrefix, 0) == 0) d.set(k.substr(kDatasetPrefix.size()), v);
    c.dataset = data::DatasetConfig::read(d);
    io::KeyValue t = kv, e = kv;
    if (!kv.contains("train.seed")) t.set("train.seed", c.seed);
    if (!kv.contains("eval.seed")) e.set("eval.seed", c.seed);
    c.train = train::TrainConfig::read(t);
    c.eval = eval::EvalConfig::read(e);
    return c;
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* v = std::getenv("SINPAINT_DATA_DIR"); v && *v) cfg.data_dir = v;
    if (const char* v = std::getenv("SINPAINT_OUT_DIR"); v && *v) cfg.out_dir = v;
    if (const char* v = std::getenv("SINPAINT_CHECKPOINT"); v && *v) cfg.checkpoint = std::filesystem::path(v);
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= std::uint8_t(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace sinpaint::cli
