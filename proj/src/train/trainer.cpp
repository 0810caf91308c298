#include "sinpaint/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sinpaint/errors.hpp"
#include "sinpaint/eval/baselines.hpp"

namespace sinpaint::train {

namespace fs = std::filesystem;
using nn::Shape;

namespace {

constexpr const char* kCheckpointFormat = "sinpaint-checkpoint-1";
constexpr std::uint64_t kMaskTag = 0x6d61736b;
constexpr std::uint64_t kShuffleTag = 0x73687566;

std::size_t as_size(const io::KeyValue& kv, const std::string& key, std::size_t fallback) {
    return std::size_t(kv.get_u64(key, fallback));
}

// Stacks per-sample channel lists into [B, C, H, W].
Tensor stack(const std::vector<std::vector<const Array2D*>>& samples) {
    const std::size_t b = samples.size(), c = samples.front().size();
    const std::size_t h = samples.front().front()->rows, w = samples.front().front()->cols;
    std::vector<float> v;
    v.reserve(b * c * h * w);
    for (const auto& channels : samples) {
        if (channels.size() != c) throw ShapeError("stack: inconsistent channel counts");
        for (const auto* a : channels) {
            if (a->rows != h || a->cols != w) throw ShapeError("stack: inconsistent sinogram sizes");
            v.insert(v.end(), a->values.begin(), a->values.end());
        }
    }
    return Tensor(Shape{b, c, h, w}, std::move(v));
}

Array2D channel_of(const Tensor& t, std::size_t sample, std::size_t channel) {
    const std::size_t c = t.dim(1), h = t.dim(2), w = t.dim(3);
    const auto first = t.data().begin() + std::ptrdiff_t(((sample * c) + channel) * h * w);
    return Array2D(h, w, std::vector<float>(first, first + std::ptrdiff_t(h * w)));
}

std::string rng_state(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void save_optimizer(nn::TensorFile& f, const std::string& prefix, const nn::Adam<float>& opt) {
    f.put_text(prefix + ".steps", std::to_string(opt.step_count()));
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
        const auto& m = opt.first_moments()[i];
        const auto& v = opt.second_moments()[i];
        f.put(prefix + ".m." + std::to_string(i), Shape{m.size()}, m);
        f.put(prefix + ".v." + std::to_string(i), Shape{v.size()}, v);
    }
}

void load_optimizer(const nn::TensorFile& f, const std::string& prefix, nn::Adam<float>& opt) {
    const auto steps = f.text(prefix + ".steps");
    if (!steps) throw ConfigError("checkpoint has no optimizer state '" + prefix + "'");
    for (std::size_t i = 0; i < opt.params().size(); ++i) {
        for (auto [tag, dst] : {std::pair{".m.", &opt.first_moments()[i]}, std::pair{".v.", &opt.second_moments()[i]}}) {
            const auto name = prefix + tag + std::to_string(i);
            if (!f.contains(name)) throw ConfigError("checkpoint is missing '" + name + "'");
            const auto t = f.get(name);
            if (t.numel() != dst->size()) throw ConfigError("optimizer state '" + name + "' has the wrong size");
            dst->assign(t.data().begin(), t.data().end());
        }
    }
    opt.set_step_count(std::stoull(*steps));
}

std::string required_text(const nn::TensorFile& f, const std::string& key) {
    const auto t = f.text(key);
    if (!t) throw ConfigError("checkpoint is missing '" + key + "'");
    return *t;
}

std::unique_ptr<models::UNet> make_network(const TrainConfig& cfg, Rng& rng) {
    switch (cfg.model) {
        case ModelKind::pix2pix_prior:
            return std::make_unique<models::UNet>(models::generator_spec(cfg.depth, cfg.base_width), rng);
        case ModelKind::unet:
            return std::make_unique<models::UNet>(models::refiner_spec(1, cfg.depth, cfg.base_width), rng);
        case ModelKind::unet_prior:
            return std::make_unique<models::UNet>(models::refiner_spec(3, cfg.depth, cfg.base_width), rng);
    }
    throw ConfigError("unknown model kind");
}

// Keeps the header and the data rows whose first column is <= limit.
void truncate_csv(const fs::path& path, std::size_t limit) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot resume: " + path.string() + " is missing");
    std::string header, line, kept;
    std::getline(in, header);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) > limit) break;
        kept += line + "\n";
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << header << "\n" << kept;
}

std::string csv_row(std::size_t key, const StepReport& r) {
    std::ostringstream os;
    os << key << ',' << io::format_double(r.d_loss) << ',' << io::format_double(r.g_adv) << ','
       << io::format_double(r.g_l1) << '\n';
    return os.str();
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::pix2pix_prior: return "pix2pix_prior";
        case ModelKind::unet: return "unet";
        case ModelKind::unet_prior: return "unet_prior";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "pix2pix_prior") return ModelKind::pix2pix_prior;
    if (text == "unet") return ModelKind::unet;
    if (text == "unet_prior") return ModelKind::unet_prior;
    throw ConfigError("unknown model '" + text + "' (expected pix2pix_prior, unet or unet_prior)");
}

std::size_t TrainConfig::kept(std::size_t batch) const {
    const std::size_t k = (topk_keep * batch + batch_size / 2) / batch_size;
    return std::clamp<std::size_t>(k, 1, batch);
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (topk_keep < 1 || topk_keep > batch_size) throw ConfigError("topk_keep must lie in [1, batch_size]");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(lambda_l1 >= 0.0)) throw ConfigError("lambda_l1 must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(label_smooth > 0.0 && label_smooth <= 1.0)) throw ConfigError("label_smooth must lie in (0, 1]");
    if (!(disc_noise_sigma >= 0.0)) throw ConfigError("disc_noise_sigma must be non-negative");
    if (!(fraction_min >= 0.05 && fraction_max <= 0.95 && fraction_min <= fraction_max)) {
        throw ConfigError("training fractions must satisfy 0.05 <= fraction_min <= fraction_max <= 0.95");
    }
    if (depth < 2 || base_width < 1 || disc_layers < 1 || disc_base_width < 1) {
        throw ConfigError("network sizes must be positive (depth >= 2)");
    }
}

void TrainConfig::write(io::KeyValue& kv) const {
    kv.set("train.model", to_string(model));
    kv.set("train.batch_size", std::uint64_t(batch_size));
    kv.set("train.lr", lr);
    kv.set("train.beta1", beta1);
    kv.set("train.beta2", beta2);
    kv.set("train.lambda_l1", lambda_l1);
    kv.set("train.epochs", std::uint64_t(epochs));
    kv.set("train.topk_keep", std::uint64_t(topk_keep));
    kv.set("train.l1_over_kept", l1_over_kept);
    kv.set("train.label_smooth", label_smooth);
    kv.set("train.disc_noise_sigma", disc_noise_sigma);
    kv.set("train.noise_decay", noise_decay);
    kv.set("train.fraction_min", fraction_min);
    kv.set("train.fraction_max", fraction_max);
    kv.set("train.seed", seed);
    kv.set("train.checkpoint_every", std::uint64_t(checkpoint_every));
    kv.set("train.depth", std::uint64_t(depth));
    kv.set("train.base_width", std::uint64_t(base_width));
    kv.set("train.disc_layers", std::uint64_t(disc_layers));
    kv.set("train.disc_base_width", std::uint64_t(disc_base_width));
    kv.set("train.disc_condition_mask", disc_condition_mask);
    kv.set("train.use_defects", use_defects);
}

TrainConfig TrainConfig::read(const io::KeyValue& kv) {
    TrainConfig c;
    c.model = parse_model_kind(kv.get_string("train.model", to_string(c.model)));
    c.batch_size = as_size(kv, "train.batch_size", c.batch_size);
    c.lr = kv.get_double("train.lr", c.lr);
    c.beta1 = kv.get_double("train.beta1", c.beta1);
    c.beta2 = kv.get_double("train.beta2", c.beta2);
    c.lambda_l1 = kv.get_double("train.lambda_l1", c.lambda_l1);
    c.epochs = as_size(kv, "train.epochs", c.epochs);
    c.topk_keep = as_size(kv, "train.topk_keep", c.topk_keep);
    c.l1_over_kept = kv.get_bool("train.l1_over_kept", c.l1_over_kept);
    c.label_smooth = kv.get_double("train.label_smooth", c.label_smooth);
    c.disc_noise_sigma = kv.get_double("train.disc_noise_sigma", c.disc_noise_sigma);
    c.noise_decay = kv.get_bool("train.noise_decay", c.noise_decay);
    c.fraction_min = kv.get_double("train.fraction_min", c.fraction_min);
    c.fraction_max = kv.get_double("train.fraction_max", c.fraction_max);
    c.seed = kv.get_u64("train.seed", c.seed);
    c.checkpoint_every = as_size(kv, "train.checkpoint_every", c.checkpoint_every);
    c.depth = as_size(kv, "train.depth", c.depth);
    c.base_width = as_size(kv, "train.base_width", c.base_width);
    c.disc_layers = as_size(kv, "train.disc_layers", c.disc_layers);
    c.disc_base_width = as_size(kv, "train.disc_base_width", c.disc_base_width);
    c.disc_condition_mask = kv.get_bool("train.disc_condition_mask", c.disc_condition_mask);
    c.use_defects = kv.get_bool("train.use_defects", c.use_defects);
    c.validate();
    return c;
}

// --- inputs -----------------------------------------------------------------

PreparedInput prepare_input(const Array2D& scarce, const Array2D& prior_sinogram, const ops::AngularMask& mask) {
    PreparedInput p;
    p.scarce = scarce;
    p.scaled_prior = ops::scale_prior(scarce, prior_sinogram, mask);
    p.pmask = ops::build_prior_mask(p.scaled_prior, mask);
    p.interp = eval::linear_interp(scarce, mask);
    p.missing_rows = Array2D(scarce.rows, scarce.cols);
    for (std::size_t a = mask.start; a < mask.start + mask.count; ++a) {
        std::fill(p.missing_rows.row(a).begin(), p.missing_rows.row(a).end(), 1.0f);
    }
    return p;
}

std::vector<Array2D> model_channels(ModelKind kind, const PreparedInput& p, const ops::Normalization& norm) {
    switch (kind) {
        case ModelKind::pix2pix_prior: {
            auto in = ops::assemble_input(p.scarce, p.scaled_prior, p.pmask, norm);
            return {std::move(in.scarce), std::move(in.prior), std::move(in.mask)};
        }
        case ModelKind::unet: return {norm.normalize(p.interp)};
        case ModelKind::unet_prior: {
            auto in = ops::assemble_input(p.interp, p.scaled_prior, p.pmask, norm);
            return {std::move(in.scarce), std::move(in.prior), std::move(in.mask)};
        }
    }
    throw ConfigError("unknown model kind");
}

ops::AngularMask training_mask(const TrainConfig& cfg, std::size_t n_angles, std::size_t epoch, std::size_t id) {
    Rng rng(derive_seed(cfg.seed, {kMaskTag, epoch, id}));
    std::uniform_real_distribution<double> frac(cfg.fraction_min, cfg.fraction_max);
    return ops::AngularMask::random(n_angles, frac(rng), rng);
}

Batch make_batch(const TrainConfig& cfg, const std::vector<const data::Sample*>& samples,
                 const std::vector<ops::AngularMask>& masks, const ops::Normalization& norm) {
    if (samples.empty() || samples.size() != masks.size()) throw ConfigError("make_batch: need one mask per sample");
    std::vector<std::vector<Array2D>> channels, extra;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = *samples[i];
        const auto& truth = cfg.use_defects && s.sinogram_defect ? *s.sinogram_defect : s.sinogram;
        const auto p = prepare_input(ops::apply_mask(truth, masks[i]), s.prior_sinogram, masks[i]);
        channels.push_back(model_channels(cfg.model, p, norm));
        const auto cond = model_channels(ModelKind::pix2pix_prior, p, norm);
        extra.push_back({cond[0], cond[1], cond[2], is_adversarial(cfg.model) ? p.pmask : p.missing_rows,
                         norm.normalize(truth)});
        ids.push_back(s.id);
    }
    auto view = [&](auto pick) {
        std::vector<std::vector<const Array2D*>> v;
        for (std::size_t i = 0; i < samples.size(); ++i) v.push_back(pick(i));
        return stack(v);
    };
    Batch b;
    b.ids = ids;
    b.input = view([&](std::size_t i) {
        std::vector<const Array2D*> c;
        for (const auto& a : channels[i]) c.push_back(&a);
        return c;
    });
    b.condition = view([&](std::size_t i) {
        std::vector<const Array2D*> c{&extra[i][0], &extra[i][1]};
        if (cfg.disc_condition_mask) c.push_back(&extra[i][2]);
        return c;
    });
    b.scarce = view([&](std::size_t i) { return std::vector<const Array2D*>{&extra[i][0]}; });
    b.pmask = view([&](std::size_t i) { return std::vector<const Array2D*>{&extra[i][2]}; });
    b.loss_mask = view([&](std::size_t i) { return std::vector<const Array2D*>{&extra[i][3]}; });
    b.target = view([&](std::size_t i) { return std::vector<const Array2D*>{&extra[i][4]}; });
    return b;
}

// --- trainer ----------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, double norm_constant)
    : cfg_(cfg), norm_{norm_constant}, rng_(derive_seed(cfg.seed, {0x72756e})) {
    cfg_.validate();
    if (!(norm_constant > 0.0)) throw ConfigError("normalization constant must be positive");
    Rng init_g(derive_seed(cfg_.seed, {1})), init_d(derive_seed(cfg_.seed, {2}));
    g_ = make_network(cfg_, init_g);
    g_->set_trainable(true);
    const nn::AdamOptions adam{cfg_.lr, cfg_.beta1, cfg_.beta2, 1e-8};
    g_opt_ = std::make_unique<nn::Adam<float>>(g_->parameter_tensors(), adam);
    if (is_adversarial(cfg_.model)) {
        models::DiscriminatorSpec ds;
        ds.in_channels = cfg_.disc_condition_mask ? 4 : 3;
        ds.n_layers = cfg_.disc_layers;
        ds.base_width = cfg_.disc_base_width;
        d_ = std::make_unique<models::PatchDiscriminator>(ds, init_d);
        d_->set_trainable(true);
        d_opt_ = std::make_unique<nn::Adam<float>>(d_->parameter_tensors(), adam);
    }
}

double Trainer::noise_sigma() const {
    if (!cfg_.noise_decay || total_steps_ == 0) return cfg_.disc_noise_sigma;
    const double left = 1.0 - double(steps_) / double(total_steps_);
    return cfg_.disc_noise_sigma * std::max(0.0, left);
}

Tensor Trainer::generate(const Batch& batch) {
    const Tensor* pmask = is_adversarial(cfg_.model) ? &batch.pmask : nullptr;
    return g_->forward(batch.input, pmask, nn::ForwardContext{true, &rng_, true});
}

Tensor Trainer::discriminate(const Batch& batch, const Tensor& fake, bool noise, bool update_stats) {
    if (!d_) throw ConfigError("model '" + to_string(cfg_.model) + "' has no discriminator");
    const auto real = nn::add(batch.scarce, nn::mul(batch.pmask, batch.target));
    auto both = nn::concat_batch(nn::concat_channels(real, batch.condition),
                                 nn::concat_channels(nn::add(batch.scarce, fake), batch.condition));
    const double sigma = noise ? noise_sigma() : 0.0;
    if (sigma > 0.0) {
        std::normal_distribution<float> n(0.0f, float(sigma));
        std::vector<float> v(both.numel());
        for (auto& e : v) e = n(rng_);
        both = nn::add(both, Tensor(both.shape(), std::move(v)));
    }
    return d_->forward_joined(both, nn::ForwardContext{true, &rng_, update_stats});
}

StepReport Trainer::d_step(const Batch& batch, const Tensor& fake) {
    const std::size_t b = batch.input.dim(0);
    d_opt_->zero_grad();
    const auto pred = discriminate(batch, fake.detach(), true, true);
    std::vector<float> targets(pred.numel(), 0.0f);
    std::fill(targets.begin(), targets.begin() + std::ptrdiff_t(targets.size() / 2), float(cfg_.label_smooth));
    const auto per = nn::mean_per_sample(nn::binary_cross_entropy(pred, Tensor(pred.shape(), std::move(targets))));
    const auto loss = nn::sum(nn::mul(per, Tensor(nn::Shape{2 * b}, 0.5f / float(b))));
    StepReport r;
    for (std::size_t i = 0; i < b; ++i) {
        r.d_real += per.data()[i] / double(b);
        r.d_fake += per.data()[b + i] / double(b);
    }
    r.d_loss = loss.item();
    check_finite(r);
    loss.backward();
    d_opt_->step();
    return r;
}

StepReport Trainer::g_step(const Batch& batch, const Tensor& fake) {
    const std::size_t b = batch.input.dim(0);
    StepReport r;

    // Per-sample masked L1: sum |G - x| over scored pixels, divided by their count.
    const auto diff = nn::mul(nn::abs(nn::sub(fake, batch.target)), batch.loss_mask);
    const auto l1_b = nn::sum_per_sample(diff);
    std::vector<double> counts(b);
    {
        const auto lm = batch.loss_mask.data();
        const std::size_t per = lm.size() / b;
        for (std::size_t i = 0; i < b; ++i) {
            counts[i] = std::max(1.0, std::accumulate(lm.begin() + i * per, lm.begin() + (i + 1) * per, 0.0));
            r.g_l1 += l1_b.data()[i] / counts[i] / double(b);
        }
    }

    Tensor total;
    if (d_) {
        d_->set_trainable(false);
        const auto pred = discriminate(batch, fake, false, false);
        const auto adv_b = nn::mean_per_sample(nn::binary_cross_entropy(pred, Tensor(pred.shape(), 1.0f)));

        // Top-k over the fake half on the mean patch score; the real half gets weight 0.
        const std::size_t k = cfg_.kept(b);
        const auto score = nn::mean_per_sample(pred.detach());
        std::vector<std::size_t> order(b);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return score.data()[b + x] > score.data()[b + y]; });
        std::vector<float> w_adv(2 * b, 0.0f), w_l1(b, 0.0f);
        for (std::size_t i = 0; i < k; ++i) w_adv[b + order[i]] = 1.0f / float(k);
        for (std::size_t i = 0; i < b; ++i) {
            const double w = cfg_.l1_over_kept ? w_adv[b + i] : 1.0 / double(b);
            w_l1[i] = float(w / counts[i]);
        }
        const auto adv = nn::sum(nn::mul(adv_b, Tensor(nn::Shape{2 * b}, w_adv)));
        const auto l1 = nn::sum(nn::mul(l1_b, Tensor(nn::Shape{b}, w_l1)));
        total = nn::add(adv, nn::scale(l1, float(cfg_.lambda_l1)));
        r.g_adv = adv.item();
        d_->set_trainable(true);
    } else {
        std::vector<float> w(b);
        for (std::size_t i = 0; i < b; ++i) w[i] = float(1.0 / double(b) / counts[i]);
        total = nn::sum(nn::mul(l1_b, Tensor(nn::Shape{b}, w)));
    }
    r.g_total = total.item();
    check_finite(r);
    g_opt_->zero_grad();
    total.backward();
    g_opt_->step();
    return r;
}

StepReport Trainer::step(const Batch& batch) {
    const auto fake = generate(batch);
    StepReport r;
    if (d_) {
        r = d_step(batch, fake);
        const auto g = g_step(batch, fake);
        r.g_adv = g.g_adv;
        r.g_l1 = g.g_l1;
        r.g_total = g.g_total;
    } else {
        r = g_step(batch, fake);
    }
    ++steps_;
    return r;
}

void Trainer::check_finite(const StepReport& r) const {
    for (double v : {r.d_loss, r.d_real, r.d_fake, r.g_adv, r.g_l1, r.g_total}) {
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite loss at step " << steps_ << ": d_real=" << r.d_real << " d_fake=" << r.d_fake
               << " g_adv=" << r.g_adv << " g_l1=" << r.g_l1 << " g_total=" << r.g_total;
            throw InvariantError(os.str());
        }
    }
}

nn::TensorFile Trainer::checkpoint(std::size_t epochs_done) const {
    nn::TensorFile f;
    io::KeyValue kv;
    cfg_.write(kv);
    f.put_text("checkpoint.format", kCheckpointFormat);
    f.put_text("train.config", kv.str());
    f.put_text("train.epoch", std::to_string(epochs_done));
    f.put_text("train.step", std::to_string(steps_));
    f.put_text("train.total_steps", std::to_string(total_steps_));
    f.put_text("train.norm_constant", io::format_double(norm_.constant));
    f.put_text("train.rng", rng_state(rng_));
    g_->save(f, "generator");
    save_optimizer(f, "optim.generator", *g_opt_);
    if (d_) {
        d_->save(f, "discriminator");
        save_optimizer(f, "optim.discriminator", *d_opt_);
    }
    return f;
}

std::size_t Trainer::restore(const nn::TensorFile& f) {
    if (f.text("checkpoint.format") != kCheckpointFormat) throw ConfigError("not a training checkpoint");
    const auto stored = TrainConfig::read(io::KeyValue::parse(required_text(f, "train.config"), "<checkpoint>"));
    if (to_string(stored.model) != to_string(cfg_.model) || stored.depth != cfg_.depth ||
        stored.base_width != cfg_.base_width) {
        throw ConfigError("checkpoint was trained with a different model configuration");
    }
    g_->load(f, "generator");
    load_optimizer(f, "optim.generator", *g_opt_);
    if (d_) {
        d_->load(f, "discriminator");
        load_optimizer(f, "optim.discriminator", *d_opt_);
    }
    norm_.constant = std::stod(required_text(f, "train.norm_constant"));
    std::istringstream is(required_text(f, "train.rng"));
    is >> rng_;
    if (!is) throw ConfigError("checkpoint RNG state is corrupt");
    steps_ = std::stoull(required_text(f, "train.step"));
    total_steps_ = std::stoull(required_text(f, "train.total_steps"));
    return std::stoull(required_text(f, "train.epoch"));
}

// --- loop -------------------------------------------------------------------

TrainResult train(const data::Dataset& split, const TrainConfig& cfg, const fs::path& out,
                  const std::optional<fs::path>& resume, std::ostream* log) {
    cfg.validate();
    if (split.samples.size() < 2) throw ConfigError("training needs at least 2 samples");
    fs::create_directories(out);
    const std::size_t n = split.samples.size();
    // A trailing batch of one sample is dropped: batchnorm needs two values per channel.
    std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    if (n % cfg.batch_size == 1) --per_epoch;

    Trainer trainer(cfg, split.manifest.norm_constant);
    trainer.set_total_steps(per_epoch * cfg.epochs);
    std::size_t first_epoch = 1;
    const fs::path losses = out / "losses.csv", epochs_csv = out / "epochs.csv";
    if (resume) {
        first_epoch = trainer.restore(nn::TensorFile::load(*resume)) + 1;
        truncate_csv(losses, trainer.step_count());
        truncate_csv(epochs_csv, first_epoch - 1);
    } else {
        std::ofstream(losses) << "step,d_loss,g_adv,g_l1\n";
        std::ofstream(epochs_csv) << "epoch,d_loss,g_adv,g_l1\n";
    }
    {
        io::KeyValue kv;
        cfg.write(kv);
        kv.set("train.dataset", split.root.string());
        kv.save(out / "train_config.txt");
    }

    TrainResult result;
    std::ofstream loss_out(losses, std::ios::app), epoch_out(epochs_csv, std::ios::app);
    const std::size_t n_angles = split.samples.front().sinogram.rows;
    for (std::size_t epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(derive_seed(cfg.seed, {kShuffleTag, epoch}));
        std::shuffle(order.begin(), order.end(), shuffle);

        EpochReport er{epoch, {}};
        for (std::size_t bi = 0; bi < per_epoch; ++bi) {
            std::vector<const data::Sample*> samples;
            std::vector<ops::AngularMask> masks;
            for (std::size_t j = bi * cfg.batch_size; j < std::min(n, (bi + 1) * cfg.batch_size); ++j) {
                const auto& s = split.samples[order[j]];
                samples.push_back(&s);
                masks.push_back(training_mask(cfg, n_angles, epoch, s.id));
            }
            const auto r = trainer.step(make_batch(cfg, samples, masks, trainer.normalization()));
            loss_out << csv_row(trainer.step_count(), r);
            result.steps.push_back(r);
            er.mean.d_loss += r.d_loss / double(per_epoch);
            er.mean.g_adv += r.g_adv / double(per_epoch);
            er.mean.g_l1 += r.g_l1 / double(per_epoch);
            er.mean.g_total += r.g_total / double(per_epoch);
        }
        loss_out.flush();
        epoch_out << csv_row(epoch, er.mean) << std::flush;
        result.epochs.push_back(er);
        if (log) {
            *log << "epoch " << epoch << "/" << cfg.epochs << "  d_loss " << er.mean.d_loss << "  g_adv "
                 << er.mean.g_adv << "  g_l1 " << er.mean.g_l1 << std::endl;
        }
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "checkpoint_e%04zu.sptn", epoch);
            trainer.checkpoint(epoch).save(out / name);
        }
    }
    result.final_checkpoint = out / "final.sptn";
    trainer.checkpoint(cfg.epochs).save(result.final_checkpoint);
    return result;
}

// --- inference --------------------------------------------------------------

InpaintingModel InpaintingModel::load(const fs::path& checkpoint) {
    return from_file(nn::TensorFile::load(checkpoint));
}

InpaintingModel InpaintingModel::from_file(const nn::TensorFile& f) {
    if (f.text("checkpoint.format") != kCheckpointFormat) throw ConfigError("not a training checkpoint");
    const auto cfg = TrainConfig::read(io::KeyValue::parse(required_text(f, "train.config"), "<checkpoint>"));
    InpaintingModel m;
    m.kind_ = cfg.model;
    m.norm_.constant = std::stod(required_text(f, "train.norm_constant"));
    Rng unused(0);
    m.net_ = std::shared_ptr<models::UNet>(make_network(cfg, unused));
    m.net_->load(f, "generator");
    m.net_->set_trainable(false);
    return m;
}

Array2D InpaintingModel::inpaint(const Array2D& scarce, const Array2D& prior_sinogram,
                                 const ops::AngularMask& mask) const {
    const auto p = prepare_input(scarce, prior_sinogram, mask);
    const auto channels = model_channels(kind_, p, norm_);
    std::vector<const Array2D*> ptrs;
    for (const auto& c : channels) ptrs.push_back(&c);
    const Tensor x = stack({ptrs});
    const Tensor pm = stack({{&p.pmask}});
    nn::NoGradGuard no_grad;
    const bool masked = kind_ == ModelKind::pix2pix_prior;
    const auto y = net_->forward(x, masked ? &pm : nullptr, nn::ForwardContext{false, nullptr, false});
    return ops::compose_inpainted(scarce, channel_of(y, 0, 0), masked ? p.pmask : p.missing_rows, norm_);
}

}  // namespace sinpaint::train
