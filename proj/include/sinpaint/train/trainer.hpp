#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sinpaint/data/dataset.hpp"
#include "sinpaint/io/keyvalue.hpp"
#include "sinpaint/models/networks.hpp"
#include "sinpaint/nn/adam.hpp"
#include "sinpaint/ops/sinogram_ops.hpp"

namespace sinpaint::train {

using nn::Tensor;

// pix2pix_prior: masked generator + patch discriminator on (scarce, prior, mask).
// unet: refiner on the linearly interpolated sinogram.
// unet_prior: refiner on (interpolated, prior, mask).
enum class ModelKind { pix2pix_prior, unet, unet_prior };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);
inline bool is_adversarial(ModelKind kind) { return kind == ModelKind::pix2pix_prior; }

struct TrainConfig {
    ModelKind model = ModelKind::pix2pix_prior;
    std::size_t batch_size = 8;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda_l1 = 100.0;
    std::size_t epochs = 100;
    // Generator samples kept per full batch for the adversarial term.
    std::size_t topk_keep = 2;
    // Average the L1 term over the kept samples too, instead of the whole batch.
    bool l1_over_kept = true;
    double label_smooth = 0.9;
    double disc_noise_sigma = 0.05;
    bool noise_decay = true;
    // Missing fractions for training masks are drawn uniformly from this range.
    double fraction_min = 0.05;
    double fraction_max = 0.95;
    std::uint64_t seed = 1;
    // Epochs between checkpoints; 0 writes only the final one.
    std::size_t checkpoint_every = 10;
    std::size_t depth = 8;
    std::size_t base_width = 64;
    std::size_t disc_layers = 4;
    std::size_t disc_base_width = 64;
    // Condition the discriminator on the prior mask as well as scarce and prior.
    bool disc_condition_mask = true;
    // Train against the defect variants when the dataset stores them.
    bool use_defects = false;

    // Adversarial samples kept for a batch of `batch` samples.
    std::size_t kept(std::size_t batch) const;
    void validate() const;
    void write(io::KeyValue& kv) const;
    static TrainConfig read(const io::KeyValue& kv);
};

// Per-sample network inputs derived from a scarce sinogram and its prior.
struct PreparedInput {
    Array2D scarce;
    Array2D scaled_prior;
    Array2D pmask;
    Array2D interp;
    Array2D missing_rows;  // 1 on every pixel of a missing angle
};
PreparedInput prepare_input(const Array2D& scarce, const Array2D& prior_sinogram, const ops::AngularMask& mask);

// Network input channels for `kind`, normalized.
std::vector<Array2D> model_channels(ModelKind kind, const PreparedInput& p, const ops::Normalization& norm);

struct Batch {
    std::vector<std::size_t> ids;
    Tensor input;      // [B, C, H, W] model input
    Tensor condition;  // [B, 2 or 3, H, W] discriminator condition
    Tensor scarce;     // [B, 1, H, W] normalized scarce sinogram
    Tensor pmask;      // [B, 1, H, W]
    Tensor loss_mask;  // pixels scored by the L1 term
    Tensor target;     // [B, 1, H, W] normalized ground truth
};

// The mask used for sample `id` in `epoch`; independent of batch order.
ops::AngularMask training_mask(const TrainConfig& cfg, std::size_t n_angles, std::size_t epoch, std::size_t id);

Batch make_batch(const TrainConfig& cfg, const std::vector<const data::Sample*>& samples,
                 const std::vector<ops::AngularMask>& masks, const ops::Normalization& norm);

struct StepReport {
    double d_loss = 0.0;  // 0.5 * (real + fake)
    double d_real = 0.0;
    double d_fake = 0.0;
    double g_adv = 0.0;
    // Mean masked L1 over every sample of the batch, in normalized units.
    double g_l1 = 0.0;
    double g_total = 0.0;
};

class Trainer {
public:
    Trainer(const TrainConfig& cfg, double norm_constant);

    const TrainConfig& config() const { return cfg_; }
    const ops::Normalization& normalization() const { return norm_; }

    // Training-mode generator (or refiner) forward, graph kept for g_step.
    Tensor generate(const Batch& batch);
    // Discriminator scores for the batch [real; fake] of 2B samples, where real
    // is scarce + pmask * target and fake is scarce + `fake`. Both halves share
    // one batchnorm batch. `noise` adds the scheduled Gaussian input noise.
    Tensor discriminate(const Batch& batch, const Tensor& fake, bool noise, bool update_stats);
    // One Adam step on the discriminator against `fake` (detached here).
    StepReport d_step(const Batch& batch, const Tensor& fake);
    // One Adam step on the generator; the discriminator is frozen.
    StepReport g_step(const Batch& batch, const Tensor& fake);
    // generate + d_step + g_step, or one L1 step for refiners.
    StepReport step(const Batch& batch);

    void set_total_steps(std::size_t n) { total_steps_ = n; }
    std::size_t step_count() const { return steps_; }
    double noise_sigma() const;

    models::UNet& generator() { return *g_; }
    models::PatchDiscriminator* discriminator() { return d_.get(); }

    nn::TensorFile checkpoint(std::size_t epochs_done) const;
    // Returns the number of completed epochs stored in the checkpoint.
    std::size_t restore(const nn::TensorFile& file);

private:
    void check_finite(const StepReport& r) const;

    TrainConfig cfg_;
    ops::Normalization norm_;
    std::unique_ptr<models::UNet> g_;
    std::unique_ptr<models::PatchDiscriminator> d_;
    std::unique_ptr<nn::Adam<float>> g_opt_;
    std::unique_ptr<nn::Adam<float>> d_opt_;
    Rng rng_;
    std::size_t steps_ = 0;
    std::size_t total_steps_ = 0;
};

struct EpochReport {
    std::size_t epoch = 0;  // 1-based
    StepReport mean;
};

struct TrainResult {
    std::vector<StepReport> steps;  // steps run by this call
    std::vector<EpochReport> epochs;
    std::filesystem::path final_checkpoint;
};

// Writes <out>/train_config.txt, losses.csv (step,d_loss,g_adv,g_l1), epochs.csv,
// checkpoint_eNNNN.sptn every cfg.checkpoint_every epochs, and final.sptn.
// With `resume`, training continues after the stored epoch and the CSV files
// are truncated to the resumed step before appending.
TrainResult train(const data::Dataset& train_split, const TrainConfig& cfg, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& resume = std::nullopt, std::ostream* log = nullptr);

// Trained network loaded for inference in eval mode.
class InpaintingModel {
public:
    static InpaintingModel load(const std::filesystem::path& checkpoint);
    static InpaintingModel from_file(const nn::TensorFile& file);

    ModelKind kind() const { return kind_; }
    const ops::Normalization& normalization() const { return norm_; }
    // Observed rows are returned bit-identical to `scarce`.
    Array2D inpaint(const Array2D& scarce, const Array2D& prior_sinogram, const ops::AngularMask& mask) const;

private:
    ModelKind kind_ = ModelKind::pix2pix_prior;
    ops::Normalization norm_;
    std::shared_ptr<models::UNet> net_;
};

}  // namespace sinpaint::train
