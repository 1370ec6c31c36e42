#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nerula/masking.hpp"
#include "nerula/model.hpp"
#include "nerula/objectives.hpp"
#include "nerula/optim.hpp"
#include "nerula/signals.hpp"

namespace nerula {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    AdamConfig adam;  // lr defaults to 1e-4
    LossWeights weights;
    EncoderConfig encoder;
    PairStrategy strategy;
    std::uint64_t seed = 0;
    std::size_t signal_length = 3000;
    /// Write a checkpoint every N epochs (0: only at the end, when a directory is given).
    std::size_t checkpoint_every = 0;
    /// Reconstruction loss on masked positions only instead of all T positions.
    bool recon_masked_only = false;
    /// Decode both branches and average their reconstruction losses.
    bool decode_both = false;

    void validate() const;
};

/// The four rungs of the component-addition ladder:
/// 1 byol views, no reconstruction; 2 complementary masks on the input only;
/// 3 plus latent masking; 4 plus reconstruction (full model).
TrainConfig ladder_config(TrainConfig base, int rung);
std::string ladder_name(int rung);

struct EpochSummary {
    std::size_t epoch = 0;
    double nce = 0.0;
    double recon = 0.0;
    double total = 0.0;
    double seconds = 0.0;
    std::uint64_t rng_digest = 0;  // hash of the epoch's sample order and view masks
};

struct TrainLog {
    std::vector<LossReport> steps;
    std::vector<EpochSummary> epochs;
    double wall_seconds = 0.0;

    void write_csv(const std::filesystem::path& path) const;
};

/// Reads the step rows written by TrainLog::write_csv.
std::vector<LossReport> read_loss_csv(const std::filesystem::path& path);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PretrainOptions {
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
    std::function<void(const EpochSummary&)> on_epoch;
    /// Optional starting parameters; otherwise init_params(cfg.encoder, seed-derived stream).
    const ModelParams* initial = nullptr;
};

struct PretrainResult {
    ModelParams params;
    TrainLog log;
};

/// Loss and gradient of one training example; gradients are accumulated into
/// `params` scaled by `grad_scale`. Exposed for gradient checks and tests.
struct ExampleLoss {
    Var total;
    LossReport report;
};
ExampleLoss example_loss(std::span<const double> x, const ViewPair& views, const ModelParams& params,
                         const TrainConfig& cfg);

/// Deterministic pretraining loop. Every signal must have length
/// cfg.signal_length; signals are z-scored first. Throws TrainingError on a
/// non-finite loss, naming the step and sample.
PretrainResult pretrain(const std::vector<Signal>& corpus, const TrainConfig& cfg, const PretrainOptions& opts = {});

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout: magic "NRLACKPT", u32 format version, u64 manifest length, manifest
/// JSON (config, seed, parameter names/shapes/dtypes/offsets), then one
/// little-endian float32 blob per parameter in manifest order.
void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const std::filesystem::path& path);

struct Checkpoint {
    ModelParams params;
    TrainConfig config;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nerula
