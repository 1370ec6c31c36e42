#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nerula/ops.hpp"
#include "nerula/params.hpp"
#include "nerula/rng.hpp"
#include "nerula/signals.hpp"

namespace nerula {

struct ConvStage {
    std::size_t channels = 0;
    std::size_t kernel = 0;  // odd; padding is (kernel - 1) / 2
    std::size_t stride = 1;

    friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

/// Encoder: masked conv stem, then local-attention blocks on [T_l x dim] rows,
/// masked mean pooling and a linear map to the representation size.
/// The decoder mirrors the stem with stride-matched transposed convolutions,
/// optionally preceded by unmasked local-attention blocks at latent resolution.
struct EncoderConfig {
    std::vector<ConvStage> stem{{32, 7, 2}, {64, 5, 2}, {128, 5, 2}};
    std::size_t blocks = 4;
    std::size_t dim = 128;  // must equal the last stem stage's channels
    std::size_t window = 17;
    std::size_t ffn_mult = 2;
    std::size_t rep_dim = 128;
    std::size_t decoder_blocks = 0;
    /// Multiply every encoder layer by the mask resampled to its length.
    /// When off, the mask is applied to the input only.
    bool latent_masking = true;

    void validate() const;
    std::size_t total_stride() const;
    /// Throws unless T is divisible through every stem stage.
    void check_length(std::size_t length) const;
    /// Sequence length after each stem stage for an input of `length` samples.
    std::vector<std::size_t> layer_lengths(std::size_t length) const;

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Small configuration that trains in minutes on one core at T = 3000.
EncoderConfig compact_encoder_config();

using ModelParams = ParameterSet;

/// Centered uniform fan-in init (U(-1/sqrt(fan_in), 1/sqrt(fan_in))), zero biases,
/// unit layer-norm gains. Deterministic in `rng`.
ModelParams init_params(const EncoderConfig& cfg, RngStream rng);

struct LatentState {
    std::vector<Var> activations;    // post-mask output of each layer: stem stages, then blocks
    std::vector<Array> layer_masks;  // interpolated mask per layer
    Var final_features;              // [T_l x dim], masked; input to pooling and the decoder
    Array final_mask;                // [T_l]
    Var pooled;                      // [dim], masked mean over time
    Var representation;              // [rep_dim]
    std::size_t input_length = 0;
};

/// x and mask have length T. The input is multiplied by the mask before the stem.
LatentState encode(std::span<const double> x, std::span<const double> mask, const ModelParams& params,
                   const EncoderConfig& cfg);

/// Projection head: linear, GELU, linear; rep_dim -> rep_dim.
Var project(const Var& representation, const ModelParams& params, const EncoderConfig& cfg);

/// Full-length reconstruction [T] from the final masked feature map.
Var decode(const LatentState& latent, const ModelParams& params, const EncoderConfig& cfg);

/// Unmasked, z-scored pooled representation (before the projection head).
std::vector<double> embed(std::span<const double> x, const ModelParams& params, const EncoderConfig& cfg);
std::vector<double> embed(const Signal& x, const ModelParams& params, const EncoderConfig& cfg);

}  // namespace nerula
