#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nerula/array.hpp"
#include "nerula/rng.hpp"
#include "nerula/signals.hpp"

namespace nerula {

/// Binary temporal mask: bit 1 keeps a sample, bit 0 masks it out.
/// Masked patches are the maximal runs of zeros.
struct MaskSpec {
    std::vector<std::uint8_t> bits;
    std::size_t patch_count = 0;
    std::uint64_t seed = 0;

    std::size_t length() const noexcept { return bits.size(); }
    std::size_t kept() const noexcept;
    Array as_array() const;
    MaskSpec complement() const;
};

struct MaskPair {
    MaskSpec primary;
    MaskSpec complement;
};

inline constexpr std::size_t kMinPatches = 15;
inline constexpr std::size_t kMaxPatches = 30;
inline constexpr std::size_t kMinPatchMaskLength = 120;

/// Number of maximal runs of zeros.
std::size_t count_zero_runs(std::span<const std::uint8_t> bits);
/// [start, end) of every maximal zero run, in order.
std::vector<std::pair<std::size_t, std::size_t>> zero_runs(std::span<const std::uint8_t> bits);

/// Patch mask with exactly T/2 masked samples split into K ~ U{15..30}
/// non-adjacent patches. Patch lengths are a uniform random composition of
/// T/2 into K positive parts; the kept samples are a uniform composition into
/// K + 1 gaps whose interior members are >= 1, so patches never touch.
MaskSpec sample_patch_mask(std::size_t length, RngStream& rng);

/// Exactly T/2 positions masked, chosen uniformly without replacement.
MaskSpec sample_random_point_mask(std::size_t length, RngStream& rng);

MaskPair make_mask_pair(MaskSpec primary);

/// (bits * x, (1 - bits) * x).
std::pair<std::vector<double>, std::vector<double>> make_pair(std::span<const double> x, const MaskSpec& mask);
std::pair<Signal, Signal> make_pair(const Signal& x, const MaskSpec& mask);

// ---------------------------------------------------------------------------
// Positive-pair strategies
// ---------------------------------------------------------------------------

enum class PairVariant { nerula_mask, random_point_mask, byol_augment, clocs_segments };

std::string_view to_string(PairVariant v);
/// Accepts the canonical names and the short CLI spellings
/// (nerula_mask|random_point|byol|clocs).
PairVariant parse_pair_variant(std::string_view name);

struct PairStrategy {
    PairVariant variant = PairVariant::nerula_mask;
    // byol_augment
    double flip_prob = 0.5;       // per view, independently for time and amplitude flips
    double crop_fraction = 0.8;   // crop length as a fraction of T, then resized back to T
    double noise_frac = 0.05;     // additive noise sigma as a fraction of std(x)

    void validate() const;
};

/// Two encoder inputs and the masks the encoder should apply to each.
/// For byol/clocs views the masks are all ones.
struct ViewPair {
    std::vector<double> first;
    std::vector<double> second;
    std::vector<double> first_mask;
    std::vector<double> second_mask;
};

ViewPair generate_views(const PairStrategy& strategy, std::span<const double> x, RngStream& rng);

}  // namespace nerula
