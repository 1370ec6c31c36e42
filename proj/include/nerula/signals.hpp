#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nerula/rng.hpp"

namespace nerula {

/// Class index or scalar regression target.
using Label = std::variant<std::monostate, int, double>;

struct Signal {
    std::vector<double> samples;
    double sample_rate_hz = 300.0;
    std::string id;
    Label label;

    std::size_t length() const noexcept { return samples.size(); }
    bool has_class() const noexcept { return std::holds_alternative<int>(label); }
    int class_id() const { return std::get<int>(label); }
    double target() const { return std::get<double>(label); }
};

/// Throws if the signal is empty, has non-finite samples or a non-positive rate.
void validate(const Signal& s);

class SignalFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic ECG
// ---------------------------------------------------------------------------

/// One Gaussian wave of the beat template. Centers are seconds relative to the
/// R peak; P and T centers/widths stretch with sqrt(RR) so they do not collide
/// with neighbouring beats at high rates.
struct Wave {
    double amplitude;
    double width_s;
    double center_s;
};

enum WaveIndex : std::size_t { kWaveP = 0, kWaveQ, kWaveR, kWaveS, kWaveT };

struct SynthParams {
    double heart_rate_bpm = 60.0;
    double rr_jitter_frac = 0.0;
    std::array<Wave, 5> waves{{
        {0.15, 0.025, -0.20},   // P
        {-0.15, 0.010, -0.035},  // Q
        {1.00, 0.012, 0.0},      // R
        {-0.25, 0.012, 0.035},   // S
        {0.30, 0.050, 0.30},     // T
    }};
    double noise_sigma = 0.0;
    int class_id = 0;

    void validate() const;
};

/// Sum-of-Gaussians beat train with optional RR jitter and white noise.
///
/// The unjittered beat grid is centred in the window: with M + f mean RR
/// intervals fitting in the duration (f the fractional part), the first R peak
/// sits (1 + f) / 2 intervals after t = 0 and the last one as far before the
/// end. Jitter is drawn in antithetic pairs (u, -u) so each RR is
/// 60/HR * (1 + U(-j, j)) marginally while every second beat stays on the grid;
/// a jittered beat moves by less than one interval, so the R-peak count is
/// floor(duration * HR / 60) +- 1 for any j < 1.
Signal synth_ecg(const SynthParams& params, double duration_s, double fs_hz, RngStream& rng);

/// R-peak sample positions the generator placed inside [0, N) for these inputs.
/// Same RNG consumption as synth_ecg; intended for diagnostics.
std::vector<double> synth_r_peaks(const SynthParams& params, double duration_s, double fs_hz, RngStream rng);

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

/// Three labeled rhythm classes used by the probe set.
enum RhythmClass : int { kRegular = 0, kIrregular = 1, kNoisy = 2 };

struct CorpusConfig {
    std::uint64_t seed = 1;
    double duration_s = 10.0;
    double fs_hz = 300.0;
    std::size_t pretrain_count = 300;
    std::size_t probe_per_class = 50;
    std::size_t attribute_count = 0;
    std::size_t regression_count = 0;
    double hr_min = 50.0;
    double hr_max = 110.0;
    double regular_jitter = 0.02;
    double irregular_jitter = 0.3;
    double base_noise_sigma = 0.02;
    double noisy_sigma = 0.25;
    double morphology_spread = 0.1;

    void validate() const;
};

struct Corpus {
    std::vector<Signal> pretrain;    // unlabeled mixture of the three rhythm classes
    std::vector<Signal> probe;       // class label in {0, 1, 2}
    std::vector<Signal> attribute;   // binary morphology attribute
    std::vector<Signal> regression;  // scalar target: heart rate (bpm)

    std::size_t size() const noexcept {
        return pretrain.size() + probe.size() + attribute.size() + regression.size();
    }
    std::vector<Signal> all() const;
};

/// Every item is generated from rng.split(id), so the corpus is a pure function
/// of (config, rng seed) and items can be produced in any order.
Corpus build_corpus(const CorpusConfig& cfg, const RngStream& rng);

/// Parameters build_corpus draws for a rhythm class (exposed for tests).
SynthParams draw_rhythm_params(const CorpusConfig& cfg, RhythmClass cls, RngStream& rng);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// CSV: optional first line `sample_rate_hz=<float>`, then one sample per line.
Signal load_signal_csv(const std::filesystem::path& path, double default_rate_hz = 300.0);
void save_signal_csv(const Signal& s, const std::filesystem::path& path);

/// Binary: magic "NRLA", float32 sample rate, then float32 samples, little-endian.
Signal load_signal_f32(const std::filesystem::path& path);
void save_signal_f32(const Signal& s, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Per-recording z-score. Variance below 1e-8 maps to all zeros.
Signal normalize(const Signal& x);
std::vector<double> normalize(std::span<const double> x);

/// Splits into consecutive non-overlapping windows of exactly `length` samples;
/// a trailing remainder is dropped. Throws if the signal is shorter than `length`.
std::vector<Signal> chunk(const Signal& x, std::size_t length);

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

/// Shuffled split with sizes round(f * N); fractions must sum to 1.
DatasetSplit split_dataset(const std::vector<std::string>& ids, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed);

}  // namespace nerula
