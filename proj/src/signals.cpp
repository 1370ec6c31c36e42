#include "nerula/signals.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nerula {

void validate(const Signal& s) {
    if (s.samples.empty()) {
        throw std::invalid_argument("signal '" + s.id + "' is empty");
    }
    if (!(s.sample_rate_hz > 0.0) || !std::isfinite(s.sample_rate_hz)) {
        throw std::invalid_argument("signal '" + s.id + "' has a non-positive sample rate");
    }
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        if (!std::isfinite(s.samples[i])) {
            throw std::invalid_argument("signal '" + s.id + "' has a non-finite sample at index " +
                                        std::to_string(i));
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic ECG
// ---------------------------------------------------------------------------

void SynthParams::validate() const {
    if (!(heart_rate_bpm >= 30.0 && heart_rate_bpm <= 220.0)) {
        throw std::invalid_argument("heart_rate_bpm must lie in [30, 220]");
    }
    if (!(rr_jitter_frac >= 0.0 && rr_jitter_frac < 1.0)) {
        throw std::invalid_argument("rr_jitter_frac must lie in [0, 1)");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw std::invalid_argument("noise_sigma must be finite and >= 0");
    }
    for (const auto& w : waves) {
        if (!(w.width_s > 0.0) || !std::isfinite(w.amplitude) || !std::isfinite(w.center_s)) {
            throw std::invalid_argument("wave widths must be > 0 and wave parameters finite");
        }
    }
}

namespace {

struct Beat {
    double pos;  // samples
    double rr_s;
};

struct BeatTrain {
    std::vector<Beat> beats;
    std::size_t n = 0;
};

BeatTrain place_beats(const SynthParams& p, double duration_s, double fs_hz, RngStream& rng) {
    p.validate();
    if (!(fs_hz > 0.0) || !(duration_s > 0.0)) {
        throw std::invalid_argument("synth_ecg: duration and sample rate must be positive");
    }
    const double rr_mean = 60.0 / p.heart_rate_bpm;
    if (duration_s / rr_mean < 2.0) {
        throw std::invalid_argument("synth_ecg: duration must hold at least 2 beats at the given rate");
    }
    BeatTrain train;
    train.n = static_cast<std::size_t>(std::llround(duration_s * fs_hz));

    // Half a second of margin on each side covers every wave's support.
    const double margin = std::ceil(rr_mean * fs_hz) + fs_hz;
    const double intervals = duration_s / rr_mean;
    const double frac = intervals - std::floor(intervals);
    const double first = 0.5 * (1.0 + frac) * rr_mean * fs_hz;
    std::vector<Beat> before;
    for (double pos = first - rr_mean * fs_hz; pos > -margin - rr_mean * fs_hz; pos -= rr_mean * fs_hz) {
        before.push_back({pos, rr_mean});
    }
    std::reverse(before.begin(), before.end());
    train.beats = std::move(before);

    double pos = first;
    double prev_u = 0.0;
    for (std::size_t k = 0; pos < static_cast<double>(train.n) + margin; ++k) {
        double u;
        if (k % 2 == 0) {
            u = p.rr_jitter_frac > 0.0 ? rng.uniform(-p.rr_jitter_frac, p.rr_jitter_frac) : 0.0;
            prev_u = u;
        } else {
            u = -prev_u;
        }
        const double rr = rr_mean * (1.0 + u);
        train.beats.push_back({pos, rr});
        pos += rr * fs_hz;
    }
    return train;
}

}  // namespace

Signal synth_ecg(const SynthParams& params, double duration_s, double fs_hz, RngStream& rng) {
    const BeatTrain train = place_beats(params, duration_s, fs_hz, rng);
    Signal s;
    s.sample_rate_hz = fs_hz;
    s.label = params.class_id;
    s.samples.assign(train.n, 0.0);

    for (const Beat& beat : train.beats) {
        const double stretch = std::sqrt(beat.rr_s);
        std::array<Wave, 5> w = params.waves;
        for (auto idx : {kWaveP, kWaveT}) {
            w[idx].center_s *= stretch;
            w[idx].width_s *= stretch;
        }
        double reach_s = 0.0;
        for (const auto& wave : w) {
            reach_s = std::max(reach_s, std::abs(wave.center_s) + 6.0 * wave.width_s);
        }
        const double reach = std::ceil(reach_s * fs_hz);
        const double lo = std::max(0.0, std::ceil(beat.pos - reach));
        const double hi = std::min(static_cast<double>(train.n) - 1.0, std::floor(beat.pos + reach));
        for (double n = lo; n <= hi; n += 1.0) {
            const double dt = (n - beat.pos) / fs_hz;
            double v = 0.0;
            for (const auto& wave : w) {
                const double z = (dt - wave.center_s) / wave.width_s;
                v += wave.amplitude * std::exp(-0.5 * z * z);
            }
            s.samples[static_cast<std::size_t>(n)] += v;
        }
    }
    if (params.noise_sigma > 0.0) {
        for (auto& v : s.samples) {
            v += params.noise_sigma * rng.normal();
        }
    }
    return s;
}

std::vector<double> synth_r_peaks(const SynthParams& params, double duration_s, double fs_hz, RngStream rng) {
    const BeatTrain train = place_beats(params, duration_s, fs_hz, rng);
    std::vector<double> peaks;
    for (const auto& b : train.beats) {
        if (b.pos >= 0.0 && b.pos < static_cast<double>(train.n)) {
            peaks.push_back(b.pos);
        }
    }
    return peaks;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

void CorpusConfig::validate() const {
    if (!(duration_s > 0.0) || !(fs_hz > 0.0)) {
        throw std::invalid_argument("corpus: duration_s and fs_hz must be positive");
    }
    if (probe_per_class < 1) {
        throw std::invalid_argument("corpus: probe_per_class must be >= 1");
    }
    if (!(hr_min >= 30.0 && hr_max <= 220.0 && hr_min <= hr_max)) {
        throw std::invalid_argument("corpus: heart-rate range must lie within [30, 220]");
    }
    if (!(morphology_spread >= 0.0 && morphology_spread < 0.5)) {
        throw std::invalid_argument("corpus: morphology_spread must lie in [0, 0.5)");
    }
}

std::vector<Signal> Corpus::all() const {
    std::vector<Signal> out;
    out.reserve(size());
    for (const auto* part : {&pretrain, &probe, &attribute, &regression}) {
        out.insert(out.end(), part->begin(), part->end());
    }
    return out;
}

namespace {

SynthParams base_params(const CorpusConfig& cfg, RngStream& rng) {
    SynthParams p;
    p.heart_rate_bpm = rng.uniform(cfg.hr_min, cfg.hr_max);
    for (auto& w : p.waves) {
        w.amplitude *= 1.0 + rng.uniform(-cfg.morphology_spread, cfg.morphology_spread);
        w.width_s *= 1.0 + rng.uniform(-cfg.morphology_spread, cfg.morphology_spread);
    }
    p.noise_sigma = cfg.base_noise_sigma;
    p.rr_jitter_frac = cfg.regular_jitter;
    return p;
}

std::string make_id(const char* prefix, std::size_t i) {
    std::ostringstream os;
    os << prefix << '-' << std::setw(5) << std::setfill('0') << i;
    return os.str();
}

}  // namespace

SynthParams draw_rhythm_params(const CorpusConfig& cfg, RhythmClass cls, RngStream& rng) {
    SynthParams p = base_params(cfg, rng);
    p.class_id = cls;
    switch (cls) {
        case kRegular:
            break;
        case kIrregular:
            p.rr_jitter_frac = cfg.irregular_jitter;
            break;
        case kNoisy:
            p.noise_sigma = cfg.noisy_sigma;
            break;
    }
    return p;
}

Corpus build_corpus(const CorpusConfig& cfg, const RngStream& rng) {
    cfg.validate();
    Corpus c;
    for (std::size_t i = 0; i < cfg.pretrain_count; ++i) {
        const std::string id = make_id("pre", i);
        RngStream r = rng.split(id);
        const auto cls = static_cast<RhythmClass>(r.uniform_int(0, 2));
        Signal s = synth_ecg(draw_rhythm_params(cfg, cls, r), cfg.duration_s, cfg.fs_hz, r);
        s.id = id;
        s.label = std::monostate{};
        c.pretrain.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < 3 * cfg.probe_per_class; ++i) {
        const std::string id = make_id("cls", i);
        RngStream r = rng.split(id);
        const auto cls = static_cast<RhythmClass>(i % 3);
        Signal s = synth_ecg(draw_rhythm_params(cfg, cls, r), cfg.duration_s, cfg.fs_hz, r);
        s.id = id;
        s.label = static_cast<int>(cls);
        c.probe.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < cfg.attribute_count; ++i) {
        const std::string id = make_id("attr", i);
        RngStream r = rng.split(id);
        SynthParams p = base_params(cfg, r);
        const int attr = static_cast<int>(i % 2);
        if (attr == 1) {
            p.waves[kWaveT].amplitude *= 1.6;
            for (auto idx : {kWaveQ, kWaveR, kWaveS}) {
                p.waves[idx].width_s *= 1.3;
            }
        }
        p.class_id = attr;
        Signal s = synth_ecg(p, cfg.duration_s, cfg.fs_hz, r);
        s.id = id;
        s.label = attr;
        c.attribute.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < cfg.regression_count; ++i) {
        const std::string id = make_id("reg", i);
        RngStream r = rng.split(id);
        SynthParams p = base_params(cfg, r);
        Signal s = synth_ecg(p, cfg.duration_s, cfg.fs_hz, r);
        s.id = id;
        s.label = p.heart_rate_bpm;
        c.regression.push_back(std::move(s));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::string describe(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

Signal load_signal_csv(const std::filesystem::path& path, double default_rate_hz) {
    std::ifstream in(path);
    if (!in) {
        throw SignalFormatError("cannot open " + describe(path));
    }
    Signal s;
    s.id = path.stem().string();
    s.sample_rate_hz = default_rate_hz;
    std::string line;
    std::size_t lineno = 0;
    constexpr std::string_view header = "sample_rate_hz=";
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (lineno == 1 && t.starts_with(header)) {
            double rate = 0.0;
            if (!parse_double(t.substr(header.size()), rate) || !(rate > 0.0) || !std::isfinite(rate)) {
                throw SignalFormatError(describe(path) + " line 1: malformed sample-rate header");
            }
            s.sample_rate_hz = rate;
            continue;
        }
        double v = 0.0;
        if (!parse_double(t, v)) {
            throw SignalFormatError(describe(path) + " line " + std::to_string(lineno) + ": not a number: '" +
                                    std::string(t) + "'");
        }
        if (!std::isfinite(v)) {
            throw SignalFormatError(describe(path) + " line " + std::to_string(lineno) + ": non-finite sample");
        }
        s.samples.push_back(v);
    }
    if (s.samples.empty()) {
        throw SignalFormatError(describe(path) + ": no samples");
    }
    return s;
}

void save_signal_csv(const Signal& s, const std::filesystem::path& path) {
    validate(s);
    std::ofstream out(path);
    if (!out) {
        throw SignalFormatError("cannot write " + describe(path));
    }
    out << "sample_rate_hz=" << std::setprecision(17) << s.sample_rate_hz << '\n';
    for (double v : s.samples) {
        out << v << '\n';
    }
}

namespace {

constexpr char kSignalMagic[4] = {'N', 'R', 'L', 'A'};

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

}  // namespace

Signal load_signal_f32(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SignalFormatError("cannot open " + describe(path));
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) {
        throw SignalFormatError(describe(path) + ": file shorter than the 8-byte header");
    }
    if (std::memcmp(bytes.data(), kSignalMagic, 4) != 0) {
        throw SignalFormatError(describe(path) + " offset 0: bad magic (expected NRLA)");
    }
    const float rate = std::bit_cast<float>(read_u32_le(bytes.data() + 4));
    if (!(rate > 0.0f) || !std::isfinite(rate)) {
        throw SignalFormatError(describe(path) + " offset 4: invalid sample rate");
    }
    if ((bytes.size() - 8) % 4 != 0) {
        throw SignalFormatError(describe(path) + " offset " + std::to_string(bytes.size()) +
                                ": payload is not a whole number of float32 samples");
    }
    if (bytes.size() == 8) {
        throw SignalFormatError(describe(path) + ": no samples");
    }
    Signal s;
    s.id = path.stem().string();
    s.sample_rate_hz = rate;
    for (std::size_t off = 8; off < bytes.size(); off += 4) {
        const float v = std::bit_cast<float>(read_u32_le(bytes.data() + off));
        if (!std::isfinite(v)) {
            throw SignalFormatError(describe(path) + " offset " + std::to_string(off) + ": non-finite sample");
        }
        s.samples.push_back(v);
    }
    return s;
}

void save_signal_f32(const Signal& s, const std::filesystem::path& path) {
    validate(s);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw SignalFormatError("cannot write " + describe(path));
    }
    out.write(kSignalMagic, 4);
    write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(s.sample_rate_hz)));
    for (double v : s.samples) {
        write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

std::vector<double> normalize(std::span<const double> x) {
    if (x.size() < 2) {
        throw std::invalid_argument("normalize: need at least 2 samples");
    }
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) {
        mu += v;
    }
    mu /= n;
    double var = 0.0;
    for (double v : x) {
        var += (v - mu) * (v - mu);
    }
    var /= n;
    std::vector<double> out(x.size(), 0.0);
    if (var < 1e-8) {
        return out;
    }
    const double inv = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = (x[i] - mu) * inv;
    }
    return out;
}

Signal normalize(const Signal& x) {
    Signal out = x;
    out.samples = normalize(std::span<const double>(x.samples));
    return out;
}

std::vector<Signal> chunk(const Signal& x, std::size_t length) {
    if (length == 0) {
        throw std::invalid_argument("chunk: length must be positive");
    }
    if (x.samples.size() < length) {
        throw std::invalid_argument("chunk: signal '" + x.id + "' has " + std::to_string(x.samples.size()) +
                                    " samples, fewer than the required " + std::to_string(length));
    }
    std::vector<Signal> out;
    for (std::size_t start = 0; start + length <= x.samples.size(); start += length) {
        Signal c = x;
        c.samples.assign(x.samples.begin() + static_cast<std::ptrdiff_t>(start),
                         x.samples.begin() + static_cast<std::ptrdiff_t>(start + length));
        c.id = x.id + "#" + std::to_string(start / length);
        out.push_back(std::move(c));
    }
    return out;
}

DatasetSplit split_dataset(const std::vector<std::string>& ids, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
        std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw std::invalid_argument("split_dataset: fractions must be >= 0 and sum to 1");
    }
    std::vector<std::string> order = ids;
    RngStream rng(seed);
    rng.shuffle(order);
    const auto n = static_cast<double>(order.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * n));
    const auto n_val = std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(val_frac * n)));
    DatasetSplit split;
    split.seed = seed;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return split;
}

}  // namespace nerula
