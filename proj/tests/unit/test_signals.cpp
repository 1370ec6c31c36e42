#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "nerula/signals.hpp"

using namespace nerula;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() /
                         ("nerula_signals_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir);
    return dir;
}

// Independent detector: local maxima above half the R amplitude, at least
// 0.2 s apart (the larger one wins).
std::vector<std::size_t> detect_peaks(const std::vector<double>& x, double fs) {
    const auto refractory = static_cast<std::size_t>(0.2 * fs);
    std::vector<std::size_t> peaks;
    for (std::size_t t = 1; t + 1 < x.size(); ++t) {
        if (x[t] > 0.5 && x[t] >= x[t - 1] && x[t] > x[t + 1]) {
            if (!peaks.empty() && t - peaks.back() < refractory) {
                if (x[t] > x[peaks.back()]) {
                    peaks.back() = t;
                }
                continue;
            }
            peaks.push_back(t);
        }
    }
    return peaks;
}

double rr_cv(const std::vector<double>& peaks) {
    std::vector<double> rr;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        rr.push_back(peaks[i] - peaks[i - 1]);
    }
    const double mean = std::accumulate(rr.begin(), rr.end(), 0.0) / static_cast<double>(rr.size());
    double var = 0.0;
    for (double r : rr) {
        var += (r - mean) * (r - mean);
    }
    return std::sqrt(var / static_cast<double>(rr.size())) / mean;
}

}  // namespace

TEST(Synth, SixtyBpmGivesTenPeaksThreeHundredApart) {
    RngStream rng(1);
    const Signal s = synth_ecg({}, 10.0, 300.0, rng);
    ASSERT_EQ(s.length(), 3000u);
    const auto peaks = detect_peaks(s.samples, 300.0);
    ASSERT_EQ(peaks.size(), 10u);
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        EXPECT_NEAR(static_cast<double>(peaks[i] - peaks[i - 1]), 300.0, 1.0);
    }
}

TEST(Synth, NoiselessRegularSignalIsPeriodic) {
    for (double hr : {60.0, 75.0, 100.0, 120.0}) {
        SynthParams p;
        p.heart_rate_bpm = hr;
        RngStream rng(2);
        const Signal s = synth_ecg(p, 10.0, 300.0, rng);
        const auto period = static_cast<std::size_t>(std::llround(60.0 / hr * 300.0));
        for (std::size_t t = 0; t + period < s.length(); ++t) {
            ASSERT_NEAR(s.samples[t], s.samples[t + period], 1e-12) << "hr " << hr << " t " << t;
        }
    }
}

TEST(Synth, PeakCountPropertyOverRandomParams) {
    RngStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        SynthParams p;
        p.heart_rate_bpm = rng.uniform(30.0, 220.0);
        p.rr_jitter_frac = rng.uniform(0.0, 0.99);
        p.noise_sigma = rng.uniform(0.0, 0.3);
        const double duration = rng.uniform(5.0, 20.0);
        RngStream gen = rng.split(static_cast<std::uint64_t>(i));
        const auto expected = std::floor(duration * p.heart_rate_bpm / 60.0);
        const auto peaks = synth_r_peaks(p, duration, 300.0, gen);
        ASSERT_NEAR(static_cast<double>(peaks.size()), expected, 1.0) << "draw " << i;
        const Signal s = synth_ecg(p, duration, 300.0, gen);
        ASSERT_NO_THROW(validate(s));
    }
}

TEST(Synth, DetectedPeaksMatchPlacedPeaks) {
    RngStream rng(4);
    for (int i = 0; i < 100; ++i) {
        SynthParams p;
        p.heart_rate_bpm = rng.uniform(40.0, 150.0);
        p.rr_jitter_frac = rng.uniform(0.0, 0.3);
        RngStream gen = rng.split(static_cast<std::uint64_t>(i));
        auto placed = synth_r_peaks(p, 10.0, 300.0, gen);
        const Signal s = synth_ecg(p, 10.0, 300.0, gen);
        auto found = detect_peaks(s.samples, 300.0);
        // Peaks within two samples of either end may not be local maxima; skip them on both sides.
        const auto near_edge = [&](double pk) { return pk < 2.0 || pk > static_cast<double>(s.length()) - 3.0; };
        std::erase_if(placed, [&](double pk) { return near_edge(std::round(pk)); });
        std::erase_if(found, [&](std::size_t pk) { return near_edge(static_cast<double>(pk)); });
        ASSERT_EQ(found.size(), placed.size()) << "draw " << i << " " << ::testing::PrintToString(found) << " " << ::testing::PrintToString(placed);
        for (std::size_t k = 0; k < found.size(); ++k) {
            EXPECT_NEAR(static_cast<double>(found[k]), placed[k], 1.0);
        }
    }
}

TEST(Synth, IrregularRhythmRaisesRrVariability) {
    // RR = 60/HR (1 + U(-j, j)) has coefficient of variation j / sqrt(3):
    // 0.173 at j = 0.3 against 0 for a regular rhythm.
    SynthParams regular, irregular;
    irregular.rr_jitter_frac = 0.3;
    irregular.class_id = 1;
    RngStream rng(5);
    const double cv_regular = rr_cv(synth_r_peaks(regular, 600.0, 300.0, rng.split(1)));
    const double cv_irregular = rr_cv(synth_r_peaks(irregular, 600.0, 300.0, rng.split(2)));
    EXPECT_LT(cv_regular, 1e-9);
    EXPECT_NEAR(cv_irregular, 0.3 / std::sqrt(3.0), 0.02);
    EXPECT_GT(cv_irregular - cv_regular, 0.15);
}

TEST(Synth, RejectsInvalidParams) {
    RngStream rng(6);
    SynthParams p;
    p.heart_rate_bpm = 250.0;
    EXPECT_THROW(synth_ecg(p, 10.0, 300.0, rng), std::invalid_argument);
    p.heart_rate_bpm = 60.0;
    p.rr_jitter_frac = 1.0;
    EXPECT_THROW(synth_ecg(p, 10.0, 300.0, rng), std::invalid_argument);
    p.rr_jitter_frac = 0.0;
    p.waves[kWaveR].width_s = 0.0;
    EXPECT_THROW(synth_ecg(p, 10.0, 300.0, rng), std::invalid_argument);
    EXPECT_THROW(synth_ecg({}, 1.5, 300.0, rng), std::invalid_argument);
}

TEST(Corpus, SizesIdsAndDeterminism) {
    CorpusConfig cfg;
    cfg.pretrain_count = 300;
    cfg.probe_per_class = 50;
    const Corpus a = build_corpus(cfg, RngStream(9));
    EXPECT_EQ(a.size(), 450u);
    std::set<std::string> ids;
    for (const auto& s : a.all()) {
        ids.insert(s.id);
        ASSERT_EQ(s.length(), 3000u);
        ASSERT_NO_THROW(validate(s));
    }
    EXPECT_EQ(ids.size(), 450u);
    const Corpus b = build_corpus(cfg, RngStream(9));
    for (std::size_t i = 0; i < a.pretrain.size(); ++i) {
        ASSERT_EQ(a.pretrain[i].samples, b.pretrain[i].samples);
    }
    for (std::size_t i = 0; i < a.probe.size(); ++i) {
        ASSERT_EQ(a.probe[i].samples, b.probe[i].samples);
        ASSERT_EQ(a.probe[i].class_id(), static_cast<int>(i % 3));
    }
    EXPECT_NE(build_corpus(cfg, RngStream(10)).probe[0].samples, a.probe[0].samples);
}

TEST(Corpus, ItemsIndependentOfCounts) {
    CorpusConfig small;
    small.pretrain_count = 3;
    small.probe_per_class = 1;
    CorpusConfig large = small;
    large.pretrain_count = 20;
    large.probe_per_class = 4;
    const Corpus a = build_corpus(small, RngStream(1));
    const Corpus b = build_corpus(large, RngStream(1));
    EXPECT_EQ(a.pretrain[2].samples, b.pretrain[2].samples);
    EXPECT_EQ(a.probe[1].samples, b.probe[1].samples);
}

TEST(Corpus, AttributeAndRegressionSets) {
    CorpusConfig cfg;
    cfg.pretrain_count = 1;
    cfg.probe_per_class = 1;
    cfg.attribute_count = 6;
    cfg.regression_count = 5;
    const Corpus c = build_corpus(cfg, RngStream(2));
    ASSERT_EQ(c.attribute.size(), 6u);
    ASSERT_EQ(c.regression.size(), 5u);
    for (std::size_t i = 0; i < c.attribute.size(); ++i) {
        EXPECT_EQ(c.attribute[i].class_id(), static_cast<int>(i % 2));
    }
    for (const auto& s : c.regression) {
        EXPECT_GE(s.target(), cfg.hr_min);
        EXPECT_LE(s.target(), cfg.hr_max);
    }
}

TEST(Files, CsvRoundTrip) {
    const fs::path dir = temp_dir();
    RngStream rng(1);
    Signal s = synth_ecg({}, 2.0, 250.0, rng);
    save_signal_csv(s, dir / "a.csv");
    const Signal r = load_signal_csv(dir / "a.csv");
    EXPECT_EQ(r.sample_rate_hz, 250.0);
    ASSERT_EQ(r.length(), s.length());
    for (std::size_t i = 0; i < s.length(); ++i) {
        EXPECT_NEAR(r.samples[i], s.samples[i], 1e-6 * std::max(1.0, std::abs(s.samples[i])));
    }
}

TEST(Files, CsvWithoutHeaderUsesDefaultRate) {
    const fs::path dir = temp_dir();
    std::ofstream(dir / "b.csv") << "1.5\n-2\n3e-1\n";
    const Signal r = load_signal_csv(dir / "b.csv", 360.0);
    EXPECT_EQ(r.sample_rate_hz, 360.0);
    EXPECT_EQ(r.samples, (std::vector<double>{1.5, -2.0, 0.3}));
}

TEST(Files, CsvErrorsNameLine) {
    const fs::path dir = temp_dir();
    std::ofstream(dir / "bad.csv") << "sample_rate_hz=300\n1.0\n2.0\nabc\n";
    try {
        load_signal_csv(dir / "bad.csv");
        FAIL();
    } catch (const SignalFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
    std::ofstream(dir / "nan.csv") << "1.0\nnan\n";
    EXPECT_THROW(load_signal_csv(dir / "nan.csv"), SignalFormatError);
    std::ofstream(dir / "empty.csv") << "";
    EXPECT_THROW(load_signal_csv(dir / "empty.csv"), SignalFormatError);
    std::ofstream(dir / "hdr.csv") << "sample_rate_hz=fast\n1.0\n";
    EXPECT_THROW(load_signal_csv(dir / "hdr.csv"), SignalFormatError);
}

TEST(Files, BinaryRoundTripAndHeader) {
    const fs::path dir = temp_dir();
    RngStream rng(2);
    const Signal s = synth_ecg({}, 2.0, 300.0, rng);
    save_signal_f32(s, dir / "a.nrla");
    EXPECT_EQ(fs::file_size(dir / "a.nrla"), 8 + 4 * s.length());
    std::ifstream raw(dir / "a.nrla", std::ios::binary);
    char magic[4];
    raw.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "NRLA");
    const Signal r = load_signal_f32(dir / "a.nrla");
    EXPECT_EQ(r.sample_rate_hz, 300.0);
    ASSERT_EQ(r.length(), s.length());
    for (std::size_t i = 0; i < s.length(); ++i) {
        EXPECT_NEAR(r.samples[i], s.samples[i], 1e-6 * std::max(1.0, std::abs(s.samples[i])));
    }
}

TEST(Files, BinaryErrorsNameOffset) {
    const fs::path dir = temp_dir();
    std::ofstream(dir / "empty.nrla", std::ios::binary) << "";
    EXPECT_THROW(load_signal_f32(dir / "empty.nrla"), SignalFormatError);
    std::ofstream(dir / "magic.nrla", std::ios::binary) << "XXXXabcdabcd";
    try {
        load_signal_f32(dir / "magic.nrla");
        FAIL();
    } catch (const SignalFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos) << e.what();
    }
    Signal s;
    s.samples = {1.0, 2.0};
    save_signal_f32(s, dir / "trunc.nrla");
    fs::resize_file(dir / "trunc.nrla", 8 + 4 + 2);
    try {
        load_signal_f32(dir / "trunc.nrla");
        FAIL();
    } catch (const SignalFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_signal_f32(dir / "missing.nrla"), SignalFormatError);
}

TEST(Normalize, ZeroMeanUnitVarianceAndIdempotent) {
    RngStream rng(3);
    std::vector<double> x(1000);
    for (double& v : x) {
        v = 5.0 + 3.0 * rng.normal();
    }
    const auto z = normalize(std::span<const double>(x));
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / 1000.0;
    double var = 0.0;
    for (double v : z) {
        var += (v - mean) * (v - mean);
    }
    EXPECT_LT(std::abs(mean), 1e-10);
    EXPECT_LT(std::abs(std::sqrt(var / 1000.0) - 1.0), 1e-6);
    const auto zz = normalize(std::span<const double>(z));
    for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_NEAR(zz[i], z[i], 1e-9);
    }
}

TEST(Normalize, ConstantMapsToZerosAndShortRejected) {
    const std::vector<double> c(10, 4.2);
    for (double v : normalize(std::span<const double>(c))) {
        EXPECT_EQ(v, 0.0);
    }
    const std::vector<double> one{1.0};
    EXPECT_THROW(normalize(std::span<const double>(one)), std::invalid_argument);
}

TEST(Chunk, DropsRemainderAndRejectsShort) {
    Signal s;
    s.id = "rec";
    s.samples.resize(7000);
    std::iota(s.samples.begin(), s.samples.end(), 0.0);
    const auto parts = chunk(s, 3000);
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_EQ(parts[1].samples.front(), 3000.0);
    EXPECT_EQ(parts[1].id, "rec#1");
    EXPECT_THROW(chunk(s, 8000), std::invalid_argument);
}

TEST(Split, DisjointCoveringAndProportional) {
    std::vector<std::string> ids;
    for (int i = 0; i < 1000; ++i) {
        ids.push_back("id" + std::to_string(i));
    }
    const DatasetSplit s = split_dataset(ids, 0.7, 0.15, 0.15, 4);
    std::set<std::string> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (const auto& id : *part) {
            EXPECT_TRUE(all.insert(id).second) << id << " appears twice";
        }
    }
    EXPECT_EQ(all.size(), ids.size());
    EXPECT_NEAR(s.train.size() / 1000.0, 0.70, 0.01);
    EXPECT_NEAR(s.val.size() / 1000.0, 0.15, 0.01);
    EXPECT_NEAR(s.test.size() / 1000.0, 0.15, 0.01);
    EXPECT_EQ(split_dataset(ids, 0.7, 0.15, 0.15, 4).train, s.train);
    EXPECT_THROW(split_dataset(ids, 0.7, 0.2, 0.2, 4), std::invalid_argument);
}
