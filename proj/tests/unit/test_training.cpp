#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "nerula/gradsuite.hpp"
#include "nerula/training.hpp"

using namespace nerula;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kLen = 128;

std::vector<Signal> toy_corpus(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<Signal> out;
    for (std::size_t i = 0; i < n; ++i) {
        Signal s;
        s.id = "toy-" + std::to_string(i);
        const double f = rng.uniform(0.05, 0.4);
        const double ph = rng.uniform(0.0, 6.28);
        for (std::size_t t = 0; t < kLen; ++t) {
            s.samples.push_back(std::sin(f * static_cast<double>(t) + ph) + 0.1 * rng.normal());
        }
        out.push_back(std::move(s));
    }
    return out;
}

TrainConfig toy_config(std::uint64_t seed) {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 8;
    c.encoder = tiny_encoder_config();
    c.signal_length = kLen;
    c.seed = seed;
    c.adam.lr = 1e-3;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
public:
    TempDir() {
        const auto* ut = ::testing::UnitTest::GetInstance();
        path_ = fs::temp_directory_path() /
                ("nerula-train-" + std::to_string(ut->random_seed()) + "-" + ut->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

}  // namespace

TEST(Pretrain, SmokeFiniteLossesForSeveralSeeds) {
    const auto corpus = toy_corpus(64, 1);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const PretrainResult r = pretrain(corpus, toy_config(seed));
        ASSERT_EQ(r.log.epochs.size(), 2u);
        ASSERT_EQ(r.log.steps.size(), 16u);
        for (const auto& s : r.log.steps) {
            ASSERT_TRUE(std::isfinite(s.total));
            ASSERT_NEAR(s.total, s.nce + 10.0 * s.recon, 1e-12);
        }
        EXPECT_TRUE(r.params.all_finite());
        EXPECT_LT(r.log.epochs[1].total, r.log.epochs[0].total) << "seed " << seed;
        for (std::size_t i = 1; i < r.log.steps.size(); ++i) {
            ASSERT_GT(r.log.steps[i].step, r.log.steps[i - 1].step);
        }
    }
}

TEST(Pretrain, BitIdenticalForSameSeed) {
    const auto corpus = toy_corpus(32, 2);
    TempDir a, b;
    {
        TempDir* dirs[] = {&a, &b};
        for (TempDir* d : dirs) {
            PretrainOptions o;
            o.checkpoint_dir = d->path();
            const PretrainResult r = pretrain(corpus, toy_config(5), o);
            r.log.write_csv(d->path() / "losses.csv");
        }
    }
    EXPECT_EQ(slurp(a.path() / "final.nrck"), slurp(b.path() / "final.nrck"));
    EXPECT_EQ(slurp(a.path() / "losses.csv"), slurp(b.path() / "losses.csv"));
    const PretrainResult r1 = pretrain(corpus, toy_config(5));
    const PretrainResult r2 = pretrain(corpus, toy_config(6));
    EXPECT_NE(r1.log.epochs[0].rng_digest, r2.log.epochs[0].rng_digest);
}

TEST(Pretrain, ZeroWeightsLeaveParametersUnchanged) {
    const auto corpus = toy_corpus(16, 3);
    TrainConfig cfg = toy_config(7);
    cfg.weights.w_nce = 0.0;
    cfg.weights.w_recon = 0.0;
    const ModelParams before = init_params(cfg.encoder, RngStream(cfg.seed).split("init"));
    const PretrainResult r = pretrain(corpus, cfg);
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(before.at(i).value(), r.params.at(i).value()) << before.names()[i];
    }
}

TEST(Pretrain, RejectsBadInput) {
    TrainConfig cfg = toy_config(0);
    EXPECT_THROW(pretrain({}, cfg), std::invalid_argument);
    auto corpus = toy_corpus(4, 0);
    corpus[2].samples.pop_back();
    EXPECT_THROW(pretrain(corpus, cfg), std::invalid_argument);
    cfg.signal_length = 130;
    EXPECT_THROW(pretrain(toy_corpus(4, 0), cfg), std::invalid_argument);
}

TEST(Pretrain, PeriodicCheckpoints) {
    TempDir d;
    TrainConfig cfg = toy_config(1);
    cfg.checkpoint_every = 1;
    PretrainOptions o;
    o.checkpoint_dir = d.path();
    int calls = 0;
    o.on_epoch = [&](const EpochSummary&) { ++calls; };
    pretrain(toy_corpus(8, 4), cfg, o);
    EXPECT_EQ(calls, 2);
    EXPECT_TRUE(fs::exists(d.path() / "epoch-0001.nrck"));
    EXPECT_TRUE(fs::exists(d.path() / "epoch-0002.nrck"));
    EXPECT_EQ(slurp(d.path() / "epoch-0002.nrck"), slurp(d.path() / "final.nrck"));
}

TEST(Checkpoint, RoundTripPreservesParamsAndEmbeddings) {
    TempDir d;
    const TrainConfig cfg = toy_config(9);
    const PretrainResult r = pretrain(toy_corpus(16, 5), cfg);
    const fs::path p = d.path() / "model.nrck";
    save_checkpoint(r.params, cfg, p);
    const Checkpoint ck = load_checkpoint(p);
    ASSERT_EQ(ck.params.names(), r.params.names());
    EXPECT_EQ(ck.config.encoder, cfg.encoder);
    EXPECT_EQ(ck.config.seed, cfg.seed);
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        const Array& a = r.params.at(i).value();
        const Array& b = ck.params.at(i).value();
        for (std::size_t k = 0; k < a.size(); ++k) {
            ASSERT_LE(std::abs(a[k] - b[k]), 1e-6 * std::max(1.0, std::abs(a[k])));
        }
    }
    const fs::path p2 = d.path() / "again.nrck";
    save_checkpoint(ck.params, ck.config, p2);
    EXPECT_EQ(slurp(p), slurp(p2));

    const auto x = toy_corpus(1, 6)[0].samples;
    const auto e1 = embed(x, r.params, cfg.encoder);
    const auto e2 = embed(x, ck.params, ck.config.encoder);
    for (std::size_t i = 0; i < e1.size(); ++i) {
        EXPECT_NEAR(e1[i], e2[i], 1e-5 * std::max(1.0, std::abs(e1[i])));
    }
}

TEST(Checkpoint, CorruptionIsReportedWithPath) {
    TempDir d;
    const TrainConfig cfg = toy_config(0);
    const ModelParams params = init_params(cfg.encoder, RngStream(0));
    const fs::path good = d.path() / "good.nrck";
    save_checkpoint(params, cfg, good);
    const std::string bytes = slurp(good);

    const auto write = [&](const std::string& name, const std::string& content) {
        const fs::path p = d.path() / name;
        std::ofstream(p, std::ios::binary) << content;
        return p;
    };
    const auto expect_error = [](const fs::path& p, const std::string& fragment) {
        try {
            load_checkpoint(p);
            ADD_FAILURE() << "no error for " << p;
        } catch (const CheckpointError& e) {
            const std::string msg = e.what();
            EXPECT_NE(msg.find(p.string()), std::string::npos) << msg;
            EXPECT_NE(msg.find(fragment), std::string::npos) << msg;
        }
    };

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    expect_error(write("magic.nrck", bad_magic), "magic");

    std::string bad_version = bytes;
    bad_version[8] = 9;
    expect_error(write("version.nrck", bad_version), "version");

    expect_error(write("short.nrck", bytes.substr(0, 10)), "truncated");
    expect_error(write("blob.nrck", bytes.substr(0, bytes.size() - 4)), "truncated");
    expect_error(d.path() / "missing.nrck", "cannot open");

    // A checkpoint whose parameters do not fit the configured architecture.
    TrainConfig wider = cfg;
    wider.encoder.rep_dim = 12;
    save_checkpoint(params, wider, d.path() / "shape.nrck");
    expect_error(d.path() / "shape.nrck", "shape");
}

TEST(Ladder, RungConfigurations) {
    const TrainConfig base;
    const TrainConfig r1 = ladder_config(base, 1);
    EXPECT_EQ(r1.strategy.variant, PairVariant::byol_augment);
    EXPECT_FALSE(r1.encoder.latent_masking);
    EXPECT_EQ(r1.weights.w_recon, 0.0);
    const TrainConfig r2 = ladder_config(base, 2);
    EXPECT_EQ(r2.strategy.variant, PairVariant::nerula_mask);
    EXPECT_FALSE(r2.encoder.latent_masking);
    EXPECT_EQ(r2.weights.w_recon, 0.0);
    const TrainConfig r3 = ladder_config(base, 3);
    EXPECT_TRUE(r3.encoder.latent_masking);
    EXPECT_EQ(r3.weights.w_recon, 0.0);
    const TrainConfig r4 = ladder_config(base, 4);
    EXPECT_TRUE(r4.encoder.latent_masking);
    EXPECT_EQ(r4.weights.w_recon, 10.0);
    EXPECT_THROW(ladder_config(base, 0), std::invalid_argument);
    EXPECT_THROW(ladder_config(base, 5), std::invalid_argument);
    EXPECT_EQ(ladder_name(4), "+reconstruction");
}

TEST(TrainLogCsv, RoundTrip) {
    TempDir d;
    TrainLog log;
    log.steps.push_back({-0.5, 0.25, 2.0, 0});
    log.steps.push_back({-0.1234567890123, 1.0 / 3.0, 3.2098765432107, 1});
    log.write_csv(d.path() / "l.csv");
    const auto rows = read_loss_csv(d.path() / "l.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].nce, log.steps[1].nce);
    EXPECT_EQ(rows[1].recon, log.steps[1].recon);
    EXPECT_EQ(rows[1].step, 1);
    std::ofstream(d.path() / "bad.csv") << "step,nce,recon,total\n1;2;3;4\n";
    EXPECT_THROW(read_loss_csv(d.path() / "bad.csv"), std::runtime_error);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.adam.lr = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.signal_length = 3001;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
