#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* cli() { return NERULA_CLI_PATH; }

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "nerula-cli-test.log";
    const std::string cmd = std::string(cli()) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    o.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small corpus and the tiny encoder so every command finishes in seconds.
fs::path tiny_config(const fs::path& dir) {
    const fs::path p = dir / "tiny.json";
    std::ofstream(p) << R"({
  "corpus": {"duration_s": 3.2, "fs_hz": 40, "pretrain_count": 16, "probe_per_class": 6},
  "train": {"epochs": 1, "batch_size": 8, "signal_length": 128,
            "encoder": {"stem": [{"channels": 4, "kernel": 3, "stride": 2}, {"channels": 8, "kernel": 3, "stride": 2}],
                        "blocks": 1, "dim": 8, "window": 5, "rep_dim": 8, "decoder_blocks": 1}}
})";
    return p;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("nerula-cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ProbeWithoutCheckpointIsUsageError) {
    const Outcome o = run("probe");
    EXPECT_EQ(o.code, 2);
    EXPECT_NE(o.output.find("--checkpoint"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandAndFlag) {
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("pretrain --no-such-flag").code, 2);
    EXPECT_EQ(run("pretrain --ladder-rung 7").code, 2);
}

TEST_F(CliTest, BadConfigIsOneLineError) {
    const fs::path cfg = dir_ / "bad.json";
    std::ofstream(cfg) << R"({"train": {"epochz": 1}})";
    const Outcome o = run("pretrain --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.output.find("epochz"), std::string::npos);
}

TEST_F(CliTest, FdCheckWritesRunRecord) {
    const Outcome o = run("fd-check --seeds 1 --out " + dir_.string());
    ASSERT_EQ(o.code, 0) << o.output;
    const auto rec = nlohmann::json::parse(slurp(dir_ / "run.json"));
    EXPECT_EQ(rec.at("command"), "fd-check");
    EXPECT_TRUE(rec.contains("config"));
    EXPECT_TRUE(rec.at("seeds").contains("root"));
    EXPECT_TRUE(rec.at("versions").contains("nerula"));
    EXPECT_TRUE(fs::exists(dir_ / "metrics.csv"));
}

TEST_F(CliTest, PretrainIsReproducible) {
    const fs::path cfg = tiny_config(dir_);
    for (const char* name : {"a", "b"}) {
        const Outcome o = run("pretrain --config " + cfg.string() + " --seed 3 --out " + (dir_ / name).string());
        ASSERT_EQ(o.code, 0) << o.output;
    }
    EXPECT_EQ(slurp(dir_ / "a" / "final.nrck"), slurp(dir_ / "b" / "final.nrck"));
    EXPECT_EQ(slurp(dir_ / "a" / "losses.csv"), slurp(dir_ / "b" / "losses.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "a" / "loss_curve.svg"));

    const std::string ck = (dir_ / "a" / "final.nrck").string();
    Outcome o = run("probe --config " + cfg.string() + " --checkpoint " + ck + " --out " + (dir_ / "p").string());
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir_ / "p" / "metrics.csv"));
    o = run("embed --config " + cfg.string() + " --checkpoint " + ck + " --out " + (dir_ / "e").string());
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir_ / "e" / "embeddings.csv"));
    o = run("recon-demo --config " + cfg.string() + " --checkpoint " + ck + " --out " + (dir_ / "r").string());
    ASSERT_EQ(o.code, 0) << o.output;
    EXPECT_TRUE(fs::exists(dir_ / "r" / "recon_overlay.svg"));
}

TEST_F(CliTest, AblateWritesFourRungReport) {
    const fs::path cfg = tiny_config(dir_);
    const Outcome o = run("ablate --config " + cfg.string() + " --out " + dir_.string());
    ASSERT_EQ(o.code, 0) << o.output;
    std::ifstream csv(dir_ / "ablation.csv");
    std::string line;
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 5);
    EXPECT_TRUE(fs::exists(dir_ / "loss_curves.svg"));
}
