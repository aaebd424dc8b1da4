#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uat/cli/commands.hpp"

using namespace uat::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("uat_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

const std::vector<std::string> kTiny{"--count", "100", "--batch-size", "50", "--widths", "4", "--mult-widths", "4"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
    args.insert(args.end(), kTiny.begin(), kTiny.end());
    return args;
}

nlohmann::json read_json(const std::string& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_F(Cli, HelpListsSubcommands) {
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.code, kOk);
    for (const char* s : {"gen-data", "train", "eval", "sweep", "grad-check"}) {
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    }
}

TEST_F(Cli, MissingRequiredFlagIsConfigError) {
    const auto r = invoke({"gen-data", "--family", "rician"});
    EXPECT_EQ(r.code, kConfigError);
    EXPECT_NE(r.err.find("--count"), std::string::npos);
}

TEST_F(Cli, UnknownFamilyIsConfigError) {
    EXPECT_EQ(invoke({"gen-data", "--family", "nakagami", "--count", "5", "--out", path("x.uatds")}).code,
              kConfigError);
}

TEST_F(Cli, GenDataWritesLoadableFile) {
    EXPECT_EQ(invoke({"gen-data", "--family", "rician", "--kappa-db", "10", "--count", "100", "--out", path("r.uatds")})
                  .code,
              kOk);
    EXPECT_TRUE(fs::exists(path("r.uatds")));
    EXPECT_EQ(invoke(with_tiny({"train", "--epochs", "1", "--data", path("r.uatds"), "--out", path("run")})).code,
              kOk);
}

TEST_F(Cli, UnreadableDataIsIoError) {
    EXPECT_EQ(invoke(with_tiny({"train", "--epochs", "1", "--data", path("missing.uatds"), "--out", path("run")})).code,
              kIoError);
}

TEST_F(Cli, TrainWritesRunDirectory) {
    ASSERT_EQ(invoke(with_tiny({"train", "--epochs", "2", "--seed", "9", "--out", path("run")})).code, kOk);
    for (const char* f : {"config.json", "run.json", "log.jsonl", "model.ckpt"}) {
        EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
    }
    const auto run = read_json(path("run/run.json"));
    EXPECT_EQ(run["seed"], 9);
    EXPECT_EQ(run["command"], "train");
    EXPECT_FALSE(run["version"].get<std::string>().empty());
}

TEST_F(Cli, FlagsOverrideConfigFileOverridesDefaults) {
    {
        std::ofstream f(path("c.json"));
        f << R"({"train": {"epochs": 2, "seed": 4}})";
    }
    ASSERT_EQ(invoke(with_tiny({"train", "--config", path("c.json"), "--out", path("a")})).code, kOk);
    ASSERT_EQ(invoke(with_tiny({"train", "--config", path("c.json"), "--epochs", "1", "--out", path("b")})).code, kOk);
    const auto a = read_json(path("a/config.json"));
    const auto b = read_json(path("b/config.json"));
    EXPECT_EQ(a["train"]["epochs"], 2);
    EXPECT_EQ(a["train"]["seed"], 4);
    EXPECT_EQ(b["train"]["epochs"], 1);
    EXPECT_EQ(b["train"]["seed"], 4);
    EXPECT_EQ(a["train"]["batch_size"], 50);  // flag
    EXPECT_EQ(a["policy"]["arch"], "edge_gnn");  // default
}

TEST_F(Cli, UnknownConfigKeyIsConfigError) {
    {
        std::ofstream f(path("c.json"));
        f << R"({"trian": {}})";
    }
    EXPECT_EQ(invoke(with_tiny({"train", "--config", path("c.json"), "--out", path("a")})).code, kConfigError);
}

TEST_F(Cli, DivergentTrainingIsNonFinite) {
    EXPECT_EQ(invoke(with_tiny({"train", "--epochs", "2", "--lr-policy", "1e300", "--out", path("a")})).code,
              kNonFinite);
}

TEST_F(Cli, SweepMissingCheckpoint) {
    ASSERT_EQ(invoke(with_tiny({"train", "--epochs", "1", "--out", path("run")})).code, kOk);
    const std::vector<std::string> base{"sweep",        "--preset",   "sparse",      "--n-test", "20",
                                        "--checkpoint", path("run/model.ckpt"), "--checkpoint", path("nope.ckpt")};
    auto loose = base;
    loose.insert(loose.end(), {"--out", path("rep")});
    EXPECT_EQ(invoke(loose).code, kOk);
    std::ifstream md(path("rep/sweep.md"));
    const std::string text((std::istreambuf_iterator<char>(md)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("nope.ckpt"), std::string::npos);
    auto strict = base;
    strict.insert(strict.end(), {"--out", path("rep2"), "--strict"});
    EXPECT_EQ(invoke(strict).code, kMissingCheckpoint);
}

TEST_F(Cli, SweepWithoutMethodsIsConfigError) {
    EXPECT_EQ(invoke({"sweep", "--preset", "rician", "--out", path("rep")}).code, kConfigError);
}

TEST_F(Cli, GradCheckFiltersOps) {
    const auto r = invoke({"grad-check", "--ops", "log2", "--instances", "10"});
    EXPECT_EQ(r.code, kOk);
    EXPECT_NE(r.out.find("log2"), std::string::npos);
    EXPECT_EQ(r.out.find("tanh"), std::string::npos);
    EXPECT_EQ(invoke({"grad-check", "--ops", "nope"}).code, kConfigError);
}
