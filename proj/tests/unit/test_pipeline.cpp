// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "pipeline/pipeline.hpp"
#include "splatover/error.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace splatover;
using namespace splatover::test;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = SPLATOVER_CLI;
const fs::path kConfigs = SPLATOVER_TEST_CONFIGS;

int
run_cli(const std::string &args) {
    const std::string cmd = kCli.string() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string
slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// tiny.json with `patch` merged on top.
fs::path
tiny_config(const TempDir &dir, const std::string &patch = "{}") {
    auto cfg = nlohmann::json::parse(slurp(kConfigs / "tiny.json"));
    cfg.merge_patch(nlohmann::json::parse(patch));
    const fs::path path = dir.path() / "config.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
}

ErrorCode
config_error_code(const std::string &text) {
    try {
        pipeline::parse_config(text);
    } catch (const Error &e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto cfg = pipeline::parse_config(R"({"schema_version": 1,
        "camera": {"width": 64, "height": 32, "fx": 50, "fy": 50, "cx": 31.5, "cy": 15.5},
        "sampler": {"elevation_min_deg": 20},
        "scene": {"synthetic": {"hand": null}}})");
    EXPECT_EQ(cfg.policy.width, 64);
    EXPECT_EQ(cfg.policy.height, 32);
    EXPECT_NEAR(cfg.sampler.elevation_min, 20.0 * kDeg, 1e-15);
    EXPECT_FALSE(cfg.scene.synthetic.hand.has_value());
    EXPECT_EQ(cfg.train.epochs, 200);
    EXPECT_EQ(cfg.eval.controller, "policy");
}

TEST(Config, Rejections) {
    EXPECT_EQ(config_error_code(R"({"schema_version": 1, "trian": {}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error_code(R"({"schema_version": 1, "train": {"epochs": "ten"}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error_code(R"({"schema_version": 1, "train": {"epochs": 1.5}})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error_code(R"({"schema_version": 2})"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error_code(R"({"schema_version": 1,)"), ErrorCode::ConfigError);
    EXPECT_EQ(config_error_code(R"({"schema_version": 1, "eval": {"controller": "oracle"}})"),
              ErrorCode::ConfigError);
    try {
        pipeline::parse_config(R"({"schema_version": 1, "render": {"alpha_cap": 0.9, "gamma": 2}})");
        FAIL();
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos) << e.what();
    }
}

TEST(Cli, BuildSceneIsDeterministic) {
    TempDir dir("cli");
    const fs::path cfg = tiny_config(dir);
    const std::string base = "build-scene --config " + cfg.string() + " --seed 5 --out ";
    ASSERT_EQ(run_cli(base + (dir.path() / "a").string()), 0);
    ASSERT_EQ(run_cli(base + (dir.path() / "b").string() + " --threads 2"), 0);
    EXPECT_EQ(slurp(dir.path() / "a" / "scene.ply"), slurp(dir.path() / "b" / "scene.ply"));
    EXPECT_EQ(slurp(dir.path() / "a" / "scene.labels"), slurp(dir.path() / "b" / "scene.labels"));
    ASSERT_EQ(run_cli("sample-grasps --config " + cfg.string() + " --seed 5 --out " + (dir.path() / "a").string()),
              0);
    ASSERT_EQ(run_cli("sample-grasps --config " + cfg.string() + " --seed 5 --threads 3 --out " +
                      (dir.path() / "b").string()),
              0);
    EXPECT_EQ(slurp(dir.path() / "a" / "grasps.tsv"), slurp(dir.path() / "b" / "grasps.tsv"));
}

TEST(Cli, UsageErrors) {
    TempDir dir("cli");
    EXPECT_EQ(run_cli("build-scene --config " + (dir.path() / "missing.json").string()), 1);
    EXPECT_EQ(run_cli("launch --config x"), 1);
    const fs::path bad = tiny_config(dir, R"({"scene": {"synthetic": {"density": 0}}})");
    EXPECT_EQ(run_cli("build-scene --config " + bad.string() + " --out " + (dir.path() / "o").string()), 1);
    // Later stages without their inputs are runtime failures.
    const fs::path cfg = tiny_config(dir);
    EXPECT_EQ(run_cli("train --config " + cfg.string() + " --out " + (dir.path() / "empty").string()), 2);
}

TEST(Cli, EnclosingHandLeavesNoSafeGrasp) {
    TempDir dir("cli");
    const fs::path cfg = tiny_config(dir, R"({"scene": {"synthetic": {"hand": {"grip": "enclose"}}}})");
    const std::string out = " --out " + (dir.path() / "o").string();
    ASSERT_EQ(run_cli("build-scene --config " + cfg.string() + out), 0);
    EXPECT_EQ(run_cli("sample-grasps --config " + cfg.string() + out), 3);
    EXPECT_EQ(run_cli("gen-demos --config " + cfg.string() + out), 3);
}

TEST(Cli, EndToEndWithReplay) {
    TempDir dir("cli");
    const fs::path cfg = tiny_config(dir, R"({"grasp": {"max_grasps": 2}, "sampler": {"n_starts": 5},
                                               "rollout": {"max_steps": 400}, "eval": {"controller": "replay"}})");
    const fs::path o = dir.path() / "o";
    const std::string args = " --config " + cfg.string() + " --seed 3 --out " + o.string();
    for (const char *cmd : {"build-scene", "sample-grasps", "gen-demos", "train"}) {
        ASSERT_EQ(run_cli(cmd + args), 0) << cmd;
    }
    const Dataset ds = read_dataset(o / "dataset");
    EXPECT_GE(ds.episodes.size(), 1u);
    EXPECT_LE(ds.episodes.size(), 10u);
    EXPECT_TRUE(fs::exists(o / "policy.bin"));
    EXPECT_EQ(load_params(o / "policy.bin").arch.width, 48);

    ASSERT_EQ(run_cli("eval" + args + " --strips"), 0);
    const auto report = nlohmann::json::parse(slurp(o / "eval.json"));
    EXPECT_EQ(report["summary"]["episodes"], ds.episodes.size());
    EXPECT_EQ(report["summary"]["success_rate"], 1.0);
    EXPECT_TRUE(fs::exists(o / "strips" / "ep_000.png"));
    EXPECT_EQ(read_png(o / "strips" / "ep_000.png").width, 3 * 48);

    std::ifstream log(o / "train_log.tsv");
    std::string header;
    std::getline(log, header);
    EXPECT_EQ(header.substr(0, 5), "epoch");
}
