// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "pipeline/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>

int
main(int argc, char **argv) {
    namespace pl = splatover::pipeline;

    if (const char *level = std::getenv("SPLATOVER_LOG")) {
        spdlog::set_level(spdlog::level::from_str(level));
    } else {
        spdlog::set_level(spdlog::level::warn);
    }

    CLI::App app{"splatover: hand-eye reaching demos from Gaussian splat scenes"};
    app.require_subcommand(1);
    pl::Options opt;
    const char *commands[][2] = {
        {"build-scene", "build or load the labeled scene; writes scene.ply + scene.labels"},
        {"sample-grasps", "antipodal grasps filtered against the hand; writes grasps.tsv"},
        {"gen-demos", "render three-phase demonstrations; writes dataset/"},
        {"train", "fit the policy on dataset/; writes policy.bin + train_log.tsv"},
        {"eval", "closed-loop rollouts; writes eval.json (and strips/ with --strips)"},
    };
    for (const auto &[name, help] : commands) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "global seed");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", opt.out, "output directory");
        sub->add_flag("--strips", opt.strips, "write trajectory strips (eval)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pl::kExitUsage;
    }
    return pl::run_command(app.get_subcommands().front()->get_name(), opt);
}
