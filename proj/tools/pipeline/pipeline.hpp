// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/demo.hpp"
#include "splatover/grasp.hpp"
#include "splatover/policy.hpp"
#include "splatover/render.hpp"
#include "splatover/rollout.hpp"
#include "splatover/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace splatover::pipeline {

inline constexpr int kConfigSchemaVersion = 1;

struct SceneConfig {
    std::optional<std::filesystem::path> ply;    ///< load instead of synthesizing
    std::optional<std::filesystem::path> labels;
    SyntheticSceneSpec synthetic;
};

struct GraspConfig {
    int n_samples = 500;
    double mu = 0.4;
    double opacity_min = 0.5;
    int normal_k = 12;
    Pose offset;             ///< maps grasp-sampler frame to scene frame
    double standoff = 0.10;
    int max_grasps = 2;      ///< grasps used for demonstrations
};

struct EvalConfig {
    std::string controller = "policy"; ///< policy | replay | zero
    int n_starts_per_grasp = 10;
    int strip_frames = 8;
    int strip_scale = 2;               ///< strips render at this multiple of the training resolution
};

struct PipelineConfig {
    SceneConfig scene;
    CameraIntrinsics camera;
    RenderSettings render;
    GripperModel gripper;
    GraspConfig grasp;
    StartSamplerConfig sampler;
    TrajectoryConfig trajectory;
    PolicyArchitecture policy;
    TrainConfig train;
    LossWeights loss;
    RolloutConfig rollout;
    EvalConfig eval;
};

/// Schema-checked parse; unknown keys and type errors throw ConfigError.
PipelineConfig parse_config(const std::string &text, const std::string &origin = "<config>");
PipelineConfig load_config(const std::filesystem::path &path);

enum class Stage : std::uint64_t { Scene = 1, Grasps, Demos, Train, Eval };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

struct SceneBundle {
    GaussianScene scene;
    LabeledPointCloud object; ///< with normals
    LabeledPointCloud hand;
    Vec3 object_centroid = Vec3::Zero();
};

GaussianScene build_scene(const PipelineConfig &cfg, std::uint64_t seed);
SceneBundle prepare_scene(GaussianScene scene, const PipelineConfig &cfg);

struct GraspResult {
    std::vector<Grasp> candidates; ///< in scene frame, before filtering
    std::vector<Grasp> safe;
};
GraspResult sample_grasps(const SceneBundle &bundle, const PipelineConfig &cfg, std::uint64_t seed);

struct DemoPlan {
    std::size_t grasp_index = 0;
    std::vector<Pose> starts;
};

/// Walks grasps in diversity order, skipping those whose start sampling is exhausted, until
/// max_grasps plans exist. `n_starts` overrides the sampler's count.
std::vector<DemoPlan> plan_demos(const SceneBundle &bundle, const std::vector<Grasp> &grasps,
                                 const PipelineConfig &cfg, std::uint64_t seed, int n_starts);

/// Renders every planned start, dropping and counting episodes that fail acceptance.
Dataset generate_demos(const SceneBundle &bundle, const std::vector<Grasp> &grasps,
                       const std::vector<DemoPlan> &plans, const PipelineConfig &cfg);

/// Start poses for evaluation: the grasps chosen for demonstrations, fresh starts from `eval_seed`.
std::vector<EvalCase> fresh_eval_cases(const SceneBundle &bundle, const std::vector<Grasp> &grasps,
                                       const PipelineConfig &cfg, std::uint64_t demo_seed,
                                       std::uint64_t eval_seed);

/// Replays each recorded episode from its own start.
std::vector<EvalCase> replay_eval_cases(const Dataset &dataset, const std::vector<Grasp> &grasps);

struct Options {
    std::filesystem::path config;
    std::uint64_t seed = 0;
    int threads = 1;
    std::filesystem::path out = "out";
    bool strips = false;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitNoResult = 3;

int cmd_build_scene(const PipelineConfig &cfg, const Options &opt);
int cmd_sample_grasps(const PipelineConfig &cfg, const Options &opt);
int cmd_gen_demos(const PipelineConfig &cfg, const Options &opt);
int cmd_train(const PipelineConfig &cfg, const Options &opt);
int cmd_eval(const PipelineConfig &cfg, const Options &opt);

/// Dispatches a subcommand name; maps exceptions to exit codes.
int run_command(const std::string &command, const Options &opt);

} // namespace splatover::pipeline
