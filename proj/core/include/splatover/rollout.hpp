// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"
#include "splatover/policy.hpp"
#include "splatover/render.hpp"
#include "splatover/scene.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace splatover {

struct RolloutConfig {
    int max_steps = 60;
    double grasp_threshold = 0.9;
    double pos_tol = 0.02;
    double rot_tol = 0.175;
    double collision_distance = 0.01;
    double mask_threshold = 0.5;
    RenderSettings render;

    void validate() const;
};

/// Anything that maps an observation to an action. `step` counts from 0 within an episode.
class Controller {
  public:
    virtual ~Controller() = default;
    virtual PolicyOutput act(const PolicyInput &observation, int step) = 0;
};

class NetworkController final : public Controller {
  public:
    explicit NetworkController(const PolicyParams &params) : mParams(params) {}
    PolicyOutput act(const PolicyInput &observation, int step) override;

  private:
    const PolicyParams &mParams;
};

/// Emits recorded actions by step index and triggers the grasp at `trigger_step`.
class ReplayController final : public Controller {
  public:
    ReplayController(std::vector<DeltaAction> actions, int trigger_step)
        : mActions(std::move(actions)), mTrigger(trigger_step) {}
    PolicyOutput act(const PolicyInput &observation, int step) override;

  private:
    std::vector<DeltaAction> mActions;
    int mTrigger;
};

/// Fixed output regardless of observation.
class ConstantController final : public Controller {
  public:
    explicit ConstantController(PolicyOutput output = {}) : mOutput(output) {}
    PolicyOutput act(const PolicyInput &, int) override { return mOutput; }

  private:
    PolicyOutput mOutput;
};

/// Replays every step of a demonstration, grasping at its last step.
std::unique_ptr<Controller> make_replay_controller(const DemoEpisode &episode);

/// 8-bit RGB plus binarized masks, exactly as stored in datasets.
PolicyInput observe(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &pose,
                    const RenderSettings &settings, double mask_threshold);

struct StepResult {
    PolicyOutput output;
    Pose next_pose;
};

/// Render, predict, and move in the current gripper frame: next = compose(pose, exp(delta)).
StepResult step(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &pose, Controller &controller,
                int step_index, const RolloutConfig &cfg);

struct RolloutResult {
    bool declared = false;
    bool success = false;
    int steps_taken = 0;
    double final_pos_err = 0.0;
    double final_rot_err = 0.0;
    bool hand_collision = false;
    std::vector<Pose> trajectory;
};

RolloutResult run_episode(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &start,
                          Controller &controller, const Pose &reference, const LabeledPointCloud &hand,
                          const RolloutConfig &cfg);

struct EvalCase {
    std::size_t grasp_index = 0;
    Pose start;
    Pose reference; ///< pre-grasp pose
};

using ControllerFactory = std::function<std::unique_ptr<Controller>(const EvalCase &, std::size_t case_index)>;

struct EvalReport {
    std::vector<EvalCase> cases;
    std::vector<RolloutResult> results;
    double success_rate = 0.0;
    double declaration_rate = 0.0;
    double collision_rate = 0.0;
    double mean_pos_err = 0.0;
    double median_pos_err = 0.0;
    double mean_rot_err = 0.0;
    double median_rot_err = 0.0;
    double mean_steps = 0.0;
};

/// Runs every case in order. Throws InvalidArgument when `cases` is empty.
EvalReport evaluate(const GaussianScene &scene, const CameraIntrinsics &cam, const std::vector<EvalCase> &cases,
                    const ControllerFactory &make_controller, const LabeledPointCloud &hand,
                    const RolloutConfig &cfg);

/// JSON document with a summary block and one row per episode.
void write_eval_report(const EvalReport &report, const std::filesystem::path &path);

/// n_frames poses picked uniformly by index, rendered and tiled left to right.
Image8 trajectory_strip(const GaussianScene &scene, const CameraIntrinsics &cam, const std::vector<Pose> &trajectory,
                        int n_frames, const RenderSettings &settings = {});
void render_trajectory_strip(const GaussianScene &scene, const CameraIntrinsics &cam,
                             const std::vector<Pose> &trajectory, int n_frames, const std::filesystem::path &path,
                             const RenderSettings &settings = {});

} // namespace splatover
