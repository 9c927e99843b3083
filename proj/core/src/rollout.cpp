// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/rollout.hpp"

#include "splatover/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace splatover {

void
RolloutConfig::validate() const {
    if (max_steps < 1 || !(grasp_threshold > 0.0 && grasp_threshold < 1.0) || !(pos_tol > 0.0) ||
        !(rot_tol > 0.0) || collision_distance < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "invalid rollout configuration");
    }
}

PolicyOutput
NetworkController::act(const PolicyInput &observation, int) {
    return forward(mParams, observation);
}

PolicyOutput
ReplayController::act(const PolicyInput &, int step) {
    PolicyOutput out;
    if (step >= mTrigger) {
        out.grasp_logit = 40.0;
        out.grasp_prob = 1.0;
        return out;
    }
    if (step >= 0 && static_cast<std::size_t>(step) < mActions.size()) {
        out.delta_t = mActions[static_cast<std::size_t>(step)].translation;
        out.delta_r = mActions[static_cast<std::size_t>(step)].rotation;
    }
    out.grasp_logit = -40.0;
    out.grasp_prob = 0.0;
    return out;
}

std::unique_ptr<Controller>
make_replay_controller(const DemoEpisode &episode) {
    std::vector<DeltaAction> actions;
    for (const auto &s : episode.steps) {
        actions.push_back(s.action);
    }
    const int trigger = static_cast<int>(episode.steps.size()) - 1;
    return std::make_unique<ReplayController>(std::move(actions), trigger);
}

PolicyInput
observe(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &pose, const RenderSettings &settings,
        double mask_threshold) {
    const RenderOutput out = render(scene, cam, pose, settings);
    const BinaryMasks masks = binarize_masks(out, mask_threshold);
    return make_policy_input(to_8bit(out.rgb), masks.object, masks.hand);
}

StepResult
step(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &pose, Controller &controller,
     int step_index, const RolloutConfig &cfg) {
    const PolicyInput obs = observe(scene, cam, pose, cfg.render, cfg.mask_threshold);
    StepResult r;
    r.output = controller.act(obs, step_index);
    r.next_pose = apply_action(pose, r.output.action());
    return r;
}

RolloutResult
run_episode(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &start, Controller &controller,
            const Pose &reference, const LabeledPointCloud &hand, const RolloutConfig &cfg) {
    cfg.validate();
    RolloutResult res;
    Pose pose = start;
    res.trajectory.push_back(pose);
    for (int k = 0; k < cfg.max_steps; ++k) {
        const StepResult s = step(scene, cam, pose, controller, k, cfg);
        res.steps_taken = k + 1;
        if (s.output.grasp_prob >= cfg.grasp_threshold) {
            res.declared = true;
            break;
        }
        pose = s.next_pose;
        res.trajectory.push_back(pose);
        const bool hit = std::any_of(hand.points.begin(), hand.points.end(), [&](const Vec3 &p) {
            return (p - pose.translation).norm() < cfg.collision_distance;
        });
        if (hit) {
            res.hand_collision = true;
            break;
        }
    }
    res.final_pos_err = translation_error(pose, reference);
    res.final_rot_err = rotation_error(pose, reference);
    res.success = res.declared && res.final_pos_err <= cfg.pos_tol &&
                  res.final_rot_err <= cfg.rot_tol;
    return res;
}

namespace {

double
median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

EvalReport
evaluate(const GaussianScene &scene, const CameraIntrinsics &cam, const std::vector<EvalCase> &cases,
         const ControllerFactory &make_controller, const LabeledPointCloud &hand, const RolloutConfig &cfg) {
    if (cases.empty()) {
        throw Error(ErrorCode::InvalidArgument, "evaluation needs at least one case");
    }
    EvalReport rep;
    rep.cases = cases;
    std::vector<double> pos, rot;
    double successes = 0, declared = 0, collisions = 0, steps = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto controller = make_controller(cases[i], i);
        RolloutResult r = run_episode(scene, cam, cases[i].start, *controller, cases[i].reference, hand, cfg);
        successes += r.success;
        declared += r.declared;
        collisions += r.hand_collision;
        steps += r.steps_taken;
        pos.push_back(r.final_pos_err);
        rot.push_back(r.final_rot_err);
        rep.results.push_back(std::move(r));
    }
    const auto n = static_cast<double>(cases.size());
    rep.success_rate = successes / n;
    rep.declaration_rate = declared / n;
    rep.collision_rate = collisions / n;
    rep.mean_steps = steps / n;
    double ps = 0, rs = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        ps += pos[i];
        rs += rot[i];
    }
    rep.mean_pos_err = ps / n;
    rep.mean_rot_err = rs / n;
    rep.median_pos_err = median(pos);
    rep.median_rot_err = median(rot);
    return rep;
}

void
write_eval_report(const EvalReport &report, const std::filesystem::path &path) {
    using nlohmann::json;
    auto pose_json = [](const Pose &p) {
        const auto a = p.to_array();
        return json(std::vector<double>(a.begin(), a.end()));
    };
    json episodes = json::array();
    for (std::size_t i = 0; i < report.results.size(); ++i) {
        const RolloutResult &r = report.results[i];
        json traj = json::array();
        for (const Pose &p : r.trajectory) {
            traj.push_back(pose_json(p));
        }
        episodes.push_back({{"index", i},
                            {"grasp_index", report.cases[i].grasp_index},
                            {"start", pose_json(report.cases[i].start)},
                            {"reference", pose_json(report.cases[i].reference)},
                            {"declared", r.declared},
                            {"success", r.success},
                            {"hand_collision", r.hand_collision},
                            {"steps_taken", r.steps_taken},
                            {"final_pos_err", r.final_pos_err},
                            {"final_rot_err", r.final_rot_err},
                            {"trajectory", traj}});
    }
    const json doc = {{"schema_version", 1},
                      {"summary",
                       {{"episodes", report.results.size()},
                        {"success_rate", report.success_rate},
                        {"declaration_rate", report.declaration_rate},
                        {"collision_rate", report.collision_rate},
                        {"mean_pos_err", report.mean_pos_err},
                        {"median_pos_err", report.median_pos_err},
                        {"mean_rot_err", report.mean_rot_err},
                        {"median_rot_err", report.median_rot_err},
                        {"mean_steps", report.mean_steps}}},
                      {"episodes", episodes}};
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

Image8
trajectory_strip(const GaussianScene &scene, const CameraIntrinsics &cam, const std::vector<Pose> &trajectory,
                 int n_frames, const RenderSettings &settings) {
    if (trajectory.empty() || n_frames < 1) {
        throw Error(ErrorCode::InvalidArgument, "strip needs a non-empty trajectory and n_frames >= 1");
    }
    Image8 strip(cam.width * n_frames, cam.height, 3);
    const std::size_t last = trajectory.size() - 1;
    for (int f = 0; f < n_frames; ++f) {
        const std::size_t idx =
            n_frames == 1 ? 0
                          : static_cast<std::size_t>(std::lround(static_cast<double>(f) * static_cast<double>(last) /
                                                                 static_cast<double>(n_frames - 1)));
        const Image8 frame = to_8bit(render(scene, cam, trajectory[idx], settings).rgb);
        for (int y = 0; y < cam.height; ++y) {
            std::copy_n(&frame.at(0, y), 3 * cam.width, &strip.at(f * cam.width, y));
        }
    }
    return strip;
}

void
render_trajectory_strip(const GaussianScene &scene, const CameraIntrinsics &cam, const std::vector<Pose> &trajectory,
                        int n_frames, const std::filesystem::path &path, const RenderSettings &settings) {
    write_png(path, trajectory_strip(scene, cam, trajectory, n_frames, settings));
}

} // namespace splatover
