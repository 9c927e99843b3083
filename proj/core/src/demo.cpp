// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/demo.hpp"

#include "splatover/error.hpp"
#include "splatover/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splatover {

void
StartSamplerConfig::validate() const {
    if (!(r_min > 0.0 && r_min < r_max)) {
        throw Error(ErrorCode::InvalidArgument, "sampler needs 0 < r_min < r_max");
    }
    if (!(elevation_min <= elevation_max) || !(azimuth_min <= azimuth_max)) {
        throw Error(ErrorCode::InvalidArgument, "sampler angle ranges are inverted");
    }
    if (n_starts < 1) {
        throw Error(ErrorCode::InvalidArgument, "n_starts must be >= 1");
    }
    if (!(min_hand_distance >= 0.0 && max_tilt_from_approach > 0.0 && occlusion_radius >= 0.0 &&
          orientation_jitter >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sampler filter thresholds must be non-negative");
    }
}

void
TrajectoryConfig::validate() const {
    if (k1 < 1 || k3 < 1 || !(k2_step > 0.0) || !(d_switch > 0.0) || !(center_tolerance > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "trajectory parameters must be positive");
    }
}

namespace {

double
segment_point_distance(const Vec3 &a, const Vec3 &b, const Vec3 &p) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

} // namespace

Vec3
object_centroid(const GaussianScene &scene) {
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    for (const Gaussian &g : scene.gaussians) {
        if (g.label == Label::Object) {
            sum += g.mean;
            ++n;
        }
    }
    if (n == 0) {
        throw Error(ErrorCode::EmptySelection, "scene has no Object Gaussians");
    }
    return sum / static_cast<double>(n);
}

namespace {

Vec3
random_unit_vector(Rng &rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double rho = std::sqrt(1.0 - z * z);
    return {rho * std::cos(th), rho * std::sin(th), z};
}

} // namespace

std::vector<Pose>
sample_start_poses(const Grasp &grasp, const GaussianScene &scene, const LabeledPointCloud &hand,
                   const StartSamplerConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    if (hand.points.empty()) {
        throw Error(ErrorCode::EmptyHandCloud, "start sampling needs the hand cloud");
    }
    const Vec3 up = scene.up_axis.normalized();
    Vec3 e1 = Vec3::UnitX() - Vec3::UnitX().dot(up) * up;
    if (e1.norm() < 1e-6) {
        e1 = Vec3::UnitY() - Vec3::UnitY().dot(up) * up;
    }
    e1.normalize();
    const Vec3 e2 = up.cross(e1);
    const Vec3 origin = grasp.pose.translation;
    const Vec3 approach = grasp.pose.axis(2);
    const Vec3 centroid = object_centroid(scene);

    const double r3_min = std::pow(cfg.r_min, 3.0), r3_max = std::pow(cfg.r_max, 3.0);
    const double s_min = std::sin(cfg.elevation_min), s_max = std::sin(cfg.elevation_max);
    const double cos_tilt = std::cos(cfg.max_tilt_from_approach);

    Rng rng(seed, 0x57a47);
    std::vector<Pose> accepted;
    const long max_trials = 100L * cfg.n_starts;
    long trials = 0;
    while (static_cast<int>(accepted.size()) < cfg.n_starts && trials < max_trials) {
        ++trials;
        const double r = std::cbrt(rng.uniform(r3_min, r3_max));
        const double elevation = std::asin(rng.uniform(s_min, s_max));
        const double azimuth = rng.uniform(cfg.azimuth_min, cfg.azimuth_max);
        // Always consume the jitter draws so acceptance does not shift the stream.
        const Vec3 jitter_axis = random_unit_vector(rng);
        const double jitter_angle = rng.uniform(0.0, cfg.orientation_jitter);

        const Vec3 dir = std::cos(elevation) * (std::cos(azimuth) * e1 + std::sin(azimuth) * e2) +
                         std::sin(elevation) * up;
        const Vec3 position = origin + r * dir;

        if (scene.table_height && position.dot(up) < *scene.table_height) {
            continue;
        }
        const bool near_hand = std::any_of(hand.points.begin(), hand.points.end(), [&](const Vec3 &p) {
            return (p - position).norm() < cfg.min_hand_distance;
        });
        if (near_hand) {
            continue;
        }
        if ((origin - position).normalized().dot(approach) < cos_tilt) {
            continue;
        }
        const bool occluded = std::any_of(hand.points.begin(), hand.points.end(), [&](const Vec3 &p) {
            return segment_point_distance(position, origin, p) < cfg.occlusion_radius;
        });
        if (occluded) {
            continue;
        }
        Quat q;
        try {
            q = look_at(position, centroid, up);
        } catch (const Error &) {
            continue;
        }
        if (cfg.orientation_jitter > 0.0) {
            q = (q * Quat::from_axis_angle(jitter_axis * jitter_angle)).normalized();
        }
        accepted.push_back({q, position});
    }
    if (static_cast<int>(accepted.size()) < cfg.n_starts) {
        std::ostringstream msg;
        msg << "accepted " << accepted.size() << " of " << cfg.n_starts << " start poses in " << trials
            << " trials (acceptance rate " << static_cast<double>(accepted.size()) / static_cast<double>(trials)
            << ")";
        throw Error(ErrorCode::SamplingExhausted, msg.str());
    }
    return accepted;
}

std::optional<Vec2>
project_point(const Vec3 &world, const CameraIntrinsics &cam, const Pose &cam_pose) {
    const Vec3 pc = inverse(cam_pose).transform(world);
    if (!(pc.z() > 0.0)) {
        return std::nullopt;
    }
    return Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
}

Trajectory
plan_trajectory(const Pose &start, const Pose &pre_grasp, const Vec3 &object_centroid, const CameraIntrinsics &cam,
                const TrajectoryConfig &cfg, const Vec3 &up) {
    cfg.validate();
    Trajectory traj;
    if (!((start.translation - pre_grasp.translation).norm() > 0.0)) {
        traj.poses = {pre_grasp};
        traj.phases = {3};
        return traj;
    }
    const Vec2 center(cam.cx, cam.cy);
    auto centered = [&](const Pose &pose) {
        const auto px = project_point(object_centroid, cam, pose);
        return px && (*px - center).norm() <= cfg.center_tolerance;
    };

    // Phase 1: rotate in place toward the object.
    traj.poses.push_back(start);
    traj.phases.push_back(1);
    if (!centered(start)) {
        Quat target;
        try {
            target = look_at(start.translation, object_centroid, up);
        } catch (const Error &) {
            target = look_at(start.translation, object_centroid, -start.axis(1));
        }
        bool done = false;
        for (int i = 1; i <= cfg.k1 && !done; ++i) {
            const Pose p{slerp(start.rotation, target, static_cast<double>(i) / cfg.k1), start.translation};
            traj.poses.push_back(p);
            traj.phases.push_back(1);
            done = centered(p);
        }
        if (!done) {
            throw Error(ErrorCode::CenteringFailed,
                        project_point(object_centroid, cam, traj.poses.back())
                            ? "object centroid not centered after phase 1"
                            : "object centroid behind the camera after phase 1");
        }
    }

    // Phase 2: translate with frozen orientation along the straight line to the pre-grasp.
    const Quat frozen = traj.poses.back().rotation;
    const Vec3 p2_start = traj.poses.back().translation;
    const double length = (pre_grasp.translation - p2_start).norm();
    double travelled = 0.0;
    while ((pre_grasp.translation - traj.poses.back().translation).norm() > cfg.d_switch) {
        travelled = std::min(travelled + cfg.k2_step, length);
        traj.poses.push_back({frozen, lerp(p2_start, pre_grasp.translation, travelled / length)});
        traj.phases.push_back(2);
    }
    traj.switch_index = traj.poses.size() - 1;

    // Phase 3: joint position lerp and rotation slerp onto the pre-grasp.
    const Pose from = traj.poses.back();
    for (int i = 1; i <= cfg.k3; ++i) {
        const double t = static_cast<double>(i) / cfg.k3;
        traj.poses.push_back(i == cfg.k3 ? pre_grasp
                                         : Pose{slerp(from.rotation, pre_grasp.rotation, t),
                                                lerp(from.translation, pre_grasp.translation, t)});
        traj.phases.push_back(3);
    }
    return traj;
}

DemoEpisode
generate_episode(const GaussianScene &scene, const CameraIntrinsics &cam, const Grasp &grasp, const Pose &start,
                 const Vec3 &object_centroid, const EpisodeConfig &cfg) {
    const Pose pre = pre_grasp_pose(grasp, cfg.standoff);
    const Trajectory traj = plan_trajectory(start, pre, object_centroid, cam, cfg.trajectory, cfg.up);

    DemoEpisode ep;
    ep.grasp = grasp;
    ep.scene_id = cfg.scene_id;
    ep.start_pose = start;
    ep.pre_grasp = pre;
    ep.steps.resize(traj.poses.size());
    for (std::size_t i = 0; i < traj.poses.size(); ++i) {
        DemoStep &step = ep.steps[i];
        step.camera_pose = traj.poses[i];
        step.phase = traj.phases[i];
        const RenderOutput out = render(scene, cam, step.camera_pose, cfg.render);
        step.rgb = to_8bit(out.rgb);
        BinaryMasks masks = binarize_masks(out, cfg.mask_threshold);
        step.object_mask = std::move(masks.object);
        step.hand_mask = std::move(masks.hand);
        const bool last = i + 1 == traj.poses.size();
        step.action = last ? DeltaAction{} : relative_action(traj.poses[i], traj.poses[i + 1]);
        step.grasp_label = last ? 1 : 0;
    }
    return ep;
}

std::string_view
to_string(DiscardReason reason) noexcept {
    switch (reason) {
    case DiscardReason::None: return "none";
    case DiscardReason::ObjectNotVisible: return "object_not_visible";
    case DiscardReason::ActionOutOfBounds: return "action_out_of_bounds";
    }
    return "unknown";
}

DiscardReason
episode_discard_reason(const DemoEpisode &episode, const ActionBounds &bounds) {
    for (const DemoStep &step : episode.steps) {
        if (std::none_of(step.object_mask.data.begin(), step.object_mask.data.end(),
                         [](std::uint8_t v) { return v != 0; })) {
            return DiscardReason::ObjectNotVisible;
        }
    }
    for (const DemoStep &step : episode.steps) {
        if (step.action.translation.norm() > bounds.translation || step.action.rotation.norm() > bounds.rotation) {
            return DiscardReason::ActionOutOfBounds;
        }
    }
    return DiscardReason::None;
}

std::size_t
Dataset::step_count() const {
    std::size_t n = 0;
    for (const auto &ep : episodes) {
        n += ep.steps.size();
    }
    return n;
}

} // namespace splatover
