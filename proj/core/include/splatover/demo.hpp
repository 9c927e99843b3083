// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"
#include "splatover/grasp.hpp"
#include "splatover/image.hpp"
#include "splatover/render.hpp"
#include "splatover/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splatover {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Spherical start-pose sampler around a grasp origin, with rejection filters.
struct StartSamplerConfig {
    double r_min = 0.35;
    double r_max = 0.60;
    double elevation_min = 10.0 * kDeg; ///< above the plane orthogonal to the scene up axis
    double elevation_max = 70.0 * kDeg;
    double azimuth_min = -std::numbers::pi;
    double azimuth_max = std::numbers::pi;
    double min_hand_distance = 0.15;
    double max_tilt_from_approach = 75.0 * kDeg;
    double occlusion_radius = 0.02;   ///< segment-to-hand clearance for the line of sight
    double orientation_jitter = 0.0;  ///< max random tilt applied after look-at, radians
    int n_starts = 10;

    void validate() const;
};

/// Three-phase reaching planner parameters.
struct TrajectoryConfig {
    int k1 = 8;               ///< phase-1 slerp steps
    double k2_step = 0.02;    ///< phase-2 travel per step, meters
    int k3 = 10;              ///< phase-3 steps
    double d_switch = 0.12;   ///< phase-2 -> 3 switch distance, meters
    double center_tolerance = 4.0; ///< pixels

    void validate() const;
};

/// Mean of the Object Gaussian centers. Throws EmptySelection.
Vec3 object_centroid(const GaussianScene &scene);

/// Throws SamplingExhausted (with the acceptance rate) when fewer than n_starts poses pass
/// the filters within 100 * n_starts trials.
std::vector<Pose> sample_start_poses(const Grasp &grasp, const GaussianScene &scene, const LabeledPointCloud &hand,
                                     const StartSamplerConfig &cfg, std::uint64_t seed);

struct Trajectory {
    std::vector<Pose> poses;
    std::vector<int> phases;        ///< 1, 2 or 3 per pose
    std::size_t switch_index = 0;   ///< pose from which phase 3 starts
};

/// Phase 1 rotates in place until the centroid is centered; phase 2 translates with frozen
/// orientation until within d_switch; phase 3 interpolates position and rotation jointly.
/// The last pose equals pre_grasp exactly. Throws CenteringFailed.
Trajectory plan_trajectory(const Pose &start, const Pose &pre_grasp, const Vec3 &object_centroid,
                           const CameraIntrinsics &cam, const TrajectoryConfig &cfg,
                           const Vec3 &up = Vec3::UnitZ());

/// Pixel projection of a world point, or nullopt when it is behind the camera.
std::optional<Vec2> project_point(const Vec3 &world, const CameraIntrinsics &cam, const Pose &cam_pose);

struct DemoStep {
    Pose camera_pose;
    Image8 rgb;         ///< 3 channels
    Image8 object_mask; ///< binary 0/1
    Image8 hand_mask;   ///< binary 0/1
    DeltaAction action;
    int grasp_label = 0;
    int phase = 1;
};

struct DemoEpisode {
    std::vector<DemoStep> steps;
    Grasp grasp;
    std::string scene_id;
    Pose start_pose;
    Pose pre_grasp;
};

struct EpisodeConfig {
    TrajectoryConfig trajectory;
    RenderSettings render;
    double mask_threshold = 0.5;
    double standoff = 0.10;
    Vec3 up = Vec3::UnitZ();
    std::string scene_id = "scene";
};

/// Plans, renders and labels one demonstration. action[i] = relative_action(pose[i], pose[i+1]);
/// the last step carries the zero action and grasp_label = 1.
DemoEpisode generate_episode(const GaussianScene &scene, const CameraIntrinsics &cam, const Grasp &grasp,
                             const Pose &start, const Vec3 &object_centroid, const EpisodeConfig &cfg);

/// Per-step motion bounds the policy can express.
struct ActionBounds {
    double translation = 0.05;
    double rotation = 0.30;
};

enum class DiscardReason { None, ObjectNotVisible, ActionOutOfBounds };
std::string_view to_string(DiscardReason reason) noexcept;

/// Post-hoc acceptance test for a generated episode.
DiscardReason episode_discard_reason(const DemoEpisode &episode, const ActionBounds &bounds);

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
    CameraIntrinsics camera;
    StartSamplerConfig sampler;
    TrajectoryConfig trajectory;
    std::map<std::string, std::size_t> discards;
    std::vector<DemoEpisode> episodes;

    [[nodiscard]] std::size_t step_count() const;
};

/// Layout: manifest.json plus ep_NNNNN/ with step_NNN.png, step_NNN_obj.png, step_NNN_hand.png
/// and steps.jsonl. Throws IoError.
void write_dataset(const Dataset &dataset, const std::filesystem::path &dir);
/// Throws SchemaVersionMismatch (missing or foreign manifest) and IoError.
Dataset read_dataset(const std::filesystem::path &dir);

} // namespace splatover
