// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"
#include "splatover/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatover {

/// Parallel-jaw gripper dimensions, meters.
struct GripperModel {
    double max_width = 0.08;
    double finger_depth = 0.04;
    double finger_thickness = 0.01;
    double palm_clearance = 0.02;
    double safety_clearance = 0.01;

    void validate() const;
};

/// Grasp frame: +z approach, +x closing axis, origin midway between the fingertips.
struct Grasp {
    Pose pose;
    double width = 0.0;
    double quality = 0.0;
    bool safe = false;

    bool operator==(const Grasp &) const = default;
};

/// Axis-aligned box in the grasp frame occupied by fingers and palm during approach and closing.
struct SweptVolume {
    Vec3 lo;
    Vec3 hi;
    [[nodiscard]] bool contains(const Vec3 &p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};
SweptVolume swept_volume(const Grasp &grasp, const GripperModel &gripper);

struct AntipodalParams {
    int n_samples = 500;
    double mu = 0.4;
    std::uint64_t seed = 0;
};

/// Geometric antipodal sampler over an object cloud with outward normals.
/// Returns an empty vector when no antipodal pair exists. Throws NoNormals.
std::vector<Grasp> sample_antipodal_grasps(const LabeledPointCloud &object, const GripperModel &gripper,
                                           const AntipodalParams &params);

/// Removes grasps whose swept volume contains any hand point; survivors keep order and get safe = true.
std::vector<Grasp> filter_unsafe(const std::vector<Grasp> &grasps, const LabeledPointCloud &hand,
                                 const GripperModel &gripper);

/// pose' = offset ∘ pose.
Grasp align_to_scene(const Grasp &grasp, const Pose &offset);

/// Same orientation, origin retreated by `standoff` along the approach axis.
Pose pre_grasp_pose(const Grasp &grasp, double standoff);

/// A parallel-jaw grasp is symmetric under a half turn about its approach axis. Picks the
/// representative whose +y axis does not point along `up`, so the hand-eye view at the
/// pre-grasp is upright.
Grasp canonicalize_roll(const Grasp &grasp, const Vec3 &up);

/// Greedy diversity ordering: best quality first, then repeatedly the grasp whose approach
/// axis is farthest (in angle) from every grasp already chosen. Returns indices.
std::vector<std::size_t> diverse_order(const std::vector<Grasp> &grasps);

/// Human-readable table: one row per grasp, [qw qx qy qz tx ty tz width quality safe].
void write_grasp_table(const std::filesystem::path &path, const std::vector<Grasp> &grasps);
std::vector<Grasp> read_grasp_table(const std::filesystem::path &path);

} // namespace splatover
