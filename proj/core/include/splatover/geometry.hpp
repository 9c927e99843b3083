// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0
//
// SE(3) and unit-quaternion primitives shared by every stage of the pipeline.
//
// Frame convention (cameras, grippers and grasps alike):
//   +z  optical / approach axis
//   +x  image right / jaw closing axis
//   +y  image down
// The hand-eye transform defaults to identity, so a camera pose *is* a
// gripper pose.

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <array>
#include <span>

namespace splatover {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Rotation quaternion stored as (w, x, y, z).
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quat identity() noexcept { return {}; }
    /// Rotation vector (axis * angle, radians) to quaternion.
    static Quat from_axis_angle(const Vec3 &rotation_vector);
    static Quat from_axis_angle(const Vec3 &axis, double angle);
    /// Proper rotation matrix to quaternion; the result is normalized.
    static Quat from_matrix(const Mat3 &rotation);

    [[nodiscard]] Vec3 vec() const noexcept { return {x, y, z}; }
    [[nodiscard]] double norm() const noexcept;
    [[nodiscard]] Quat normalized() const;
    [[nodiscard]] Quat conjugate() const noexcept { return {w, -x, -y, -z}; }
    [[nodiscard]] Quat operator-() const noexcept { return {-w, -x, -y, -z}; }
    /// Representative with w >= 0 (q and -q are the same rotation).
    [[nodiscard]] Quat canonical() const noexcept;
    [[nodiscard]] Mat3 matrix() const;
    [[nodiscard]] Vec3 rotate(const Vec3 &v) const;
    /// Rotation vector with angle in [0, pi].
    [[nodiscard]] Vec3 to_axis_angle() const;
    /// Rotation angle in [0, pi].
    [[nodiscard]] double angle() const;

    bool operator==(const Quat &) const = default;
};

Quat operator*(const Quat &a, const Quat &b) noexcept;
double dot(const Quat &a, const Quat &b) noexcept;
/// Geodesic angle between the rotations a and b, in [0, pi].
double rotation_angle_between(const Quat &a, const Quat &b);

/// Rigid transform: p_parent = rotation * p_child + translation (meters).
struct Pose {
    Quat rotation;
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3 &t) { return {Quat::identity(), t}; }

    [[nodiscard]] Vec3 transform(const Vec3 &p) const { return rotation.rotate(p) + translation; }
    /// Column `i` of the rotation matrix: the pose's local x (0), y (1) or z (2) axis in the parent frame.
    [[nodiscard]] Vec3 axis(int i) const;

    /// Serialized as [qw, qx, qy, qz, tx, ty, tz].
    [[nodiscard]] std::array<double, 7> to_array() const;
    static Pose from_array(std::span<const double, 7> values);

    bool operator==(const Pose &) const = default;
};

/// a∘b: applies b, then a. Rotation renormalized.
Pose compose(const Pose &a, const Pose &b);
Pose inverse(const Pose &p);

/// Shortest-geodesic spherical interpolation. t = 0 returns a and t = 1 returns b
/// bit-for-bit; below kSlerpLinearThreshold radians falls back to normalized lerp.
Quat slerp(const Quat &a, const Quat &b, double t);
inline constexpr double kSlerpLinearThreshold = 1e-7;

Vec3 lerp(const Vec3 &a, const Vec3 &b, double t);

/// Orientation whose +z axis points from `eye` to `target`, with +y (image down)
/// opposite to `up_hint` as far as orthogonality allows.
/// Throws DegenerateLookAt when |target - eye| <= 1e-9 or forward is collinear with up_hint.
Quat look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up_hint);

/// Per-step action label: motion expressed in the current gripper frame.
struct DeltaAction {
    Vec3 translation = Vec3::Zero(); ///< meters
    Vec3 rotation = Vec3::Zero();    ///< axis-angle, radians, angle in [0, pi]
};

/// inverse(current) ∘ next, with the rotation in axis-angle form.
DeltaAction relative_action(const Pose &current, const Pose &next);
/// The pose whose rotation is exp(action.rotation) and translation action.translation.
Pose action_to_pose(const DeltaAction &action);
/// compose(pose, action_to_pose(action)).
Pose apply_action(const Pose &pose, const DeltaAction &action);

/// Translation distance (m) between two poses.
double translation_error(const Pose &a, const Pose &b);
/// Rotation angle (rad) between two poses.
double rotation_error(const Pose &a, const Pose &b);

} // namespace splatover
