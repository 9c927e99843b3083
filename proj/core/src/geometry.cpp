// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/geometry.hpp"

#include "splatover/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace splatover {

Quat
Quat::from_axis_angle(const Vec3 &rotation_vector) {
    const double angle = rotation_vector.norm();
    if (angle < 1e-12) {
        // First-order expansion; normalization absorbs the O(angle^2) term.
        return Quat{1.0, 0.5 * rotation_vector.x(), 0.5 * rotation_vector.y(),
                    0.5 * rotation_vector.z()}
            .normalized();
    }
    const double s = std::sin(0.5 * angle) / angle;
    return {std::cos(0.5 * angle), s * rotation_vector.x(), s * rotation_vector.y(),
            s * rotation_vector.z()};
}

Quat
Quat::from_axis_angle(const Vec3 &axis, double angle) {
    return from_axis_angle(axis.normalized() * angle);
}

Quat
Quat::from_matrix(const Mat3 &rotation) {
    const Eigen::Quaterniond q(rotation);
    return Quat{q.w(), q.x(), q.y(), q.z()}.normalized();
}

double
Quat::norm() const noexcept {
    return std::sqrt(w * w + x * x + y * y + z * z);
}

Quat
Quat::normalized() const {
    const double n = norm();
    if (!(n > 1e-300)) {
        throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero quaternion");
    }
    return {w / n, x / n, y / n, z / n};
}

Quat
Quat::canonical() const noexcept {
    return w < 0.0 ? -*this : *this;
}

Mat3
Quat::matrix() const {
    const double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, xz = x * z, yz = y * z, wx = w * x, wy = w * y, wz = w * z;
    Mat3 r;
    r << ww + xx - yy - zz, 2 * (xy - wz), 2 * (xz + wy),
        2 * (xy + wz), ww - xx + yy - zz, 2 * (yz - wx),
        2 * (xz - wy), 2 * (yz + wx), ww - xx - yy + zz;
    return r;
}

Vec3
Quat::rotate(const Vec3 &v) const {
    // v' = v + 2w (u x v) + 2 u x (u x v)
    const Vec3 u = vec();
    const Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
}

Vec3
Quat::to_axis_angle() const {
    const Quat q = canonical();
    const Vec3 u = q.vec();
    const double s = u.norm();
    if (s < 1e-8) {
        return u * (2.0 / q.w);
    }
    const double angle = 2.0 * std::atan2(s, q.w);
    return u * (angle / s);
}

double
Quat::angle() const {
    const Quat q = canonical();
    return 2.0 * std::atan2(q.vec().norm(), q.w);
}

Quat
operator*(const Quat &a, const Quat &b) noexcept {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

double
dot(const Quat &a, const Quat &b) noexcept {
    return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

double
rotation_angle_between(const Quat &a, const Quat &b) {
    return (a.conjugate() * b).angle();
}

Vec3
Pose::axis(int i) const {
    Vec3 e = Vec3::Zero();
    e[i] = 1.0;
    return rotation.rotate(e);
}

std::array<double, 7>
Pose::to_array() const {
    return {rotation.w, rotation.x, rotation.y, rotation.z,
            translation.x(), translation.y(), translation.z()};
}

Pose
Pose::from_array(std::span<const double, 7> v) {
    // Already-unit input is kept bit-exact so serialization round-trips.
    const Quat q{v[0], v[1], v[2], v[3]};
    return {std::abs(q.norm() - 1.0) > 1e-12 ? q.normalized() : q, Vec3{v[4], v[5], v[6]}};
}

Pose
compose(const Pose &a, const Pose &b) {
    return {(a.rotation * b.rotation).normalized(), a.rotation.rotate(b.translation) + a.translation};
}

Pose
inverse(const Pose &p) {
    const Quat r = p.rotation.conjugate();
    return {r, -r.rotate(p.translation)};
}

Quat
slerp(const Quat &a, const Quat &b, double t) {
    if (t == 0.0) {
        return a;
    }
    if (t == 1.0) {
        return b;
    }
    Quat end = b;
    double d = dot(a, b);
    if (d < 0.0) {
        end = -b;
        d = -d;
    }
    const double theta = std::acos(std::clamp(d, -1.0, 1.0));
    double wa, wb;
    if (theta < kSlerpLinearThreshold) {
        wa = 1.0 - t;
        wb = t;
    } else {
        const double s = std::sin(theta);
        wa = std::sin((1.0 - t) * theta) / s;
        wb = std::sin(t * theta) / s;
    }
    return Quat{wa * a.w + wb * end.w, wa * a.x + wb * end.x, wa * a.y + wb * end.y,
                wa * a.z + wb * end.z}
        .normalized();
}

Vec3
lerp(const Vec3 &a, const Vec3 &b, double t) {
    return a + t * (b - a);
}

Quat
look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up_hint) {
    const Vec3 delta = target - eye;
    const double dist = delta.norm();
    if (!(dist > 1e-9)) {
        throw Error(ErrorCode::DegenerateLookAt, "target coincides with eye");
    }
    const double up_norm = up_hint.norm();
    if (!(up_norm > 0.0)) {
        throw Error(ErrorCode::DegenerateLookAt, "zero up hint");
    }
    const Vec3 forward = delta / dist;
    const Vec3 right = forward.cross(up_hint / up_norm);
    const double right_norm = right.norm();
    if (right_norm < 1e-6) {
        throw Error(ErrorCode::DegenerateLookAt, "forward direction is collinear with up hint");
    }
    Mat3 r;
    r.col(0) = right / right_norm;
    r.col(2) = forward;
    r.col(1) = forward.cross(r.col(0));
    return Quat::from_matrix(r);
}

DeltaAction
relative_action(const Pose &current, const Pose &next) {
    const Pose delta = compose(inverse(current), next);
    return {delta.translation, delta.rotation.to_axis_angle()};
}

Pose
action_to_pose(const DeltaAction &action) {
    return {Quat::from_axis_angle(action.rotation), action.translation};
}

Pose
apply_action(const Pose &pose, const DeltaAction &action) {
    return compose(pose, action_to_pose(action));
}

double
translation_error(const Pose &a, const Pose &b) {
    return (a.translation - b.translation).norm();
}

double
rotation_error(const Pose &a, const Pose &b) {
    return rotation_angle_between(a.rotation, b.rotation);
}

} // namespace splatover
