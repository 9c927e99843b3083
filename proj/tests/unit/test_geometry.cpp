// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "splatover/error.hpp"
#include "splatover/geometry.hpp"

#include <gtest/gtest.h>

using namespace splatover;
using namespace splatover::test;

namespace {

void
expect_pose_near(const Pose &a, const Pose &b, double tol) {
    EXPECT_LE(translation_error(a, b), tol);
    EXPECT_LE(rotation_error(a, b), tol);
}

} // namespace

TEST(Compose, IdentityAndInverse) {
    Rng rng(1);
    const Pose p = random_pose(rng);
    expect_pose_near(compose(Pose::identity(), p), p, 1e-15);
    expect_pose_near(compose(p, inverse(p)), Pose::identity(), 1e-12);
}

TEST(Compose, QuarterTurnsAddUp) {
    const Pose a{rot_z(std::numbers::pi / 2), Vec3::Zero()};
    const Pose c = compose(a, a);
    // Closed form: (cos 45, 0, 0, sin 45)^2 = (0, 0, 0, 1).
    EXPECT_NEAR(std::abs(c.rotation.z), 1.0, 1e-15);
    EXPECT_NEAR(c.rotation.w, 0.0, 1e-15);
}

TEST(Inverse, Cases) {
    expect_pose_near(inverse(Pose::identity()), Pose::identity(), 0.0);
    const Pose t = inverse(Pose::from_translation({1, 2, 3}));
    EXPECT_EQ(t.translation, Vec3(-1, -2, -3));
    Rng rng(2);
    const Pose p = random_pose(rng);
    expect_pose_near(inverse(inverse(p)), p, 1e-14);
}

TEST(Slerp, Endpoints) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Quat a = random_rotation(rng), b = random_rotation(rng);
        EXPECT_EQ(slerp(a, b, 0.0), a);
        EXPECT_EQ(slerp(a, b, 1.0), b);
        EXPECT_NEAR(slerp(a, b, rng.uniform()).norm(), 1.0, 1e-12);
    }
    const Quat q = random_rotation(rng);
    EXPECT_LE(rotation_angle_between(slerp(q, q, 0.7), q), 1e-12);
}

TEST(Slerp, GeodesicMidpoint) {
    const Quat m = slerp(Quat::identity(), rot_z(std::numbers::pi / 2), 0.5);
    EXPECT_LE(rotation_angle_between(m, rot_z(std::numbers::pi / 4)), 1e-12);
}

TEST(Slerp, TakesShortPath) {
    const Quat a = rot_z(0.1), b = -rot_z(0.3);
    EXPECT_NEAR(rotation_angle_between(slerp(a, b, 0.5), rot_z(0.2)), 0.0, 1e-12);
}

TEST(Lerp, Cases) {
    const Vec3 a(1, 2, 3);
    EXPECT_EQ(lerp(a, Vec3(4, 5, 6), 0.0), a);
    EXPECT_EQ(lerp(Vec3::Zero(), Vec3(2, 0, 0), 0.25), Vec3(0.5, 0, 0));
    EXPECT_EQ(lerp(a, a, 0.37), a);
}

TEST(LookAt, OpticalAxisConvention) {
    const Quat q = look_at(Vec3(0, 0, -1), Vec3::Zero(), Vec3(0, 1, 0));
    EXPECT_LE((q.rotate(Vec3::UnitZ()) - Vec3::UnitZ()).norm(), 1e-15);
    // Image y runs down, so the up hint maps to -y.
    EXPECT_LE((q.rotate(Vec3::UnitY()) - Vec3(0, -1, 0)).norm(), 1e-15);
}

TEST(LookAt, Degenerate) {
    EXPECT_THROW(look_at(Vec3::Zero(), Vec3(0, 0, 1e-12), Vec3::UnitY()), Error);
    EXPECT_THROW(look_at(Vec3::Zero(), Vec3(0, 0, 1), Vec3::UnitZ()), Error);
}

TEST(LookAt, RandomForwardAxis) {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 eye = random_pose(rng).translation, target = random_pose(rng).translation;
        const Quat q = look_at(eye, target, Vec3::UnitZ());
        EXPECT_LE((q.rotate(Vec3::UnitZ()) - (target - eye).normalized()).norm(), 1e-9);
        EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    }
}

TEST(RelativeAction, Cases) {
    Rng rng(5);
    const Pose p = random_pose(rng);
    const DeltaAction same = relative_action(p, p);
    EXPECT_LE(same.translation.norm(), 1e-14);
    EXPECT_LE(same.rotation.norm(), 1e-14);
    const DeltaAction fwd = relative_action(Pose::identity(), Pose::from_translation({0, 0, 0.1}));
    EXPECT_EQ(fwd.translation, Vec3(0, 0, 0.1));
    EXPECT_EQ(fwd.rotation, Vec3::Zero());
}

TEST(RelativeAction, RoundTrip) {
    Rng rng(6);
    for (int i = 0; i < 2000; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        const Pose back = apply_action(a, relative_action(a, b));
        EXPECT_LE(translation_error(back, b), 1e-9);
        EXPECT_LE(rotation_error(back, b), 1e-9);
    }
}

TEST(RelativeAction, NearHalfTurn) {
    const Pose a = Pose::identity();
    const Pose b{Quat::from_axis_angle(Vec3(1, 1, 0).normalized(), std::numbers::pi - 1e-10), Vec3::Zero()};
    EXPECT_LE(rotation_error(apply_action(a, relative_action(a, b)), b), 1e-9);
}

TEST(Quat, AxisAngleRoundTrip) {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 v = random_unit(rng) * rng.uniform(0.0, 3.0);
        EXPECT_LE((Quat::from_axis_angle(v).to_axis_angle() - v).norm(), 1e-12);
    }
    const Vec3 tiny(1e-14, -2e-14, 3e-14);
    EXPECT_LE((Quat::from_axis_angle(tiny).to_axis_angle() - tiny).norm(), 1e-20);
}

TEST(Pose, ArrayRoundTripIsExact) {
    Rng rng(8);
    const Pose p = random_pose(rng);
    const auto a = p.to_array();
    EXPECT_EQ(Pose::from_array(a), p);
}
