// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"
#include "splatover/random.hpp"
#include "splatover/scene.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include <unistd.h>

namespace splatover::test {

inline Vec3
random_unit(Rng &rng) {
    const double z = rng.uniform(-1.0, 1.0), th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(1.0 - z * z);
    return {r * std::cos(th), r * std::sin(th), z};
}

inline Quat
random_rotation(Rng &rng) {
    return Quat::from_axis_angle(random_unit(rng) * rng.uniform(0.0, std::numbers::pi));
}

inline Pose
random_pose(Rng &rng, double extent = 1.0) {
    return {random_rotation(rng), Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                                       rng.uniform(-extent, extent))};
}

inline Quat
rot_z(double angle) {
    return Quat::from_axis_angle(Vec3::UnitZ(), angle);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        static int counter = 0;
        mPath = std::filesystem::temp_directory_path() /
                ("splatover_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(mPath);
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    [[nodiscard]] const std::filesystem::path &path() const { return mPath; }

  private:
    std::filesystem::path mPath;
};

inline Gaussian
isotropic(const Vec3 &mean, double sigma, double opacity, const Vec3 &color, Label label) {
    Gaussian g;
    g.mean = mean;
    g.log_scale = Vec3::Constant(std::log(sigma));
    g.opacity = opacity;
    g.color = color;
    g.label = label;
    return g;
}

} // namespace splatover::test
