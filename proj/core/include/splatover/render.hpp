// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"
#include "splatover/image.hpp"
#include "splatover/scene.hpp"

#include <optional>

namespace splatover {

/// Pinhole intrinsics. Pixel (u, v) has its center at integer coordinates.
struct CameraIntrinsics {
    double fx = 110.0;
    double fy = 110.0;
    double cx = 63.5;
    double cy = 63.5;
    int width = 128;
    int height = 128;
    double near = 0.01;
    double far = 10.0;

    void validate() const; ///< throws InvalidArgument
    /// Square-pixel camera centered on the image with the given horizontal field of view.
    static CameraIntrinsics from_fov(int width, int height, double horizontal_fov_rad);

    bool operator==(const CameraIntrinsics &) const = default;
};

struct RenderSettings {
    Vec3 background{0.0, 0.0, 0.0};
    double alpha_cap = 0.99;
    double transmittance_stop = 1e-4;
    double covariance_floor = 0.3; ///< px^2 added to each diagonal entry of the 2D covariance
};

struct ProjectedGaussian {
    Vec2 mean;  ///< pixels
    Mat2 cov;   ///< px^2, floor included
    double depth; ///< camera-frame z, meters
};

/// Perspective (EWA) projection of one Gaussian. `cam_pose` is camera-to-world.
/// Returns nullopt when culled by the clip range or when its 3-sigma footprint misses the image.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian &g, const CameraIntrinsics &cam,
                                                  const Pose &cam_pose, double covariance_floor = 0.3);

struct RenderOutput {
    ImageF rgb;           ///< 3 channels, [0, 1]
    ImageF object_mask;   ///< sum of compositing weights of Object Gaussians
    ImageF hand_mask;     ///< same for Hand
    ImageF depth;         ///< expected depth in meters, 0 where nearly transparent
    ImageF transmittance; ///< residual T after compositing
    ImageF weight_sum;    ///< sum of alpha_i * T_i; weight_sum + transmittance = 1
};

/// Front-to-back alpha compositing over a global depth sort (ties by Gaussian index).
/// Output is independent of the worker count. Throws EmptyScene.
RenderOutput render(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &cam_pose,
                    const RenderSettings &settings = {});

struct BinaryMasks {
    Image8 object; ///< values 0 or 1
    Image8 hand;
};

/// Pixelwise mask >= threshold. Threshold must lie in (0, 1).
BinaryMasks binarize_masks(const RenderOutput &out, double threshold);

} // namespace splatover
