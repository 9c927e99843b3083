// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace splatover {

enum class Label : std::uint8_t { Background = 0, Hand = 1, Object = 2 };

std::string_view to_string(Label label) noexcept;

/// One anisotropic 3D Gaussian with degree-0 color.
struct Gaussian {
    Vec3 mean = Vec3::Zero();      ///< meters
    Vec3 log_scale = Vec3::Zero(); ///< log of per-axis standard deviation (meters)
    Quat rotation;
    double opacity = 1.0;          ///< linear, [0, 1]
    Vec3 color = Vec3::Zero();     ///< RGB in [0, 1]
    Label label = Label::Background;

    /// World-frame covariance R diag(exp(2 log_scale)) R^T.
    [[nodiscard]] Mat3 covariance() const;
};

struct GaussianScene {
    std::vector<Gaussian> gaussians;
    Vec3 up_axis = Vec3::UnitZ();
    std::optional<double> table_height;

    [[nodiscard]] std::size_t count(Label label) const;
};

struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals; ///< empty, or one unit normal per point
    Label label = Label::Object;

    [[nodiscard]] bool has_normals() const noexcept { return !normals.empty() && normals.size() == points.size(); }
    [[nodiscard]] Vec3 centroid() const;
};

/// Reads a binary little-endian PLY splat file plus a one-byte-per-Gaussian label sidecar.
/// Opacity is passed through the logistic function when stored as logits: the header
/// comment "opacity logit"/"opacity linear" decides, otherwise any value outside [0,1]
/// marks the column as logits.
GaussianScene load_scene(const std::filesystem::path &splat_path, const std::filesystem::path &labels_path);
/// Writes the standard 3DGS attribute layout (opacity as logits, f_dc from color).
void save_scene(const GaussianScene &scene, const std::filesystem::path &splat_path,
                const std::filesystem::path &labels_path);

LabeledPointCloud extract_point_cloud(const GaussianScene &scene, Label label, double opacity_min);

/// PCA normals over the k nearest neighbours, flipped to point away from the cloud centroid.
LabeledPointCloud estimate_normals(const LabeledPointCloud &cloud, int k);

// Procedural desk-scale scenes ------------------------------------------------

enum class Primitive { Box, Cylinder, Sphere };

struct ObjectSpec {
    Primitive shape = Primitive::Box;
    Vec3 size{0.06, 0.06, 0.12};      ///< box extents; cylinder uses (2r, 2r, h); sphere uses (2r, ·, ·)
    Vec3 center{0.0, 0.0, 0.30};
    double yaw = 0.0;                  ///< rotation about the up axis, radians
    /// Per-face colors for boxes in order +x, -x, +y, -y, +z, -z; side/top/bottom for cylinders.
    std::vector<Vec3> colors{{0.85, 0.20, 0.15}, {0.80, 0.45, 0.10}, {0.15, 0.45, 0.85},
                             {0.20, 0.70, 0.30}, {0.90, 0.85, 0.20}, {0.55, 0.25, 0.60}};
};

enum class HandGrip { Side, Enclose };

struct HandSpec {
    HandGrip grip = HandGrip::Side;
    double finger_radius = 0.009;
    Vec3 color{0.87, 0.67, 0.55};
};

struct BackgroundSpec {
    double height = 0.0;      ///< plane offset along the up axis
    double half_extent = 0.5; ///< meters
    double density = 2.0e3;   ///< Gaussians per m^2
    Vec3 color_a{0.55, 0.50, 0.45};
    Vec3 color_b{0.35, 0.32, 0.30};
    double checker = 0.1;     ///< checker cell size in meters
};

struct SyntheticSceneSpec {
    ObjectSpec object;
    std::optional<HandSpec> hand = HandSpec{};
    std::optional<BackgroundSpec> background = BackgroundSpec{};
    double density = 4.0e4;   ///< object and hand Gaussians per m^2
    double opacity = 0.95;

    void validate() const; ///< throws InvalidSpec
};

/// Bit-deterministic per (spec, seed). Up axis is +z; table height is set when a background plane exists.
GaussianScene build_synthetic_scene(const SyntheticSceneSpec &spec, std::uint64_t seed);

} // namespace splatover
