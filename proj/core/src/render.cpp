// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/render.hpp"

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatover {

void
CameraIntrinsics::validate() const {
    if (!(fx > 0.0 && fy > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
    }
    if (!(near > 0.0 && near < far)) {
        throw Error(ErrorCode::InvalidArgument, "clip range must satisfy 0 < near < far");
    }
    if (width < 16 || height < 16) {
        throw Error(ErrorCode::InvalidArgument, "image must be at least 16x16");
    }
}

CameraIntrinsics
CameraIntrinsics::from_fov(int width, int height, double horizontal_fov_rad) {
    CameraIntrinsics cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * horizontal_fov_rad);
    cam.fy = cam.fx;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    return cam;
}

namespace {

constexpr int kTile = 16;
constexpr double kGuardBand = 1.3;

struct Splat {
    Vec2 mean;
    double conic_a, conic_b, conic_c; // inverse 2D covariance
    double opacity;
    Vec3 color;
    double depth;
    Label label;
    int x0, x1, y0, y1; // inclusive pixel bbox
};

double
max_eigenvalue(const Mat2 &m) {
    const double mid = 0.5 * (m(0, 0) + m(1, 1));
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return mid + std::sqrt(std::max(0.0, mid * mid - det));
}

struct Footprint {
    int x0, x1, y0, y1;
    [[nodiscard]] bool empty() const { return x0 > x1 || y0 > y1; }
};

Footprint
footprint(const Vec2 &mean, const Mat2 &cov, const CameraIntrinsics &cam) {
    const double radius = 3.0 * std::sqrt(max_eigenvalue(cov));
    return {std::max(0, static_cast<int>(std::ceil(mean.x() - radius))),
            std::min(cam.width - 1, static_cast<int>(std::floor(mean.x() + radius))),
            std::max(0, static_cast<int>(std::ceil(mean.y() - radius))),
            std::min(cam.height - 1, static_cast<int>(std::floor(mean.y() + radius)))};
}

} // namespace

std::optional<ProjectedGaussian>
project_gaussian(const Gaussian &g, const CameraIntrinsics &cam, const Pose &cam_pose, double covariance_floor) {
    const Mat3 world_to_cam = cam_pose.rotation.matrix().transpose();
    const Vec3 pc = world_to_cam * (g.mean - cam_pose.translation);
    const double z = pc.z();
    if (!(z >= cam.near && z <= cam.far)) {
        return std::nullopt;
    }
    const double inv_z = 1.0 / z;
    const Vec2 mean(cam.fx * pc.x() * inv_z + cam.cx, cam.fy * pc.y() * inv_z + cam.cy);
    // Centers beyond a 30% guard band around the frustum are dropped; near the camera plane the
    // linearized footprint of such splats blows up and smears across the whole image.
    const double lim_x = kGuardBand * std::max(cam.cx + 0.5, cam.width - 0.5 - cam.cx) / cam.fx;
    const double lim_y = kGuardBand * std::max(cam.cy + 0.5, cam.height - 0.5 - cam.cy) / cam.fy;
    const double tx = pc.x() * inv_z, ty = pc.y() * inv_z;
    if (std::abs(tx) > lim_x || std::abs(ty) > lim_y) {
        return std::nullopt;
    }
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * inv_z, 0.0, -cam.fx * tx * inv_z,
        0.0, cam.fy * inv_z, -cam.fy * ty * inv_z;
    const Eigen::Matrix<double, 2, 3> t = jac * world_to_cam;
    Mat2 cov = t * g.covariance() * t.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += covariance_floor;
    cov(1, 1) += covariance_floor;
    if (footprint(mean, cov, cam).empty()) {
        return std::nullopt;
    }
    return ProjectedGaussian{mean, cov, z};
}

RenderOutput
render(const GaussianScene &scene, const CameraIntrinsics &cam, const Pose &cam_pose, const RenderSettings &settings) {
    if (scene.gaussians.empty()) {
        throw Error(ErrorCode::EmptyScene, "cannot render an empty scene");
    }
    cam.validate();
    const std::size_t n = scene.gaussians.size();

    std::vector<std::optional<Splat>> slots(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Gaussian &g = scene.gaussians[i];
            const auto proj = project_gaussian(g, cam, cam_pose, settings.covariance_floor);
            if (!proj) {
                continue;
            }
            const double det = proj->cov.determinant();
            if (!(det > 0.0)) {
                continue;
            }
            const Footprint fp = footprint(proj->mean, proj->cov, cam);
            slots[i] = Splat{proj->mean,
                             proj->cov(1, 1) / det,
                             -proj->cov(0, 1) / det,
                             proj->cov(0, 0) / det,
                             g.opacity,
                             g.color,
                             proj->depth,
                             g.label,
                             fp.x0,
                             fp.x1,
                             fp.y0,
                             fp.y1};
        }
    });

    std::vector<Splat> splats;
    std::vector<std::size_t> source_index;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            splats.push_back(*slots[i]);
            source_index.push_back(i);
        }
    }
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (splats[a].depth != splats[b].depth) {
            return splats[a].depth < splats[b].depth;
        }
        return source_index[a] < source_index[b];
    });

    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x * tiles_y));
    for (const std::size_t idx : order) {
        const Splat &s = splats[idx];
        for (int ty = s.y0 / kTile; ty <= s.y1 / kTile; ++ty) {
            for (int tx = s.x0 / kTile; tx <= s.x1 / kTile; ++tx) {
                bins[static_cast<std::size_t>(ty * tiles_x + tx)].push_back(static_cast<std::uint32_t>(idx));
            }
        }
    }

    RenderOutput out;
    out.rgb = ImageF(cam.width, cam.height, 3);
    out.object_mask = ImageF(cam.width, cam.height, 1);
    out.hand_mask = ImageF(cam.width, cam.height, 1);
    out.depth = ImageF(cam.width, cam.height, 1);
    out.transmittance = ImageF(cam.width, cam.height, 1);
    out.weight_sum = ImageF(cam.width, cam.height, 1);

    parallel_for(bins.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t tile = begin; tile < end; ++tile) {
            const int tx = static_cast<int>(tile) % tiles_x;
            const int ty = static_cast<int>(tile) / tiles_x;
            const auto &list = bins[tile];
            for (int v = ty * kTile; v < std::min(cam.height, (ty + 1) * kTile); ++v) {
                for (int u = tx * kTile; u < std::min(cam.width, (tx + 1) * kTile); ++u) {
                    double t = 1.0;
                    Vec3 color = Vec3::Zero();
                    double object = 0.0, hand = 0.0, depth = 0.0, weights = 0.0;
                    for (const std::uint32_t idx : list) {
                        const Splat &s = splats[idx];
                        if (u < s.x0 || u > s.x1 || v < s.y0 || v > s.y1) {
                            continue;
                        }
                        const double dx = u - s.mean.x();
                        const double dy = v - s.mean.y();
                        const double power = -0.5 * (s.conic_a * dx * dx + 2.0 * s.conic_b * dx * dy +
                                                     s.conic_c * dy * dy);
                        const double alpha = std::clamp(s.opacity * std::exp(power), 0.0, settings.alpha_cap);
                        const double w = alpha * t;
                        color += w * s.color;
                        depth += w * s.depth;
                        weights += w;
                        if (s.label == Label::Object) {
                            object += w;
                        } else if (s.label == Label::Hand) {
                            hand += w;
                        }
                        t *= 1.0 - alpha;
                        if (t < settings.transmittance_stop) {
                            break;
                        }
                    }
                    color += t * settings.background;
                    for (int c = 0; c < 3; ++c) {
                        out.rgb.at(u, v, c) = static_cast<float>(color[c]);
                    }
                    out.object_mask.at(u, v) = static_cast<float>(object);
                    out.hand_mask.at(u, v) = static_cast<float>(hand);
                    out.depth.at(u, v) = 1.0 - t > 1e-3 ? static_cast<float>(depth / (1.0 - t)) : 0.0f;
                    out.transmittance.at(u, v) = static_cast<float>(t);
                    out.weight_sum.at(u, v) = static_cast<float>(weights);
                }
            }
        }
    });
    return out;
}

BinaryMasks
binarize_masks(const RenderOutput &out, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "mask threshold must lie in (0, 1)");
    }
    auto binarize = [threshold](const ImageF &mask) {
        Image8 b(mask.width, mask.height, 1);
        std::transform(mask.data.begin(), mask.data.end(), b.data.begin(),
                       [threshold](float v) { return static_cast<std::uint8_t>(v >= threshold ? 1 : 0); });
        return b;
    };
    return {binarize(out.object_mask), binarize(out.hand_mask)};
}

} // namespace splatover
