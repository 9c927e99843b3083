// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/scene.hpp"

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace splatover {

std::string_view
to_string(Label label) noexcept {
    switch (label) {
    case Label::Background: return "background";
    case Label::Hand: return "hand";
    case Label::Object: return "object";
    }
    return "unknown";
}

Mat3
Gaussian::covariance() const {
    const Mat3 r = rotation.matrix();
    const Vec3 var = (2.0 * log_scale).array().exp();
    return r * var.asDiagonal() * r.transpose();
}

std::size_t
GaussianScene::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(gaussians.begin(), gaussians.end(), [label](const Gaussian &g) { return g.label == label; }));
}

Vec3
LabeledPointCloud::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const Vec3 &p : points) {
        c += p;
    }
    return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

LabeledPointCloud
extract_point_cloud(const GaussianScene &scene, Label label, double opacity_min) {
    if (!(opacity_min >= 0.0 && opacity_min <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "opacity_min must lie in [0, 1]");
    }
    LabeledPointCloud cloud;
    cloud.label = label;
    for (const Gaussian &g : scene.gaussians) {
        if (g.label == label && g.opacity >= opacity_min) {
            cloud.points.push_back(g.mean);
        }
    }
    if (cloud.points.empty()) {
        throw Error(ErrorCode::EmptySelection,
                    "no " + std::string(to_string(label)) + " Gaussians with opacity >= " + std::to_string(opacity_min));
    }
    return cloud;
}

LabeledPointCloud
estimate_normals(const LabeledPointCloud &cloud, int k) {
    const std::size_t n = cloud.points.size();
    if (k < 3 || n < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::TooFewPoints,
                    "need at least k >= 3 points, got " + std::to_string(n) + " with k = " + std::to_string(k));
    }
    LabeledPointCloud out = cloud;
    out.normals.assign(n, Vec3::Zero());
    const Vec3 centroid = cloud.centroid();
    const auto kk = static_cast<std::size_t>(k);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = begin; i < end; ++i) {
            const Vec3 &p = cloud.points[i];
            for (std::size_t j = 0; j < n; ++j) {
                dist[j] = {(cloud.points[j] - p).squaredNorm(), j};
            }
            std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
            Vec3 mean = Vec3::Zero();
            for (std::size_t m = 0; m < kk; ++m) {
                mean += cloud.points[dist[m].second];
            }
            mean /= static_cast<double>(kk);
            Mat3 cov = Mat3::Zero();
            for (std::size_t m = 0; m < kk; ++m) {
                const Vec3 d = cloud.points[dist[m].second] - mean;
                cov += d * d.transpose();
            }
            const Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
            Vec3 normal = solver.eigenvectors().col(0).normalized();
            if (normal.dot(p - centroid) < 0.0) {
                normal = -normal;
            }
            out.normals[i] = normal;
        }
    });
    return out;
}

} // namespace splatover
