// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/grasp.hpp"

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"
#include "splatover/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace splatover {

void
GripperModel::validate() const {
    if (!(max_width > 0.0 && finger_depth > 0.0 && finger_thickness > 0.0 && palm_clearance > 0.0 &&
          safety_clearance > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "gripper dimensions must all be positive");
    }
}

SweptVolume
swept_volume(const Grasp &grasp, const GripperModel &gripper) {
    const double hx = 0.5 * grasp.width + gripper.finger_thickness + gripper.safety_clearance;
    const double hy = gripper.finger_thickness + gripper.safety_clearance;
    return {Vec3(-hx, -hy, -(gripper.finger_depth + gripper.palm_clearance + gripper.safety_clearance)),
            Vec3(hx, hy, gripper.safety_clearance)};
}

namespace {

double
angle_of(double cosine) {
    return std::acos(std::clamp(cosine, -1.0, 1.0));
}

Vec3
perpendicular_to(const Vec3 &n) {
    const Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return n.cross(ref).normalized();
}

} // namespace

std::vector<Grasp>
sample_antipodal_grasps(const LabeledPointCloud &object, const GripperModel &gripper, const AntipodalParams &params) {
    if (!object.has_normals()) {
        throw Error(ErrorCode::NoNormals, "antipodal sampling needs per-point normals");
    }
    if (params.n_samples < 1 || !(params.mu > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "need n_samples >= 1 and mu > 0");
    }
    gripper.validate();

    const double cone = std::atan(params.mu);
    const Vec3 centroid = object.centroid();
    const std::size_t n = object.points.size();
    const auto trials = static_cast<std::size_t>(params.n_samples);
    std::vector<std::optional<Grasp>> found(trials);

    parallel_for(trials, [&](std::size_t begin, std::size_t end) {
        for (std::size_t trial = begin; trial < end; ++trial) {
            Rng rng(params.seed, trial);
            const std::size_t i = rng.index(n);
            const double phi = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
            const Vec3 &p1 = object.points[i];
            const Vec3 &n1 = object.normals[i];

            // Best partner by the largest of the three antipodal angles. The candidate set
            // for a smaller mu is a subset, so the choice is stable when it survives.
            std::size_t best = n;
            double best_score = cone;
            double best_cone_angle = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const Vec3 d = object.points[j] - p1;
                const double dist = d.norm();
                if (!(dist > 1e-9) || dist > gripper.max_width) {
                    continue;
                }
                const Vec3 dir = d / dist;
                const Vec3 &n2 = object.normals[j];
                const double a1 = angle_of(-dir.dot(n1));
                const double a2 = angle_of(dir.dot(n2));
                const double a3 = angle_of(-n1.dot(n2));
                const double score = std::max({a1, a2, a3});
                if (score < best_score || (score == best_score && best == n)) {
                    best = j;
                    best_score = score;
                    best_cone_angle = std::max(a1, a2);
                }
            }
            if (best == n) {
                continue;
            }
            const Vec3 &p2 = object.points[best];
            const Vec3 x = (p2 - p1).normalized();
            const Vec3 mid = 0.5 * (p1 + p2);
            Vec3 toward = centroid - mid;
            toward -= toward.dot(x) * x;
            const Vec3 b1 = toward.norm() > 1e-6 ? Vec3(toward.normalized()) : perpendicular_to(x);
            const Vec3 b2 = x.cross(b1);
            const Vec3 z = std::cos(phi) * b1 + std::sin(phi) * b2;
            Mat3 r;
            r.col(0) = x;
            r.col(1) = z.cross(x);
            r.col(2) = z;

            Grasp g;
            g.pose = {Quat::from_matrix(r), mid};
            g.width = std::min((p2 - p1).norm() + 2.0 * gripper.safety_clearance, gripper.max_width);
            g.quality = std::clamp(1.0 - best_cone_angle / cone, 0.0, 1.0);
            found[trial] = g;
        }
    });

    // Duplicate suppression on a 5 mm / 10 degree grid: one grasp per occupied cell,
    // first trial wins. Cell occupancy is monotone in the candidate set.
    constexpr double kCellPos = 0.005;
    constexpr double kCellRot = 10.0 * std::numbers::pi / 180.0;
    std::set<std::array<long, 6>> occupied;
    std::vector<Grasp> grasps;
    for (const auto &g : found) {
        if (!g) {
            continue;
        }
        const Vec3 rv = g->pose.rotation.to_axis_angle();
        std::array<long, 6> key{};
        for (int k = 0; k < 3; ++k) {
            key[static_cast<std::size_t>(k)] = static_cast<long>(std::floor(g->pose.translation[k] / kCellPos));
            key[static_cast<std::size_t>(k + 3)] = static_cast<long>(std::floor(rv[k] / kCellRot));
        }
        if (occupied.insert(key).second) {
            grasps.push_back(*g);
        }
    }
    return grasps;
}

std::vector<Grasp>
filter_unsafe(const std::vector<Grasp> &grasps, const LabeledPointCloud &hand, const GripperModel &gripper) {
    if (hand.points.empty()) {
        throw Error(ErrorCode::EmptyHandCloud, "safety filtering needs a non-empty hand cloud");
    }
    std::vector<char> keep(grasps.size(), 0);
    parallel_for(grasps.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Pose to_grasp = inverse(grasps[i].pose);
            const SweptVolume volume = swept_volume(grasps[i], gripper);
            keep[i] = std::none_of(hand.points.begin(), hand.points.end(),
                                   [&](const Vec3 &p) { return volume.contains(to_grasp.transform(p)); });
        }
    });
    std::vector<Grasp> safe;
    for (std::size_t i = 0; i < grasps.size(); ++i) {
        if (keep[i]) {
            safe.push_back(grasps[i]);
            safe.back().safe = true;
        }
    }
    return safe;
}

Grasp
align_to_scene(const Grasp &grasp, const Pose &offset) {
    Grasp out = grasp;
    out.pose = compose(offset, grasp.pose);
    return out;
}

Pose
pre_grasp_pose(const Grasp &grasp, double standoff) {
    if (!(standoff > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "standoff must be positive");
    }
    return {grasp.pose.rotation, grasp.pose.translation - standoff * grasp.pose.axis(2)};
}

Grasp
canonicalize_roll(const Grasp &grasp, const Vec3 &up) {
    if (grasp.pose.axis(1).dot(up) <= 0.0) {
        return grasp;
    }
    Grasp out = grasp;
    out.pose.rotation = grasp.pose.rotation * Quat{0.0, 0.0, 0.0, 1.0};
    return out;
}

std::vector<std::size_t>
diverse_order(const std::vector<Grasp> &grasps) {
    std::vector<std::size_t> order;
    if (grasps.empty()) {
        return order;
    }
    std::vector<bool> used(grasps.size(), false);
    std::size_t first = 0;
    for (std::size_t i = 1; i < grasps.size(); ++i) {
        if (grasps[i].quality > grasps[first].quality) {
            first = i;
        }
    }
    order.push_back(first);
    used[first] = true;
    while (order.size() < grasps.size()) {
        std::size_t pick = grasps.size();
        double pick_angle = -1.0;
        for (std::size_t i = 0; i < grasps.size(); ++i) {
            if (used[i]) {
                continue;
            }
            double nearest = std::numbers::pi;
            for (const std::size_t j : order) {
                nearest = std::min(nearest, angle_of(grasps[i].pose.axis(2).dot(grasps[j].pose.axis(2))));
            }
            if (nearest > pick_angle ||
                (nearest == pick_angle && grasps[i].quality > grasps[pick].quality)) {
                pick = i;
                pick_angle = nearest;
            }
        }
        order.push_back(pick);
        used[pick] = true;
    }
    return order;
}

void
write_grasp_table(const std::filesystem::path &path, const std::vector<Grasp> &grasps) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    out << "# qw\tqx\tqy\tqz\ttx\tty\ttz\twidth\tquality\tsafe\n";
    char buf[32];
    for (const Grasp &g : grasps) {
        const auto pose = g.pose.to_array();
        for (double v : pose) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << '\t';
        }
        std::snprintf(buf, sizeof buf, "%.17g", g.width);
        out << buf << '\t';
        std::snprintf(buf, sizeof buf, "%.17g", g.quality);
        out << buf << '\t' << (g.safe ? 1 : 0) << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

std::vector<Grasp>
read_grasp_table(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::vector<Grasp> grasps;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::array<double, 7> pose{};
        Grasp g;
        int safe = 0;
        for (double &v : pose) {
            ls >> v;
        }
        ls >> g.width >> g.quality >> safe;
        if (!ls || (safe != 0 && safe != 1)) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": malformed grasp row");
        }
        g.pose = Pose::from_array(pose);
        g.safe = safe == 1;
        grasps.push_back(g);
    }
    return grasps;
}

} // namespace splatover
