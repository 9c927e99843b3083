// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0
//
// Procedural handover scenes: a textured primitive held by a capsule-bundle hand
// above a checkered table plane. Object Gaussians are laid on a jittered grid per
// face so silhouettes stay hole-free at the default density.

#include "splatover/error.hpp"
#include "splatover/random.hpp"
#include "splatover/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace splatover {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGoldenAngle = 2.399963229728653;
constexpr double kTangentScale = 0.6; // tangential std-dev as a fraction of sample spacing

struct Capsule {
    Vec3 a;
    Vec3 b;
    double radius;
};

Vec3
any_perpendicular(const Vec3 &n) {
    const Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return n.cross(ref).normalized();
}

class SceneBuilder {
  public:
    SceneBuilder(const SyntheticSceneSpec &spec, std::uint64_t seed)
        : mSpec(spec), mRng(seed, 0x5ce7e), mFrame{Quat::from_axis_angle(Vec3::UnitZ() * spec.object.yaw),
                                                     spec.object.center} {
        mHalf = 0.5 * spec.object.size;
        if (spec.object.shape != Primitive::Box) {
            mHalf.y() = mHalf.x();
        }
        if (spec.object.shape == Primitive::Sphere) {
            mHalf.z() = mHalf.x();
        }
        mSpacing = 1.0 / std::sqrt(spec.density);
    }

    GaussianScene build() {
        switch (mSpec.object.shape) {
        case Primitive::Box: add_box(); break;
        case Primitive::Cylinder: add_cylinder(); break;
        case Primitive::Sphere: add_sphere(); break;
        }
        if (mSpec.hand) {
            add_hand(*mSpec.hand);
        }
        if (mSpec.background) {
            add_background(*mSpec.background);
            mScene.table_height = mSpec.background->height;
        }
        mScene.up_axis = Vec3::UnitZ();
        return std::move(mScene);
    }

  private:
    Vec3 face_color(std::size_t i) const {
        const auto &colors = mSpec.object.colors;
        return colors[i % colors.size()];
    }

    Vec3 jitter_color(const Vec3 &base, double amount) {
        Vec3 c = base;
        for (int k = 0; k < 3; ++k) {
            c[k] = std::clamp(c[k] + mRng.uniform(-amount, amount), 0.0, 1.0);
        }
        return c;
    }

    /// Surface splat in the object's local frame with tangent-aligned anisotropic scale.
    void add_local_surface(const Vec3 &p, const Vec3 &normal, double spacing, const Vec3 &color, Label label) {
        add_world_surface(mFrame.transform(p), mFrame.rotation.rotate(normal), spacing, color, label);
    }

    void add_world_surface(const Vec3 &p, const Vec3 &normal, double spacing, const Vec3 &color, Label label) {
        const Vec3 n = normal.normalized();
        const Vec3 t1 = any_perpendicular(n);
        const Vec3 t2 = n.cross(t1);
        Mat3 r;
        r.col(0) = t1;
        r.col(1) = t2;
        r.col(2) = n;
        const double sigma_t = kTangentScale * spacing;
        const double sigma_n = std::max(0.1 * sigma_t, 2e-4);
        Gaussian g;
        g.mean = p;
        g.rotation = Quat::from_matrix(r);
        g.log_scale = Vec3(std::log(sigma_t), std::log(sigma_t), std::log(sigma_n));
        g.opacity = mSpec.opacity;
        g.color = jitter_color(color, 0.03);
        g.label = label;
        mScene.gaussians.push_back(g);
    }

    /// Jittered grid over a rectangle spanned by (u, v) half-extents around `center`.
    void add_rect(const Vec3 &center, const Vec3 &u_axis, const Vec3 &v_axis, double hu, double hv,
                  const Vec3 &normal, const Vec3 &color) {
        const int nu = std::max(1, static_cast<int>(std::lround(2.0 * hu / mSpacing)));
        const int nv = std::max(1, static_cast<int>(std::lround(2.0 * hv / mSpacing)));
        for (int i = 0; i < nu; ++i) {
            for (int j = 0; j < nv; ++j) {
                const double a = -hu + 2.0 * hu * (i + mRng.uniform()) / nu;
                const double b = -hv + 2.0 * hv * (j + mRng.uniform()) / nv;
                add_local_surface(center + a * u_axis + b * v_axis, normal, mSpacing, color, Label::Object);
            }
        }
    }

    void add_box() {
        const Vec3 h = mHalf;
        const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
        add_rect(h.x() * ex, ey, ez, h.y(), h.z(), ex, face_color(0));
        add_rect(-h.x() * ex, ez, ey, h.z(), h.y(), -ex, face_color(1));
        add_rect(h.y() * ey, ez, ex, h.z(), h.x(), ey, face_color(2));
        add_rect(-h.y() * ey, ex, ez, h.x(), h.z(), -ey, face_color(3));
        add_rect(h.z() * ez, ex, ey, h.x(), h.y(), ez, face_color(4));
        add_rect(-h.z() * ez, ey, ex, h.y(), h.x(), -ez, face_color(5));
    }

    void add_disc(double z, double radius, const Vec3 &normal, const Vec3 &color) {
        const auto n = std::max<long>(1, std::lround(kPi * radius * radius / (mSpacing * mSpacing)));
        const double offset = mRng.uniform(0.0, 2.0 * kPi);
        for (long i = 0; i < n; ++i) {
            const double r = radius * std::sqrt((static_cast<double>(i) + 0.5) / static_cast<double>(n));
            const double th = offset + kGoldenAngle * static_cast<double>(i);
            add_local_surface({r * std::cos(th), r * std::sin(th), z}, normal, mSpacing, color, Label::Object);
        }
    }

    void add_cylinder() {
        const double r = mHalf.x();
        const double hz = mHalf.z();
        const int nt = std::max(3, static_cast<int>(std::lround(2.0 * kPi * r / mSpacing)));
        const int nz = std::max(1, static_cast<int>(std::lround(2.0 * hz / mSpacing)));
        for (int i = 0; i < nt; ++i) {
            for (int j = 0; j < nz; ++j) {
                const double th = 2.0 * kPi * (i + mRng.uniform()) / nt;
                const double z = -hz + 2.0 * hz * (j + mRng.uniform()) / nz;
                const Vec3 n(std::cos(th), std::sin(th), 0.0);
                add_local_surface(Vec3(r * n.x(), r * n.y(), z), n, mSpacing, face_color(0), Label::Object);
            }
        }
        add_disc(hz, r, Vec3::UnitZ(), face_color(1));
        add_disc(-hz, r, -Vec3::UnitZ(), face_color(2));
    }

    void add_sphere() {
        const double r = mHalf.x();
        const auto n = std::max<long>(4, std::lround(4.0 * kPi * r * r / (mSpacing * mSpacing)));
        const double offset = mRng.uniform(0.0, 2.0 * kPi);
        for (long i = 0; i < n; ++i) {
            const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double th = offset + kGoldenAngle * static_cast<double>(i);
            const Vec3 dir(rho * std::cos(th), rho * std::sin(th), z);
            add_local_surface(r * dir, dir, mSpacing, face_color(z > 0.0 ? 0 : 1), Label::Object);
        }
    }

    bool inside_object(const Vec3 &local) const {
        switch (mSpec.object.shape) {
        case Primitive::Box:
            return std::abs(local.x()) < mHalf.x() && std::abs(local.y()) < mHalf.y() &&
                   std::abs(local.z()) < mHalf.z();
        case Primitive::Cylinder:
            return local.head<2>().norm() < mHalf.x() && std::abs(local.z()) < mHalf.z();
        case Primitive::Sphere: return local.norm() < mHalf.x();
        }
        return false;
    }

    void add_capsule(const Capsule &c, const Vec3 &color) {
        const Vec3 axis = c.b - c.a;
        const double length = axis.norm();
        const Vec3 dir = length > 1e-12 ? Vec3(axis / length) : Vec3::UnitZ();
        const Vec3 e1 = any_perpendicular(dir);
        const Vec3 e2 = dir.cross(e1);
        const double area = 2.0 * kPi * c.radius * length + 4.0 * kPi * c.radius * c.radius;
        const auto n = std::max<long>(1, std::lround(area * mSpec.density));
        const double side_fraction = 2.0 * kPi * c.radius * length / area;
        for (long i = 0; i < n; ++i) {
            Vec3 local_point, normal;
            if (mRng.uniform() < side_fraction) {
                const double th = mRng.uniform(0.0, 2.0 * kPi);
                normal = std::cos(th) * e1 + std::sin(th) * e2;
                local_point = c.a + mRng.uniform() * axis + c.radius * normal;
            } else {
                // Uniform direction on the sphere; the hemisphere picks the end cap.
                const double z = mRng.uniform(-1.0, 1.0);
                const double th = mRng.uniform(0.0, 2.0 * kPi);
                const double rho = std::sqrt(1.0 - z * z);
                normal = rho * std::cos(th) * e1 + rho * std::sin(th) * e2 + z * dir;
                local_point = (z >= 0.0 ? c.b : c.a) + c.radius * normal;
            }
            if (inside_object(local_point)) {
                continue;
            }
            add_local_surface(local_point, normal, mSpacing, color, Label::Hand);
        }
    }

    void add_polyline(const std::vector<Vec3> &pts, double radius, const Vec3 &color) {
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            add_capsule({pts[i], pts[i + 1], radius}, color);
        }
    }

    void add_hand(const HandSpec &hand) {
        const double fr = hand.finger_radius;
        const Vec3 h = mHalf;
        if (hand.grip == HandGrip::Side) {
            // Human stands on the -x side and holds the lower part of the object.
            const double xb = -h.x() - fr;
            const double palm_top = std::min(-h.z() + 0.08, 0.0);
            for (double y : {-0.02, 0.0, 0.02}) {
                const double yy = std::clamp(y, -h.y(), h.y());
                add_capsule({{xb - 0.003, yy, -h.z() + fr}, {xb - 0.003, yy, palm_top}, fr}, hand.color);
            }
            for (int k = 0; k < 3; ++k) {
                const double z = -h.z() + 0.012 + 0.019 * k;
                add_polyline({{xb, 0.6 * h.y(), z}, {xb, h.y() + fr, z}, {0.4 * h.x(), h.y() + fr, z}}, fr,
                             hand.color);
            }
            const double zt = -h.z() + 0.03;
            add_polyline({{xb, -0.6 * h.y(), zt}, {xb, -h.y() - fr, zt}, {0.0, -h.y() - fr, zt}}, 1.1 * fr,
                         hand.color);
            add_capsule({{xb - 0.02, 0.0, -h.z() + 0.04}, {xb - 0.25, 0.0, -h.z() - 0.05}, 0.025}, hand.color);
        } else {
            // Closed glove: rings around the sides plus bars over both caps.
            const double gap = fr;
            const double xr = h.x() + gap, yr = h.y() + gap;
            const double pitch = 0.015;
            const int rings = std::max(2, static_cast<int>(std::ceil(2.0 * h.z() / pitch)) + 1);
            for (int k = 0; k < rings; ++k) {
                const double z = -h.z() + 2.0 * h.z() * k / (rings - 1);
                add_polyline({{xr, yr, z}, {-xr, yr, z}, {-xr, -yr, z}, {xr, -yr, z}, {xr, yr, z}}, fr, hand.color);
            }
            const int bars = std::max(2, static_cast<int>(std::ceil(2.0 * h.x() / pitch)) + 1);
            for (int k = 0; k < bars; ++k) {
                const double x = -h.x() + 2.0 * h.x() * k / (bars - 1);
                add_capsule({{x, -yr, h.z() + gap}, {x, yr, h.z() + gap}, fr}, hand.color);
                add_capsule({{x, -yr, -h.z() - gap}, {x, yr, -h.z() - gap}, fr}, hand.color);
            }
            add_capsule({{-xr - 0.02, 0.0, 0.0}, {-xr - 0.25, 0.0, -0.08}, 0.025}, hand.color);
        }
    }

    void add_background(const BackgroundSpec &bg) {
        const double spacing = 1.0 / std::sqrt(bg.density);
        const int n = std::max(1, static_cast<int>(std::lround(2.0 * bg.half_extent / spacing)));
        const Vec3 c(mSpec.object.center.x(), mSpec.object.center.y(), bg.height);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double u = -bg.half_extent + 2.0 * bg.half_extent * (i + mRng.uniform()) / n;
                const double v = -bg.half_extent + 2.0 * bg.half_extent * (j + mRng.uniform()) / n;
                const auto cu = static_cast<long>(std::floor(u / bg.checker));
                const auto cv = static_cast<long>(std::floor(v / bg.checker));
                const Vec3 color = ((cu + cv) % 2 == 0) ? bg.color_a : bg.color_b;
                add_world_surface(c + Vec3(u, v, 0.0), Vec3::UnitZ(), spacing, color, Label::Background);
            }
        }
    }

    const SyntheticSceneSpec &mSpec;
    Rng mRng;
    Pose mFrame;
    Vec3 mHalf;
    double mSpacing;
    GaussianScene mScene;
};

} // namespace

void
SyntheticSceneSpec::validate() const {
    auto fail = [](const std::string &what) { throw Error(ErrorCode::InvalidSpec, what); };
    if (!(density > 0.0) || !std::isfinite(density)) {
        fail("density must be positive");
    }
    if (!(opacity > 0.0 && opacity <= 1.0)) {
        fail("opacity must lie in (0, 1]");
    }
    if (!(object.size.minCoeff() > 0.0) || !object.size.allFinite()) {
        fail("object dimensions must be positive");
    }
    if (object.colors.empty()) {
        fail("object needs at least one color");
    }
    if (hand && !(hand->finger_radius > 0.0)) {
        fail("finger_radius must be positive");
    }
    if (background && (!(background->density > 0.0) || !(background->half_extent > 0.0) ||
                       !(background->checker > 0.0))) {
        fail("background density, half_extent and checker must be positive");
    }
}

GaussianScene
build_synthetic_scene(const SyntheticSceneSpec &spec, std::uint64_t seed) {
    spec.validate();
    return SceneBuilder(spec, seed).build();
}

} // namespace splatover
