// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "pipeline.hpp"

#include "splatover/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace splatover::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void
config_error(const std::string &msg) {
    throw Error(ErrorCode::ConfigError, msg);
}

// Reads keys from one JSON object and remembers which were consumed, so leftovers can be
// reported as unknown.
class Section {
  public:
    Section(const json &j, std::string path) : mJson(j), mPath(std::move(path)) {
        if (!mJson.is_object()) {
            config_error(mPath + " must be an object");
        }
    }

    [[nodiscard]] bool has(const char *key) const { return mJson.contains(key); }

    void
    get(const char *key, double &out) {
        if (const json *v = take(key)) {
            if (!v->is_number()) {
                bad(key, "a number");
            }
            out = v->get<double>();
        }
    }
    void
    get(const char *key, int &out) {
        if (const json *v = take(key)) {
            if (!v->is_number_integer()) {
                bad(key, "an integer");
            }
            out = v->get<int>();
        }
    }
    void
    get(const char *key, bool &out) {
        if (const json *v = take(key)) {
            if (!v->is_boolean()) {
                bad(key, "a boolean");
            }
            out = v->get<bool>();
        }
    }
    void
    get(const char *key, std::string &out) {
        if (const json *v = take(key)) {
            if (!v->is_string()) {
                bad(key, "a string");
            }
            out = v->get<std::string>();
        }
    }
    void
    get(const char *key, Vec3 &out) {
        if (const json *v = take(key)) {
            out = vec3(*v, key);
        }
    }
    void
    get_degrees(const char *key, double &radians) {
        double deg = radians / kDeg;
        get(key, deg);
        radians = deg * kDeg;
    }
    void
    get(const char *key, Pose &out) {
        if (const json *v = take(key)) {
            if (!v->is_array() || v->size() != 7 ||
                !std::all_of(v->begin(), v->end(), [](const json &e) { return e.is_number(); })) {
                bad(key, "[qw, qx, qy, qz, tx, ty, tz]");
            }
            const auto a = v->get<std::vector<double>>();
            out = Pose::from_array(std::span<const double, 7>(a.data(), 7));
        }
    }

    Vec3
    vec3(const json &v, const std::string &key) const {
        if (!v.is_array() || v.size() != 3 ||
            !std::all_of(v.begin(), v.end(), [](const json &e) { return e.is_number(); })) {
            bad(key, "a 3-element numeric array");
        }
        return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }

    /// Sub-object, or nullopt when absent. An explicit null is reported through `is_null`.
    std::optional<Section>
    child(const char *key) {
        const json *v = take(key);
        if (!v || v->is_null()) {
            return std::nullopt;
        }
        return Section(*v, mPath + "." + key);
    }
    [[nodiscard]] bool
    is_null(const char *key) const {
        return mJson.contains(key) && mJson.at(key).is_null();
    }
    const json *
    raw(const char *key) {
        return take(key);
    }

    void
    finish() const {
        for (const auto &item : mJson.items()) {
            if (!mSeen.contains(item.key())) {
                config_error("unknown key " + mPath + "." + item.key());
            }
        }
    }

    [[noreturn]] void
    bad(const std::string &key, const std::string &expected) const {
        config_error(mPath + "." + key + " must be " + expected);
    }

  private:
    const json *
    take(const char *key) {
        mSeen.insert(key);
        auto it = mJson.find(key);
        return it == mJson.end() ? nullptr : &*it;
    }

    const json &mJson;
    std::string mPath;
    std::set<std::string> mSeen;
};

Primitive
parse_shape(const std::string &s, Section &sec) {
    if (s == "box") return Primitive::Box;
    if (s == "cylinder") return Primitive::Cylinder;
    if (s == "sphere") return Primitive::Sphere;
    sec.bad("shape", "one of box, cylinder, sphere");
}

void
parse_synthetic(Section s, SyntheticSceneSpec &spec) {
    if (auto o = s.child("object")) {
        std::string shape = "box";
        o->get("shape", shape);
        spec.object.shape = parse_shape(shape, *o);
        o->get("size", spec.object.size);
        o->get("center", spec.object.center);
        o->get("yaw", spec.object.yaw);
        if (const json *c = o->raw("colors")) {
            if (!c->is_array()) {
                o->bad("colors", "an array of RGB triples");
            }
            spec.object.colors.clear();
            for (const json &e : *c) {
                spec.object.colors.push_back(o->vec3(e, "colors"));
            }
        }
        o->finish();
    }
    if (s.is_null("hand")) {
        spec.hand.reset();
    }
    if (auto h = s.child("hand")) {
        HandSpec hand;
        std::string grip = "side";
        h->get("grip", grip);
        if (grip == "side") {
            hand.grip = HandGrip::Side;
        } else if (grip == "enclose") {
            hand.grip = HandGrip::Enclose;
        } else {
            h->bad("grip", "side or enclose");
        }
        h->get("finger_radius", hand.finger_radius);
        h->get("color", hand.color);
        h->finish();
        spec.hand = hand;
    }
    if (s.is_null("background")) {
        spec.background.reset();
    }
    if (auto b = s.child("background")) {
        BackgroundSpec bg;
        b->get("height", bg.height);
        b->get("half_extent", bg.half_extent);
        b->get("density", bg.density);
        b->get("color_a", bg.color_a);
        b->get("color_b", bg.color_b);
        b->get("checker", bg.checker);
        b->finish();
        spec.background = bg;
    }
    s.get("density", spec.density);
    s.get("opacity", spec.opacity);
    s.finish();
}

template <typename F>
void
validated(const char *section, F &&check) {
    try {
        check();
    } catch (const Error &e) {
        config_error(std::string(section) + ": " + e.what());
    }
}

} // namespace

PipelineConfig
parse_config(const std::string &text, const std::string &origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        config_error(origin + ": " + e.what());
    }
    PipelineConfig cfg;
    Section root(doc, origin);
    int version = -1;
    root.get("schema_version", version);
    if (version != kConfigSchemaVersion) {
        config_error(origin + ": schema_version must be " + std::to_string(kConfigSchemaVersion));
    }

    if (auto s = root.child("scene")) {
        std::string ply, labels;
        s->get("ply", ply);
        s->get("labels", labels);
        if (!ply.empty() || !labels.empty()) {
            if (ply.empty() || labels.empty()) {
                config_error(origin + ".scene: ply and labels must be given together");
            }
            cfg.scene.ply = ply;
            cfg.scene.labels = labels;
        }
        if (auto syn = s->child("synthetic")) {
            parse_synthetic(std::move(*syn), cfg.scene.synthetic);
        }
        s->finish();
    }
    if (auto s = root.child("camera")) {
        CameraIntrinsics &c = cfg.camera;
        s->get("fx", c.fx);
        s->get("fy", c.fy);
        s->get("cx", c.cx);
        s->get("cy", c.cy);
        s->get("width", c.width);
        s->get("height", c.height);
        s->get("near", c.near);
        s->get("far", c.far);
        s->finish();
    }
    if (auto s = root.child("render")) {
        RenderSettings &r = cfg.render;
        s->get("background", r.background);
        s->get("alpha_cap", r.alpha_cap);
        s->get("transmittance_stop", r.transmittance_stop);
        s->get("covariance_floor", r.covariance_floor);
        s->finish();
    }
    if (auto s = root.child("gripper")) {
        GripperModel &g = cfg.gripper;
        s->get("max_width", g.max_width);
        s->get("finger_depth", g.finger_depth);
        s->get("finger_thickness", g.finger_thickness);
        s->get("palm_clearance", g.palm_clearance);
        s->get("safety_clearance", g.safety_clearance);
        s->finish();
    }
    if (auto s = root.child("grasp")) {
        GraspConfig &g = cfg.grasp;
        s->get("n_samples", g.n_samples);
        s->get("mu", g.mu);
        s->get("opacity_min", g.opacity_min);
        s->get("normal_k", g.normal_k);
        s->get("offset", g.offset);
        s->get("standoff", g.standoff);
        s->get("max_grasps", g.max_grasps);
        s->finish();
    }
    if (auto s = root.child("sampler")) {
        StartSamplerConfig &m = cfg.sampler;
        s->get("r_min", m.r_min);
        s->get("r_max", m.r_max);
        s->get_degrees("elevation_min_deg", m.elevation_min);
        s->get_degrees("elevation_max_deg", m.elevation_max);
        s->get_degrees("azimuth_min_deg", m.azimuth_min);
        s->get_degrees("azimuth_max_deg", m.azimuth_max);
        s->get("min_hand_distance", m.min_hand_distance);
        s->get_degrees("max_tilt_from_approach_deg", m.max_tilt_from_approach);
        s->get("occlusion_radius", m.occlusion_radius);
        s->get_degrees("orientation_jitter_deg", m.orientation_jitter);
        s->get("n_starts", m.n_starts);
        s->finish();
    }
    if (auto s = root.child("trajectory")) {
        TrajectoryConfig &t = cfg.trajectory;
        s->get("k1", t.k1);
        s->get("k2_step", t.k2_step);
        s->get("k3", t.k3);
        s->get("d_switch", t.d_switch);
        s->get("center_tolerance", t.center_tolerance);
        s->finish();
    }
    if (auto s = root.child("policy")) {
        PolicyArchitecture &a = cfg.policy;
        s->get("coord_channels", a.coord_channels);
        s->get("c1", a.c1);
        s->get("c2", a.c2);
        s->get("c3", a.c3);
        s->get("k1", a.k1);
        s->get("k2", a.k2);
        s->get("k3", a.k3);
        s->get("hidden", a.hidden);
        s->get("t_max", a.t_max);
        s->get("r_max", a.r_max);
        s->finish();
    }
    if (auto s = root.child("train")) {
        TrainConfig &t = cfg.train;
        s->get("epochs", t.epochs);
        s->get("batch_size", t.batch_size);
        s->get("learning_rate", t.learning_rate);
        s->get("momentum", t.momentum);
        s->get("grad_clip", t.grad_clip);
        s->finish();
    }
    if (auto s = root.child("loss")) {
        s->get("lambda_t", cfg.loss.lambda_t);
        s->get("lambda_r", cfg.loss.lambda_r);
        s->get("lambda_g", cfg.loss.lambda_g);
        s->finish();
    }
    if (auto s = root.child("rollout")) {
        RolloutConfig &r = cfg.rollout;
        s->get("max_steps", r.max_steps);
        s->get("grasp_threshold", r.grasp_threshold);
        s->get("pos_tol", r.pos_tol);
        s->get("rot_tol", r.rot_tol);
        s->get("collision_distance", r.collision_distance);
        s->finish();
    }
    if (auto s = root.child("eval")) {
        EvalConfig &e = cfg.eval;
        s->get("controller", e.controller);
        s->get("n_starts_per_grasp", e.n_starts_per_grasp);
        s->get("strip_frames", e.strip_frames);
        s->get("strip_scale", e.strip_scale);
        s->finish();
        if (e.controller != "policy" && e.controller != "replay" && e.controller != "zero") {
            config_error(origin + ".eval.controller must be policy, replay or zero");
        }
        if (e.n_starts_per_grasp < 1 || e.strip_frames < 1 || e.strip_scale < 1) {
            config_error(origin + ".eval: counts must be >= 1");
        }
    }
    root.finish();

    // The training resolution follows the camera.
    cfg.policy.height = cfg.camera.height;
    cfg.policy.width = cfg.camera.width;
    cfg.rollout.render = cfg.render;

    validated("scene.synthetic", [&] { cfg.scene.synthetic.validate(); });
    validated("camera", [&] { cfg.camera.validate(); });
    validated("gripper", [&] { cfg.gripper.validate(); });
    validated("sampler", [&] { cfg.sampler.validate(); });
    validated("trajectory", [&] { cfg.trajectory.validate(); });
    validated("policy", [&] { cfg.policy.validate(); });
    validated("train", [&] { cfg.train.validate(); });
    validated("loss", [&] { cfg.loss.validate(); });
    validated("rollout", [&] { cfg.rollout.validate(); });
    const GraspConfig &g = cfg.grasp;
    if (g.n_samples < 1 || !(g.mu > 0.0) || g.opacity_min < 0.0 || g.opacity_min > 1.0 || g.normal_k < 3 ||
        !(g.standoff > 0.0) || g.max_grasps < 1) {
        config_error(origin + ".grasp: invalid values");
    }
    return cfg;
}

PipelineConfig
load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        config_error("cannot read config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

} // namespace splatover::pipeline
