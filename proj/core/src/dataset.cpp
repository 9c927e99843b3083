// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/demo.hpp"
#include "splatover/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace splatover {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json
pose_json(const Pose &p) {
    const auto a = p.to_array();
    return json(std::vector<double>(a.begin(), a.end()));
}

Pose
pose_from(const json &j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 7) {
        throw Error(ErrorCode::IoError, "pose array must have 7 entries");
    }
    return Pose::from_array(std::span<const double, 7>(v.data(), 7));
}

json
vec3_json(const Vec3 &v) {
    return json::array({v.x(), v.y(), v.z()});
}

Vec3
vec3_from(const json &j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) {
        throw Error(ErrorCode::IoError, "vector must have 3 entries");
    }
    return {v[0], v[1], v[2]};
}

std::string
indexed(const char *fmt, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, i);
    return buf;
}

Image8
mask_from_display(const Image8 &img) {
    Image8 out(img.width, img.height, 1);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = img.data[i * static_cast<std::size_t>(img.channels)] > 127 ? 1 : 0;
    }
    return out;
}

} // namespace

void
write_dataset(const Dataset &dataset, const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    const CameraIntrinsics &cam = dataset.camera;
    const StartSamplerConfig &s = dataset.sampler;
    const TrajectoryConfig &t = dataset.trajectory;
    json manifest = {
        {"schema_version", kDatasetSchemaVersion},
        {"camera",
         {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width},
          {"height", cam.height}, {"near", cam.near}, {"far", cam.far}}},
        {"sampler",
         {{"r_min", s.r_min}, {"r_max", s.r_max}, {"elevation_min", s.elevation_min},
          {"elevation_max", s.elevation_max}, {"azimuth_min", s.azimuth_min}, {"azimuth_max", s.azimuth_max},
          {"min_hand_distance", s.min_hand_distance}, {"max_tilt_from_approach", s.max_tilt_from_approach},
          {"occlusion_radius", s.occlusion_radius}, {"orientation_jitter", s.orientation_jitter},
          {"n_starts", s.n_starts}}},
        {"trajectory",
         {{"k1", t.k1}, {"k2_step", t.k2_step}, {"k3", t.k3}, {"d_switch", t.d_switch},
          {"center_tolerance", t.center_tolerance}}},
        {"discards", dataset.discards},
        {"episodes", json::array()},
    };

    for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
        const DemoEpisode &ep = dataset.episodes[e];
        const std::string name = indexed("ep_%05zu", e);
        const fs::path ep_dir = dir / name;
        fs::create_directories(ep_dir, ec);
        if (ec) {
            throw Error(ErrorCode::IoError, "cannot create " + ep_dir.string() + ": " + ec.message());
        }
        std::ofstream lines(ep_dir / "steps.jsonl");
        for (std::size_t i = 0; i < ep.steps.size(); ++i) {
            const DemoStep &step = ep.steps[i];
            const std::string stem = indexed("step_%03zu", i);
            write_png(ep_dir / (stem + ".png"), step.rgb);
            write_png(ep_dir / (stem + "_obj.png"), mask_to_display(step.object_mask));
            write_png(ep_dir / (stem + "_hand.png"), mask_to_display(step.hand_mask));
            const json row = {{"pose", pose_json(step.camera_pose)},
                              {"action_t", vec3_json(step.action.translation)},
                              {"action_r", vec3_json(step.action.rotation)},
                              {"grasp", step.grasp_label},
                              {"phase", step.phase}};
            lines << row.dump() << '\n';
        }
        if (!lines) {
            throw Error(ErrorCode::IoError, "failed writing " + (ep_dir / "steps.jsonl").string());
        }
        manifest["episodes"].push_back({{"dir", name},
                                        {"scene_id", ep.scene_id},
                                        {"n_steps", ep.steps.size()},
                                        {"start_pose", pose_json(ep.start_pose)},
                                        {"pre_grasp", pose_json(ep.pre_grasp)},
                                        {"grasp",
                                         {{"pose", pose_json(ep.grasp.pose)},
                                          {"width", ep.grasp.width},
                                          {"quality", ep.grasp.quality},
                                          {"safe", ep.grasp.safe}}}});
    }

    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + (dir / "manifest.json").string());
    }
}

Dataset
read_dataset(const fs::path &dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw Error(ErrorCode::SchemaVersionMismatch, "no manifest.json in " + dir.string());
    }
    Dataset ds;
    try {
        const json m = json::parse(in);
        if (!m.contains("schema_version") || m.at("schema_version").get<int>() != kDatasetSchemaVersion) {
            throw Error(ErrorCode::SchemaVersionMismatch,
                        manifest_path.string() + ": expected schema_version " + std::to_string(kDatasetSchemaVersion));
        }
        const json &c = m.at("camera");
        ds.camera = {c.at("fx"), c.at("fy"), c.at("cx"), c.at("cy"), c.at("width"), c.at("height"),
                     c.at("near"), c.at("far")};
        const json &s = m.at("sampler");
        ds.sampler.r_min = s.at("r_min");
        ds.sampler.r_max = s.at("r_max");
        ds.sampler.elevation_min = s.at("elevation_min");
        ds.sampler.elevation_max = s.at("elevation_max");
        ds.sampler.azimuth_min = s.at("azimuth_min");
        ds.sampler.azimuth_max = s.at("azimuth_max");
        ds.sampler.min_hand_distance = s.at("min_hand_distance");
        ds.sampler.max_tilt_from_approach = s.at("max_tilt_from_approach");
        ds.sampler.occlusion_radius = s.at("occlusion_radius");
        ds.sampler.orientation_jitter = s.at("orientation_jitter");
        ds.sampler.n_starts = s.at("n_starts");
        const json &t = m.at("trajectory");
        ds.trajectory = {t.at("k1"), t.at("k2_step"), t.at("k3"), t.at("d_switch"), t.at("center_tolerance")};
        ds.discards = m.at("discards").get<std::map<std::string, std::size_t>>();

        for (const json &e : m.at("episodes")) {
            DemoEpisode ep;
            ep.scene_id = e.at("scene_id");
            ep.start_pose = pose_from(e.at("start_pose"));
            ep.pre_grasp = pose_from(e.at("pre_grasp"));
            const json &g = e.at("grasp");
            ep.grasp = {pose_from(g.at("pose")), g.at("width"), g.at("quality"), g.at("safe")};
            const fs::path ep_dir = dir / e.at("dir").get<std::string>();
            const auto n_steps = e.at("n_steps").get<std::size_t>();

            std::ifstream lines(ep_dir / "steps.jsonl");
            if (!lines) {
                throw Error(ErrorCode::IoError, "missing " + (ep_dir / "steps.jsonl").string());
            }
            std::string line;
            for (std::size_t i = 0; i < n_steps; ++i) {
                if (!std::getline(lines, line)) {
                    throw Error(ErrorCode::IoError, (ep_dir / "steps.jsonl").string() + ": expected " +
                                                        std::to_string(n_steps) + " rows");
                }
                const json row = json::parse(line);
                DemoStep step;
                step.camera_pose = pose_from(row.at("pose"));
                step.action = {vec3_from(row.at("action_t")), vec3_from(row.at("action_r"))};
                step.grasp_label = row.at("grasp");
                step.phase = row.at("phase");
                const std::string stem = indexed("step_%03zu", i);
                step.rgb = read_png(ep_dir / (stem + ".png"));
                step.object_mask = mask_from_display(read_png(ep_dir / (stem + "_obj.png")));
                step.hand_mask = mask_from_display(read_png(ep_dir / (stem + "_hand.png")));
                ep.steps.push_back(std::move(step));
            }
            ds.episodes.push_back(std::move(ep));
        }
    } catch (const json::exception &err) {
        throw Error(ErrorCode::IoError, manifest_path.string() + ": " + err.what());
    }
    return ds;
}

} // namespace splatover
