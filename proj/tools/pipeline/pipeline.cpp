// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "pipeline.hpp"

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"
#include "splatover/random.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>

namespace splatover::pipeline {

namespace fs = std::filesystem;

std::uint64_t
stage_seed(std::uint64_t seed, Stage stage) {
    return stream_seed(seed, static_cast<std::uint64_t>(stage));
}

GaussianScene
build_scene(const PipelineConfig &cfg, std::uint64_t seed) {
    if (cfg.scene.ply) {
        return load_scene(*cfg.scene.ply, *cfg.scene.labels);
    }
    return build_synthetic_scene(cfg.scene.synthetic, seed);
}

SceneBundle
prepare_scene(GaussianScene scene, const PipelineConfig &cfg) {
    SceneBundle b;
    b.object = estimate_normals(extract_point_cloud(scene, Label::Object, cfg.grasp.opacity_min), cfg.grasp.normal_k);
    if (scene.count(Label::Hand) > 0) {
        b.hand = extract_point_cloud(scene, Label::Hand, cfg.grasp.opacity_min);
    } else {
        b.hand.label = Label::Hand;
    }
    b.object_centroid = object_centroid(scene);
    b.scene = std::move(scene);
    return b;
}

GraspResult
sample_grasps(const SceneBundle &bundle, const PipelineConfig &cfg, std::uint64_t seed) {
    const AntipodalParams params{cfg.grasp.n_samples, cfg.grasp.mu, seed};
    GraspResult r;
    for (const Grasp &g : sample_antipodal_grasps(bundle.object, cfg.gripper, params)) {
        r.candidates.push_back(canonicalize_roll(align_to_scene(g, cfg.grasp.offset), bundle.scene.up_axis));
    }
    r.safe = filter_unsafe(r.candidates, bundle.hand, cfg.gripper);
    return r;
}

std::vector<DemoPlan>
plan_demos(const SceneBundle &bundle, const std::vector<Grasp> &grasps, const PipelineConfig &cfg,
           std::uint64_t seed, int n_starts) {
    StartSamplerConfig sampler = cfg.sampler;
    sampler.n_starts = n_starts;
    std::vector<DemoPlan> plans;
    for (const std::size_t idx : diverse_order(grasps)) {
        if (static_cast<int>(plans.size()) >= cfg.grasp.max_grasps) {
            break;
        }
        try {
            plans.push_back({idx, sample_start_poses(grasps[idx], bundle.scene, bundle.hand, sampler,
                                                     stream_seed(seed, idx))});
        } catch (const Error &e) {
            if (e.code() != ErrorCode::SamplingExhausted) {
                throw;
            }
            spdlog::info("grasp {} skipped: {}", idx, e.what());
        }
    }
    return plans;
}

Dataset
generate_demos(const SceneBundle &bundle, const std::vector<Grasp> &grasps, const std::vector<DemoPlan> &plans,
               const PipelineConfig &cfg) {
    Dataset ds;
    ds.camera = cfg.camera;
    ds.sampler = cfg.sampler;
    ds.trajectory = cfg.trajectory;
    ds.discards = {{"centering_failed", 0},
                   {std::string(to_string(DiscardReason::ObjectNotVisible)), 0},
                   {std::string(to_string(DiscardReason::ActionOutOfBounds)), 0}};
    EpisodeConfig ec;
    ec.trajectory = cfg.trajectory;
    ec.render = cfg.render;
    ec.standoff = cfg.grasp.standoff;
    ec.up = bundle.scene.up_axis;
    const ActionBounds bounds{cfg.policy.t_max, cfg.policy.r_max};
    for (const DemoPlan &plan : plans) {
        for (const Pose &start : plan.starts) {
            DemoEpisode ep;
            try {
                ep = generate_episode(bundle.scene, cfg.camera, grasps[plan.grasp_index], start,
                                      bundle.object_centroid, ec);
            } catch (const Error &e) {
                if (e.code() != ErrorCode::CenteringFailed) {
                    throw;
                }
                ++ds.discards["centering_failed"];
                continue;
            }
            const DiscardReason reason = episode_discard_reason(ep, bounds);
            if (reason != DiscardReason::None) {
                ++ds.discards[std::string(to_string(reason))];
                continue;
            }
            ds.episodes.push_back(std::move(ep));
        }
    }
    return ds;
}

std::vector<EvalCase>
fresh_eval_cases(const SceneBundle &bundle, const std::vector<Grasp> &grasps, const PipelineConfig &cfg,
                 std::uint64_t demo_seed, std::uint64_t eval_seed) {
    StartSamplerConfig sampler = cfg.sampler;
    sampler.n_starts = cfg.eval.n_starts_per_grasp;
    std::vector<EvalCase> cases;
    for (const DemoPlan &plan : plan_demos(bundle, grasps, cfg, demo_seed, cfg.sampler.n_starts)) {
        const Grasp &g = grasps[plan.grasp_index];
        const Pose reference = pre_grasp_pose(g, cfg.grasp.standoff);
        for (const Pose &start :
             sample_start_poses(g, bundle.scene, bundle.hand, sampler, stream_seed(eval_seed, plan.grasp_index))) {
            cases.push_back({plan.grasp_index, start, reference});
        }
    }
    return cases;
}

std::vector<EvalCase>
replay_eval_cases(const Dataset &dataset, const std::vector<Grasp> &grasps) {
    std::vector<EvalCase> cases;
    for (const DemoEpisode &ep : dataset.episodes) {
        std::size_t idx = grasps.size();
        for (std::size_t i = 0; i < grasps.size(); ++i) {
            if (grasps[i].pose == ep.grasp.pose) {
                idx = i;
                break;
            }
        }
        cases.push_back({idx, ep.start_pose, ep.pre_grasp});
    }
    return cases;
}

namespace {

struct Paths {
    fs::path scene, labels, grasps, dataset, params, log, eval, strips;
    explicit Paths(const fs::path &out)
        : scene(out / "scene.ply"), labels(out / "scene.labels"), grasps(out / "grasps.tsv"),
          dataset(out / "dataset"), params(out / "policy.bin"), log(out / "train_log.tsv"),
          eval(out / "eval.json"), strips(out / "strips") {}
};

SceneBundle
load_bundle(const PipelineConfig &cfg, const Paths &p) {
    return prepare_scene(load_scene(p.scene, p.labels), cfg);
}

std::vector<Grasp>
load_safe_grasps(const Paths &p) {
    std::vector<Grasp> safe;
    for (const Grasp &g : read_grasp_table(p.grasps)) {
        if (g.safe) {
            safe.push_back(g);
        }
    }
    return safe;
}

CameraIntrinsics
scaled(const CameraIntrinsics &cam, int s) {
    CameraIntrinsics c = cam;
    c.fx *= s;
    c.fy *= s;
    c.cx = (cam.cx + 0.5) * s - 0.5;
    c.cy = (cam.cy + 0.5) * s - 0.5;
    c.width *= s;
    c.height *= s;
    return c;
}

} // namespace

int
cmd_build_scene(const PipelineConfig &cfg, const Options &opt) {
    const Paths p(opt.out);
    fs::create_directories(opt.out);
    const GaussianScene scene = build_scene(cfg, stage_seed(opt.seed, Stage::Scene));
    save_scene(scene, p.scene, p.labels);
    std::printf("gaussians: background %zu, hand %zu, object %zu\n", scene.count(Label::Background),
                scene.count(Label::Hand), scene.count(Label::Object));
    return kExitOk;
}

int
cmd_sample_grasps(const PipelineConfig &cfg, const Options &opt) {
    const Paths p(opt.out);
    const SceneBundle bundle = load_bundle(cfg, p);
    if (bundle.hand.points.empty()) {
        throw Error(ErrorCode::EmptyHandCloud, "scene has no Hand Gaussians above opacity_min");
    }
    const GraspResult r = sample_grasps(bundle, cfg, stage_seed(opt.seed, Stage::Grasps));
    write_grasp_table(p.grasps, r.safe);
    std::printf("grasps: %zu candidates, %zu safe\n", r.candidates.size(), r.safe.size());
    return r.safe.empty() ? kExitNoResult : kExitOk;
}

int
cmd_gen_demos(const PipelineConfig &cfg, const Options &opt) {
    const Paths p(opt.out);
    const SceneBundle bundle = load_bundle(cfg, p);
    const std::vector<Grasp> grasps = load_safe_grasps(p);
    if (grasps.empty()) {
        spdlog::warn("no safe grasps in {}", p.grasps.string());
        return kExitNoResult;
    }
    const std::uint64_t seed = stage_seed(opt.seed, Stage::Demos);
    const auto plans = plan_demos(bundle, grasps, cfg, seed, cfg.sampler.n_starts);
    const Dataset ds = generate_demos(bundle, grasps, plans, cfg);
    fs::remove_all(p.dataset);
    write_dataset(ds, p.dataset);
    std::size_t discarded = 0;
    for (const auto &[reason, n] : ds.discards) {
        discarded += n;
    }
    std::printf("episodes: %zu accepted (%zu steps), %zu discarded, %zu grasps used\n", ds.episodes.size(),
                ds.step_count(), discarded, plans.size());
    return ds.episodes.empty() ? kExitNoResult : kExitOk;
}

int
cmd_train(const PipelineConfig &cfg, const Options &opt) {
    const Paths p(opt.out);
    const Dataset ds = read_dataset(p.dataset);
    if (!(ds.camera == cfg.camera)) {
        throw Error(ErrorCode::ShapeMismatch, "dataset camera differs from the configured camera");
    }
    const SampleSet set = make_samples(ds);
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(opt.seed, Stage::Train);
    spdlog::info("training on {} steps, {} parameters", set.samples.size(), cfg.policy.param_count());
    const TrainResult r = train(set.samples, cfg.policy, tc, cfg.loss, [](const EpochLog &e) {
        spdlog::debug("epoch {} total {:.6g} L_t {:.4g} L_r {:.4g} L_g {:.4g}", e.epoch, e.mean.total,
                      e.mean.translation, e.mean.rotation, e.mean.grasp);
    });
    save_params(r.params, p.params);
    write_training_log(r.log, p.log);
    if (!r.log.empty()) {
        const LossTerms &last = r.log.back().mean;
        std::printf("trained %d epochs: total %.6g, L_t %.4g, L_r %.4g, L_g %.4g\n", tc.epochs, last.total,
                    last.translation, last.rotation, last.grasp);
    }
    return kExitOk;
}

int
cmd_eval(const PipelineConfig &cfg, const Options &opt) {
    const Paths p(opt.out);
    const SceneBundle bundle = load_bundle(cfg, p);
    const std::vector<Grasp> grasps = load_safe_grasps(p);

    std::vector<EvalCase> cases;
    ControllerFactory factory;
    PolicyParams params;
    Dataset ds;
    if (cfg.eval.controller == "replay") {
        ds = read_dataset(p.dataset);
        cases = replay_eval_cases(ds, grasps);
        factory = [&ds](const EvalCase &, std::size_t i) { return make_replay_controller(ds.episodes[i]); };
    } else {
        if (grasps.empty()) {
            return kExitNoResult;
        }
        cases = fresh_eval_cases(bundle, grasps, cfg, stage_seed(opt.seed, Stage::Demos),
                                 stage_seed(opt.seed, Stage::Eval));
        if (cfg.eval.controller == "policy") {
            params = load_params(p.params, cfg.policy);
            factory = [&params](const EvalCase &, std::size_t) {
                return std::make_unique<NetworkController>(params);
            };
        } else {
            factory = [](const EvalCase &, std::size_t) { return std::make_unique<ConstantController>(); };
        }
    }
    if (cases.empty()) {
        spdlog::warn("nothing to evaluate");
        return kExitNoResult;
    }
    const EvalReport rep = evaluate(bundle.scene, cfg.camera, cases, factory, bundle.hand, cfg.rollout);
    write_eval_report(rep, p.eval);
    if (opt.strips) {
        fs::create_directories(p.strips);
        const CameraIntrinsics big = scaled(cfg.camera, cfg.eval.strip_scale);
        for (std::size_t i = 0; i < rep.results.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "ep_%03zu.png", i);
            render_trajectory_strip(bundle.scene, big, rep.results[i].trajectory, cfg.eval.strip_frames,
                                    p.strips / name, cfg.render);
        }
    }
    std::printf("eval (%s): %zu episodes, success %.3f, declared %.3f, collisions %.3f, median pos err %.4f m, "
                "median rot err %.4f rad\n",
                cfg.eval.controller.c_str(), rep.results.size(), rep.success_rate, rep.declaration_rate,
                rep.collision_rate, rep.median_pos_err, rep.median_rot_err);
    return kExitOk;
}

int
run_command(const std::string &command, const Options &opt) {
    PipelineConfig cfg;
    try {
        cfg = load_config(opt.config);
    } catch (const Error &e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }
    set_thread_count(opt.threads);
    try {
        if (command == "build-scene") return cmd_build_scene(cfg, opt);
        if (command == "sample-grasps") return cmd_sample_grasps(cfg, opt);
        if (command == "gen-demos") return cmd_gen_demos(cfg, opt);
        if (command == "train") return cmd_train(cfg, opt);
        if (command == "eval") return cmd_eval(cfg, opt);
        spdlog::error("unknown command '{}'", command);
        return kExitUsage;
    } catch (const Error &e) {
        spdlog::error("{} [{}]", e.what(), to_string(e.code()));
        return e.code() == ErrorCode::InvalidSpec || e.code() == ErrorCode::ConfigError ? kExitUsage
                                                                                        : kExitRuntime;
    } catch (const std::exception &e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
}

} // namespace splatover::pipeline
