// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0
//
// One line per criterion: "criterion N: PASS|FAIL <measurements>". Exit status is non-zero if
// any selected criterion fails.

#include "pipeline/pipeline.hpp"
#include "splatover/error.hpp"
#include "splatover/parallel.hpp"
#include "splatover/random.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
namespace pl = splatover::pipeline;
using namespace splatover;

namespace {

const fs::path kCli = SPLATOVER_CLI;
const fs::path kConfigs = SPLATOVER_TEST_CONFIGS;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string
fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

class Stopwatch {
  public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - mStart).count();
    }

  private:
    std::chrono::steady_clock::time_point mStart = std::chrono::steady_clock::now();
};

Vec3
random_unit(Rng &rng) {
    const double z = rng.uniform(-1.0, 1.0), th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(1.0 - z * z);
    return {r * std::cos(th), r * std::sin(th), z};
}

Pose
random_pose(Rng &rng) {
    return {Quat::from_axis_angle(random_unit(rng) * rng.uniform(0.0, std::numbers::pi)),
            Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
}

fs::path
scratch_dir(const std::string &tag) {
    const fs::path p = fs::temp_directory_path() / ("splatover_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int
run_cli(const std::string &args, const fs::path &log) {
    const std::string cmd = kCli.string() + " " + args + " >> " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::uint64_t
fnv1a(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    }
    return h;
}

// Hash of every regular file under `dir`, visited in sorted relative-path order.
std::uint64_t
fnv1a_tree(const fs::path &dir) {
    std::vector<fs::path> files;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files.push_back(fs::relative(e.path(), dir));
        }
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto &f : files) {
        for (char c : f.string()) {
            h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        }
        h = (h ^ fnv1a(dir / f)) * 0x100000001b3ULL;
    }
    return h;
}

// 1. Geometry.
Outcome
criterion_geometry() {
    Stopwatch sw;
    Rng rng(101);
    bool endpoints = true;
    double norm_dev = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Quat a = random_pose(rng).rotation, b = random_pose(rng).rotation;
        endpoints = endpoints && slerp(a, b, 0.0) == a && slerp(a, b, 1.0) == b;
        norm_dev = std::max(norm_dev, std::abs(slerp(a, b, rng.uniform()).norm() - 1.0));
    }
    double worst_t = 0.0, worst_r = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng);
        const Pose back = apply_action(a, relative_action(a, b));
        worst_t = std::max(worst_t, translation_error(back, b));
        worst_r = std::max(worst_r, rotation_error(back, b));
    }
    const double t = sw.seconds();
    return {endpoints && norm_dev <= 1e-9 && worst_t <= 1e-9 && worst_r <= 1e-9 && t < 5.0,
            fmt("slerp endpoints exact=%s, max |norm-1|=%.2e, round trip max %.2e m / %.2e rad over 10000 pairs, "
                "%.2fs",
                endpoints ? "yes" : "no", norm_dev, worst_t, worst_r, t)};
}

// 2. Renderer against the analytic projection of one Gaussian.
Outcome
criterion_renderer() {
    Stopwatch sw;
    CameraIntrinsics cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 100.0;
    cam.cx = 31.7;
    cam.cy = 32.2;
    GaussianScene one;
    Gaussian g;
    g.mean = Vec3(0.0013, -0.0021, 1.0);
    g.log_scale = Vec3::Constant(std::log(0.01));
    g.opacity = 0.5;
    g.color = Vec3::Ones();
    one.gaussians.push_back(g);
    const RenderOutput out = render(one, cam, Pose::identity());
    const Vec2 analytic(cam.fx * g.mean.x() / g.mean.z() + cam.cx, cam.fy * g.mean.y() / g.mean.z() + cam.cy);

    // log alpha is quadratic in the pixel offset; a least-squares fit recovers mean and covariance
    // without the bias that footprint truncation puts on raw moments.
    std::vector<std::array<double, 6>> rows;
    std::vector<double> rhs;
    int peak_u = 0, peak_v = 0;
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const double a = out.weight_sum.at(u, v);
            if (a > out.weight_sum.at(peak_u, peak_v)) {
                peak_u = u;
                peak_v = v;
            }
            if (a > 1e-3) {
                const double x = u - analytic.x(), y = v - analytic.y();
                rows.push_back({1.0, x * x, x * y, y * y, x, y});
                rhs.push_back(std::log(a));
            }
        }
    }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), 6);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int k = 0; k < 6; ++k) {
            A(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
        }
        b(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    Mat2 precision;
    precision << -2.0 * c(1), -c(2), -c(2), -2.0 * c(3);
    const Mat2 cov = precision.inverse();
    const Vec2 mean_offset = precision.inverse() * Vec2(c(4), c(5));
    const double cov_err = std::max({std::abs(cov(0, 0) / 1.3 - 1.0), std::abs(cov(1, 1) / 1.3 - 1.0),
                                     std::abs(cov(0, 1)) / 1.3});
    const double peak_err = mean_offset.norm();
    const double pixel_peak_err = (Vec2(peak_u, peak_v) - analytic).cwiseAbs().maxCoeff();

    // Conservation on a full scene.
    const GaussianScene scene = build_synthetic_scene({}, 1);
    const Vec3 eye(0.1, -0.4, 0.45);
    const RenderOutput full = render(scene, CameraIntrinsics{}, {look_at(eye, Vec3(0, 0, 0.3), Vec3::UnitZ()), eye});
    double conservation = 0.0;
    for (std::size_t i = 0; i < full.weight_sum.data.size(); ++i) {
        conservation = std::max(conservation,
                                std::abs(static_cast<double>(full.weight_sum.data[i]) + full.transmittance.data[i] - 1.0));
    }
    const double t = sw.seconds();
    return {peak_err <= 0.5 && pixel_peak_err <= 0.5 && cov_err <= 0.02 && conservation <= 1e-6 && t < 10.0,
            fmt("fitted peak offset %.3g px (brightest pixel %.2f px per axis), covariance [%.4f %.4f; %.4f] vs 1.3 "
                "(max rel err %.2e), max |sum aT + T - 1| = %.2e, %.2fs",
                peak_err, pixel_peak_err, cov(0, 0), cov(0, 1), cov(1, 1), cov_err, conservation, t)};
}

// 3. Safety filter against a brute-force point-in-box oracle.
Outcome
criterion_grasp_safety() {
    Stopwatch sw;
    std::size_t false_accepts = 0, false_rejects = 0, total = 0, kept = 0;
    const GripperModel gripper;
    for (std::uint64_t scene_idx = 0; scene_idx < 100; ++scene_idx) {
        Rng rng(303, scene_idx);
        SyntheticSceneSpec spec;
        spec.object.shape = static_cast<Primitive>(rng.index(3));
        const double w = rng.uniform(0.03, 0.07);
        spec.object.size = Vec3(w, rng.uniform(0.03, 0.07), rng.uniform(0.06, 0.14));
        if (spec.object.shape != Primitive::Box) {
            spec.object.size.y() = w;
        }
        spec.object.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
        spec.hand->grip = rng.uniform() < 0.8 ? HandGrip::Side : HandGrip::Enclose;
        spec.hand->finger_radius = rng.uniform(0.007, 0.011);
        spec.background.reset();
        spec.density = 2.0e4;
        const GaussianScene scene = build_synthetic_scene(spec, scene_idx);
        const LabeledPointCloud object = estimate_normals(extract_point_cloud(scene, Label::Object, 0.5), 12);
        const LabeledPointCloud hand = extract_point_cloud(scene, Label::Hand, 0.5);
        const auto candidates = sample_antipodal_grasps(object, gripper, {120, 0.4, scene_idx});
        const auto safe = filter_unsafe(candidates, hand, gripper);

        std::size_t next = 0;
        for (const Grasp &g : candidates) {
            const Vec3 ax = g.pose.axis(0), ay = g.pose.axis(1), az = g.pose.axis(2);
            const double hx = 0.5 * g.width + gripper.finger_thickness + gripper.safety_clearance;
            const double hy = gripper.finger_thickness + gripper.safety_clearance;
            const double z_lo = -(gripper.finger_depth + gripper.palm_clearance + gripper.safety_clearance);
            bool hit = false;
            for (const Vec3 &p : hand.points) {
                const Vec3 d = p - g.pose.translation;
                const double lz = d.dot(az);
                if (std::abs(d.dot(ax)) <= hx && std::abs(d.dot(ay)) <= hy && lz >= z_lo &&
                    lz <= gripper.safety_clearance) {
                    hit = true;
                    break;
                }
            }
            const bool accepted = next < safe.size() && safe[next].pose == g.pose;
            next += accepted;
            false_accepts += accepted && hit;
            false_rejects += !accepted && !hit;
            kept += !hit;
            ++total;
        }
        if (next != safe.size()) {
            ++false_accepts; // filter produced something not among the candidates
        }
    }
    const double t = sw.seconds();
    return {false_accepts == 0 && false_rejects == 0 && total > 0 && t < 30.0,
            fmt("100 scenes, %zu candidates, %zu safe by oracle, %zu false accepts, %zu false rejects, %.2fs", total,
                kept, false_accepts, false_rejects, t)};
}

// 4. Trajectories from sampled starts on the default scene.
Outcome
criterion_trajectories() {
    Stopwatch sw;
    const pl::PipelineConfig cfg = pl::load_config(kConfigs / "acceptance.json");
    const pl::SceneBundle bundle = pl::prepare_scene(pl::build_scene(cfg, pl::stage_seed(0, pl::Stage::Scene)), cfg);
    const auto grasps = pl::sample_grasps(bundle, cfg, pl::stage_seed(0, pl::Stage::Grasps)).safe;
    const auto plans = pl::plan_demos(bundle, grasps, cfg, 404, 100 / std::max(1, cfg.grasp.max_grasps));
    std::size_t n = 0, accepted = 0, end_ok = 0, switch_ok = 0, centered = 0, centering_failed = 0;
    double worst_t = 0.0, worst_r = 0.0;
    for (const auto &plan : plans) {
        const Pose pre = pre_grasp_pose(grasps[plan.grasp_index], cfg.grasp.standoff);
        for (const Pose &start : plan.starts) {
            ++n;
            Trajectory tr;
            try {
                tr = plan_trajectory(start, pre, bundle.object_centroid, cfg.camera, cfg.trajectory,
                                     bundle.scene.up_axis);
            } catch (const Error &e) {
                if (e.code() != ErrorCode::CenteringFailed) {
                    throw;
                }
                ++centering_failed;
                continue;
            }
            ++accepted;
            const double et = translation_error(tr.poses.back(), pre), er = rotation_error(tr.poses.back(), pre);
            worst_t = std::max(worst_t, et);
            worst_r = std::max(worst_r, er);
            end_ok += et <= 1e-6 && er <= 1e-6;
            std::size_t first = tr.poses.size();
            for (std::size_t i = 0; i < tr.poses.size(); ++i) {
                if ((tr.poses[i].translation - pre.translation).norm() <= cfg.trajectory.d_switch) {
                    first = i;
                    break;
                }
            }
            switch_ok += first == tr.switch_index && tr.phases[tr.switch_index + 1] == 3;
            std::size_t last1 = 0;
            while (last1 + 1 < tr.phases.size() && tr.phases[last1 + 1] == 1) {
                ++last1;
            }
            const auto px = project_point(bundle.object_centroid, cfg.camera, tr.poses[last1]);
            centered += px && (*px - Vec2(cfg.camera.cx, cfg.camera.cy)).norm() <= cfg.trajectory.center_tolerance;
        }
    }
    const double t = sw.seconds();
    return {n >= 100 && accepted > 0 && end_ok == accepted && switch_ok == accepted && centered == accepted &&
                t < 60.0,
            fmt("%zu starts over %zu grasps, %zu planned (%zu centering failures); endpoint ok %zu (max %.2e m, "
                "%.2e rad), switch ok %zu, centered %zu, %.2fs",
                n, plans.size(), accepted, centering_failed, end_ok, worst_t, worst_r, switch_ok, centered, t)};
}

// 5. Reverse mode against central differences on the default architecture.
Outcome
criterion_gradient() {
    Stopwatch sw;
    const PolicyArchitecture arch;
    Rng rng(505);
    std::vector<PolicyInput> inputs(2);
    for (PolicyInput &in : inputs) {
        in.height = arch.height;
        in.width = arch.width;
        in.data.resize(static_cast<std::size_t>(5 * arch.height * arch.width));
        const std::size_t rgb = static_cast<std::size_t>(3 * arch.height * arch.width);
        for (std::size_t i = 0; i < in.data.size(); ++i) {
            in.data[i] = i < rgb ? static_cast<float>(rng.uniform()) : (rng.uniform() < 0.2 ? 1.0f : 0.0f);
        }
    }
    std::vector<TrainingSample> batch(2);
    for (std::size_t i = 0; i < 2; ++i) {
        batch[i].input = &inputs[i];
        batch[i].action.translation = Vec3(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.01);
        batch[i].action.rotation = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
        batch[i].grasp_label = static_cast<int>(i);
    }
    const LossWeights w;
    const double h = 1e-4;
    double worst = 0.0;
    int checked = 0;
    for (std::uint64_t point = 0; point < 3; ++point) {
        const PolicyParams init = init_params(arch, 600 + point);
        std::vector<double> p(init.values.begin(), init.values.end());
        const std::vector<double> g = batch_gradient(arch, p, batch, w);
        for (int k = 0; k < 60; ++k) {
            const std::size_t i = rng.index(p.size());
            std::vector<double> q = p;
            q[i] = p[i] + h;
            const double up = batch_loss(arch, q, batch, w).total;
            q[i] = p[i] - h;
            const double down = batch_loss(arch, q, batch, w).total;
            const double fd = (up - down) / (2.0 * h);
            // Floor keeps parameters with vanishing gradient from dividing noise by noise.
            worst = std::max(worst, std::abs(fd - g[i]) / std::max(std::abs(fd) + std::abs(g[i]), 1e-8));
            ++checked;
        }
    }
    const double t = sw.seconds();
    return {worst < 1e-4 && checked >= 150 && t < 60.0,
            fmt("%d parameters over 3 points, h=1e-4, max relative error %.2e, %.2fs", checked, worst, t)};
}

// 6. Full pipeline with default settings; fresh starts in closed loop.
Outcome
criterion_overfit_rollout() {
    Stopwatch sw;
    const fs::path out = scratch_dir("overfit");
    const fs::path cfg_path = kConfigs / "acceptance.json";
    const fs::path log = out / "cli.log";
    const std::string args = " --config " + cfg_path.string() + " --seed 0 --out " + out.string();
    for (const char *cmd : {"build-scene", "sample-grasps", "gen-demos", "train", "eval"}) {
        if (const int rc = run_cli(cmd + args, log); rc != 0) {
            return {false, fmt("'%s' exited %d (see %s)", cmd, rc, log.c_str())};
        }
    }
    const pl::PipelineConfig cfg = pl::load_config(cfg_path);
    const Dataset ds = read_dataset(out / "dataset");
    const PolicyParams params = load_params(out / "policy.bin", cfg.policy);
    const SampleSet set = make_samples(ds);
    std::size_t correct = 0;
    for (const TrainingSample &s : set.samples) {
        correct += (forward(params, *s.input).grasp_prob >= 0.5) == (s.grasp_label == 1);
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(set.samples.size());

    std::ifstream log_in(out / "train_log.tsv");
    std::string line, last;
    while (std::getline(log_in, line)) {
        if (!line.empty()) {
            last = line;
        }
    }
    std::istringstream fields(last);
    int epoch = 0;
    double total = 0, lt = 1e9, lr = 0, lg = 0;
    fields >> epoch >> total >> lt >> lr >> lg;

    std::ifstream eval_in(out / "eval.json");
    const auto report = nlohmann::json::parse(eval_in);
    const auto &summary = report["summary"];
    const std::size_t episodes = summary["episodes"].get<std::size_t>();
    const double success = summary["success_rate"].get<double>();
    const double collisions = summary["collision_rate"].get<double>();
    const double t = sw.seconds();
    const bool pass = lt < 1e-4 && accuracy == 1.0 && episodes == 20 && success >= 0.8 && collisions == 0.0;
    std::string detail = fmt("%zu episodes / %zu steps; epoch %d L_t %.3g m^2, L_r %.3g, L_g %.3g; grasp accuracy "
                             "%.4f; closed loop %zu fresh starts: success %.2f (declared %.2f), collisions %.2f, "
                             "median err %.4f m / %.4f rad; %.0fs",
                             ds.episodes.size(), set.samples.size(), epoch, lt, lr, lg, accuracy, episodes, success,
                             summary["declaration_rate"].get<double>(), collisions,
                             summary["median_pos_err"].get<double>(), summary["median_rot_err"].get<double>(), t);
    // Keep a failing run around for inspection.
    if (pass) {
        fs::remove_all(out);
    } else {
        detail += "; artifacts in " + out.string();
    }
    return {pass, detail};
}

// 7. Same seed, different thread counts, identical artifacts.
Outcome
criterion_determinism() {
    Stopwatch sw;
    const fs::path root = scratch_dir("determinism");
    const fs::path cfg = kConfigs / "determinism.json";
    const char *artifacts[] = {"scene.ply", "scene.labels", "grasps.tsv", "dataset/manifest.json", "policy.bin",
                               "eval.json"};
    std::vector<std::vector<std::uint64_t>> sums;
    for (int threads : {1, 2, 1}) {
        const fs::path out = root / ("run" + std::to_string(sums.size()));
        const std::string args = " --config " + cfg.string() + " --seed 7 --threads " + std::to_string(threads) +
                                 " --out " + out.string();
        for (const char *cmd : {"build-scene", "sample-grasps", "gen-demos", "train", "eval"}) {
            if (const int rc = run_cli(cmd + args, root / "cli.log"); rc != 0) {
                return {false, fmt("'%s' (threads %d) exited %d", cmd, threads, rc)};
            }
        }
        std::vector<std::uint64_t> s;
        for (const char *a : artifacts) {
            s.push_back(fnv1a(out / a));
        }
        s.push_back(fnv1a_tree(out / "dataset"));
        sums.push_back(s);
    }
    std::string detail;
    bool same = true;
    for (std::size_t i = 0; i < sums[0].size(); ++i) {
        const bool eq = sums[0][i] == sums[1][i] && sums[0][i] == sums[2][i];
        same = same && eq;
        detail += fmt("%s=%016llx%s ", i < std::size(artifacts) ? artifacts[i] : "dataset/*",
                      static_cast<unsigned long long>(sums[0][i]), eq ? "" : "(DIFFERS)");
    }
    fs::remove_all(root);
    return {same, detail + fmt("threads 1/2/1, %.0fs", sw.seconds())};
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"splatover acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-7); default all")->check(CLI::Range(0, 7));
    CLI11_PARSE(app, argc, argv);

    Outcome (*const checks[])() = {criterion_geometry,     criterion_renderer, criterion_grasp_safety,
                                   criterion_trajectories, criterion_gradient, criterion_overfit_rollout,
                                   criterion_determinism};
    bool all = true;
    for (int i = 1; i <= 7; ++i) {
        if (only != 0 && only != i) {
            continue;
        }
        Outcome o;
        try {
            set_thread_count(1);
            o = checks[i - 1]();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d: %s %s\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
