// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/grasp.hpp"
#include "splatover/parallel.hpp"
#include "splatover/policy.hpp"
#include "splatover/render.hpp"
#include "splatover/rollout.hpp"
#include "splatover/scene.hpp"

#include <benchmark/benchmark.h>

using namespace splatover;

namespace {

const GaussianScene &
default_scene() {
    static const GaussianScene scene = build_synthetic_scene({}, 0);
    return scene;
}

Pose
bench_view() {
    const Vec3 eye(0.15, -0.35, 0.55);
    return {look_at(eye, Vec3(0, 0, 0.3), Vec3::UnitZ()), eye};
}

void
BM_Render(benchmark::State &state) {
    const int size = static_cast<int>(state.range(0));
    const auto cam = CameraIntrinsics::from_fov(size, size, 60.0 * kDeg);
    const Pose pose = bench_view();
    set_thread_count(static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(render(default_scene(), cam, pose));
    }
    set_thread_count(1);
    state.counters["gaussians"] = static_cast<double>(default_scene().gaussians.size());
    state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_Render)->Args({64, 1})->Args({128, 1})->Args({128, 4})->Unit(benchmark::kMillisecond)->UseRealTime();

struct PolicyFixture {
    PolicyParams params = init_params(PolicyArchitecture{}, 1);
    PolicyInput input;
    std::vector<TrainingSample> batch;

    explicit PolicyFixture(int batch_size) {
        const CameraIntrinsics cam;
        input = observe(default_scene(), cam, bench_view(), {}, 0.5);
        for (int i = 0; i < batch_size; ++i) {
            TrainingSample s;
            s.input = &input;
            s.action.translation = Vec3(0.0, 0.0, 0.02);
            s.grasp_label = i % 4 == 0;
            batch.push_back(s);
        }
    }
};

void
BM_Forward(benchmark::State &state) {
    const PolicyFixture f(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(f.params, f.input));
    }
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void
BM_BatchGradient(benchmark::State &state) {
    const PolicyFixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(batch_gradient(f.params, f.batch, LossWeights{}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchGradient)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

struct GraspFixture {
    LabeledPointCloud object, hand;
    GripperModel gripper;

    GraspFixture() {
        object = estimate_normals(extract_point_cloud(default_scene(), Label::Object, 0.5), 12);
        hand = extract_point_cloud(default_scene(), Label::Hand, 0.5);
    }
};

void
BM_AntipodalSampling(benchmark::State &state) {
    const GraspFixture f;
    const AntipodalParams params{static_cast<int>(state.range(0)), 0.4, 3};
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_antipodal_grasps(f.object, f.gripper, params));
    }
}
BENCHMARK(BM_AntipodalSampling)->Arg(500)->Unit(benchmark::kMillisecond);

void
BM_FilterUnsafe(benchmark::State &state) {
    const GraspFixture f;
    const auto grasps = sample_antipodal_grasps(f.object, f.gripper, {500, 0.4, 3});
    for (auto _ : state) {
        benchmark::DoNotOptimize(filter_unsafe(grasps, f.hand, f.gripper));
    }
    state.counters["grasps"] = static_cast<double>(grasps.size());
    state.counters["hand_points"] = static_cast<double>(f.hand.points.size());
}
BENCHMARK(BM_FilterUnsafe)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
