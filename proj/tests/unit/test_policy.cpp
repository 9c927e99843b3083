// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "helpers.hpp"

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"
#include "splatover/policy.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace splatover;
using namespace splatover::test;

namespace {

PolicyArchitecture
tiny_arch(int coord_channels = 0) {
    PolicyArchitecture a;
    a.height = a.width = 12;
    a.coord_channels = coord_channels;
    a.c1 = 3;
    a.c2 = 4;
    a.c3 = 5;
    a.k1 = 3;
    a.hidden = 6;
    return a;
}

PolicyInput
random_input(Rng &rng, int h, int w) {
    PolicyInput in{h, w, std::vector<float>(static_cast<std::size_t>(5 * h * w))};
    for (std::size_t i = 0; i < in.data.size(); ++i) {
        in.data[i] = i < static_cast<std::size_t>(3 * h * w) ? static_cast<float>(rng.uniform())
                                                            : (rng.uniform() < 0.3 ? 1.0f : 0.0f);
    }
    return in;
}

struct Batch {
    std::vector<PolicyInput> inputs;
    std::vector<TrainingSample> samples;
};

Batch
random_batch(std::uint64_t seed, int n, int h, int w) {
    Rng rng(seed);
    Batch b;
    b.inputs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        b.inputs.push_back(random_input(rng, h, w));
    }
    for (int i = 0; i < n; ++i) {
        TrainingSample s;
        s.input = &b.inputs[static_cast<std::size_t>(i)];
        s.action.translation = Vec3(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(0.0, 0.02));
        s.action.rotation = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
        s.grasp_label = i % 3 == 0;
        b.samples.push_back(s);
    }
    return b;
}

std::size_t
head_size(const PolicyArchitecture &a) {
    return static_cast<std::size_t>(7 * a.hidden + 7);
}

} // namespace

TEST(PolicyArchitecture, DefaultParameterCount) {
    EXPECT_EQ(PolicyArchitecture{}.param_count(), 34375u);
    PolicyArchitecture a;
    a.coord_channels = 2;
    EXPECT_EQ(a.param_count(), 34375u + 2u * 25u * 16u);
    a.k2 = 4;
    EXPECT_THROW(a.validate(), Error);
}

TEST(MakePolicyInput, PlanarLayout) {
    Image8 rgb(2, 1, 3), obj(2, 1, 1), hand(2, 1, 1);
    rgb.data = {255, 0, 51, 0, 102, 0};
    obj.data = {1, 0};
    hand.data = {0, 255};
    const PolicyInput in = make_policy_input(rgb, obj, hand);
    EXPECT_EQ(in.data, (std::vector<float>{1.0f, 0.0f, 0.0f, 102.0f / 255.0f, 51.0f / 255.0f, 0.0f, 1, 0, 0, 1}));
    EXPECT_THROW(make_policy_input(rgb, Image8(3, 1, 1), hand), Error);
}

TEST(Forward, ZeroHeadsGiveZeroActionAndHalfProbability) {
    const PolicyArchitecture a = tiny_arch();
    PolicyParams p = init_params(a, 1);
    std::fill(p.values.end() - static_cast<std::ptrdiff_t>(head_size(a)), p.values.end(), 0.0f);
    Rng rng(2);
    const PolicyOutput out = forward(p, random_input(rng, 12, 12));
    EXPECT_EQ(out.delta_t, Vec3::Zero());
    EXPECT_EQ(out.delta_r, Vec3::Zero());
    EXPECT_EQ(out.grasp_logit, 0.0);
    EXPECT_EQ(out.grasp_prob, 0.5);
}

TEST(Forward, DeterministicAndBounded) {
    const PolicyArchitecture a = tiny_arch();
    PolicyParams p = init_params(a, 3);
    for (float &v : p.values) {
        v *= 200.0f;
    }
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const PolicyInput in = random_input(rng, 12, 12);
        const PolicyOutput o = forward(p, in), o2 = forward(p, in);
        EXPECT_EQ(o.delta_t, o2.delta_t);
        EXPECT_LE(o.delta_t.cwiseAbs().maxCoeff(), a.t_max);
        EXPECT_LE(o.delta_r.cwiseAbs().maxCoeff(), a.r_max);
        EXPECT_TRUE(o.grasp_prob >= 0.0 && o.grasp_prob <= 1.0);
    }
}

TEST(Forward, ShapeMismatch) {
    PolicyParams p = init_params(tiny_arch(), 1);
    p.values.pop_back();
    Rng rng(1);
    EXPECT_THROW(forward(p, random_input(rng, 12, 12)), Error);
    const PolicyParams q = init_params(tiny_arch(), 1);
    EXPECT_THROW(forward(q, random_input(rng, 10, 12)), Error);
}

TEST(Loss, WorkedExamples) {
    PolicyOutput pred;
    pred.delta_t = Vec3(0.01, 0.0, 0.0);
    pred.delta_r = Vec3(0.0, 0.2, 0.0);
    pred.grasp_logit = 0.0;
    const LossTerms l = loss(pred, DeltaAction{}, 1, LossWeights{});
    EXPECT_NEAR(l.translation, 1e-4, 1e-18);
    EXPECT_NEAR(l.rotation, 0.04, 1e-16);
    EXPECT_NEAR(l.grasp, std::log(2.0), 1e-15);
    EXPECT_NEAR(l.total, 1e-4 + 0.5 * 0.04 + 0.1 * std::log(2.0), 1e-15);
}

TEST(Loss, CrossEntropyMatchesScalarFormula) {
    for (double z : {-8.0, -2.5, -0.3, 0.0, 0.7, 3.0, 9.0}) {
        for (int y : {0, 1}) {
            PolicyOutput pred;
            pred.grasp_logit = z;
            const double s = 1.0 / (1.0 + std::exp(-z));
            const double expected = -(y * std::log(s) + (1 - y) * std::log(1.0 - s));
            EXPECT_NEAR(loss(pred, {}, y, {}).grasp, expected, 1e-12) << z << " " << y;
        }
    }
    PolicyOutput big;
    big.grasp_logit = 800.0;
    EXPECT_NEAR(loss(big, {}, 0, {}).grasp, 800.0, 1e-9);
    EXPECT_NEAR(loss(big, {}, 1, {}).grasp, 0.0, 1e-12);
}

TEST(Loss, WeightValidation) {
    EXPECT_THROW(loss({}, {}, 0, {0.0, 0.0, 0.0}), Error);
    EXPECT_THROW(loss({}, {}, 0, {-1.0, 1.0, 1.0}), Error);
}

TEST(Gradient, ZeroWeightSilencesItsHead) {
    // A zero weight removes that term from the objective; the reported term stays unweighted.
    const PolicyArchitecture a = tiny_arch();
    const PolicyParams p = init_params(a, 5);
    const Batch b = random_batch(6, 4, 12, 12);
    LossTerms terms;
    const auto g = batch_gradient(p, b.samples, {1.0, 0.5, 0.0}, &terms);
    EXPECT_GT(terms.grasp, 0.0);
    EXPECT_NEAR(terms.total, terms.translation + 0.5 * terms.rotation, 1e-9);
    for (std::size_t i = g.size() - static_cast<std::size_t>(a.hidden) - 1; i < g.size(); ++i) {
        EXPECT_EQ(g[i], 0.0f);
    }
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
    const PolicyArchitecture a = tiny_arch(GetParam());
    const PolicyParams init = init_params(a, 7);
    std::vector<double> p(init.values.begin(), init.values.end());
    // Larger heads so the head gradients are not dominated by rounding.
    for (std::size_t i = p.size() - head_size(a); i < p.size(); ++i) {
        p[i] *= 10.0;
    }
    const Batch b = random_batch(8, 3, 12, 12);
    const LossWeights w{1.0, 0.5, 0.1};
    const std::vector<double> g = batch_gradient(a, p, b.samples, w);
    ASSERT_EQ(g.size(), p.size());
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        std::vector<double> q = p;
        q[i] = p[i] + h;
        const double up = batch_loss(a, q, b.samples, w).total;
        q[i] = p[i] - h;
        const double down = batch_loss(a, q, b.samples, w).total;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-6, std::abs(fd) + std::abs(g[i])));
    }
    EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(CoordChannels, GradientCheck, ::testing::Values(0, 2));

TEST(Gradient, DuplicatingTheBatchChangesNothing) {
    const PolicyArchitecture a = tiny_arch();
    const PolicyParams p = init_params(a, 9);
    const Batch b = random_batch(10, 3, 12, 12);
    std::vector<TrainingSample> twice;
    for (const auto &s : b.samples) {
        twice.push_back(s);
        twice.push_back(s);
    }
    const auto g1 = batch_gradient(p, b.samples, {});
    const auto g2 = batch_gradient(p, twice, {});
    ASSERT_EQ(g1.size(), g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) {
        EXPECT_NEAR(g1[i], g2[i], 1e-6 * (1.0 + std::abs(g1[i])));
    }
    EXPECT_NEAR(batch_loss(p, b.samples, {}).total, batch_loss(p, twice, {}).total, 1e-7);
}

TEST(Gradient, ThreadCountInvariant) {
    const PolicyParams p = init_params(tiny_arch(), 11);
    const Batch b = random_batch(12, 7, 12, 12);
    set_thread_count(1);
    const auto g1 = batch_gradient(p, b.samples, {});
    set_thread_count(3);
    const auto g3 = batch_gradient(p, b.samples, {});
    set_thread_count(1);
    EXPECT_EQ(g1, g3);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
    const PolicyArchitecture a = tiny_arch();
    const Batch b = random_batch(13, 4, 12, 12);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 42;
    const TrainResult r = train(b.samples, a, cfg, {});
    EXPECT_TRUE(r.log.empty());
    EXPECT_EQ(r.params.values, init_params(a, stream_seed(42, 1)).values);
}

TEST(Train, SameSeedSameResultAndLossDrops) {
    const PolicyArchitecture a = tiny_arch();
    const Batch b = random_batch(14, 6, 12, 12);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 6;
    cfg.learning_rate = 0.2;
    cfg.seed = 3;
    int calls = 0;
    const TrainResult r1 = train(b.samples, a, cfg, {}, [&](const EpochLog &) { ++calls; });
    const TrainResult r2 = train(b.samples, a, cfg, {});
    EXPECT_EQ(calls, 60);
    EXPECT_EQ(r1.params.values, r2.params.values);
    ASSERT_EQ(r1.log.size(), 60u);
    EXPECT_EQ(r1.log.front().epoch, 1);
    // Noise inputs leave little beyond the label means to fit, so the drop is modest.
    EXPECT_LT(r1.log.back().mean.total, 0.95 * r1.log.front().mean.total);
    cfg.seed = 4;
    EXPECT_NE(train(b.samples, a, cfg, {}).params.values, r1.params.values);
}

TEST(Train, EmptyAndInvalid) {
    const PolicyArchitecture a = tiny_arch();
    try {
        train({}, a, TrainConfig{}, {});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
    }
    const Batch b = random_batch(15, 2, 12, 12);
    TrainConfig bad;
    bad.momentum = 1.0;
    EXPECT_THROW(train(b.samples, a, bad, {}), Error);
}

TEST(Params, SaveLoadRoundTrip) {
    TempDir dir("params");
    const PolicyParams p = init_params(tiny_arch(2), 17);
    save_params(p, dir.path() / "p.bin");
    const PolicyParams q = load_params(dir.path() / "p.bin");
    EXPECT_EQ(q.arch, p.arch);
    EXPECT_EQ(q.values, p.values);
    EXPECT_EQ(load_params(dir.path() / "p.bin", p.arch).values, p.values);
}

TEST(Params, ArchitectureMismatch) {
    TempDir dir("params");
    save_params(init_params(tiny_arch(), 18), dir.path() / "p.bin");
    try {
        load_params(dir.path() / "p.bin", PolicyArchitecture{});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::ArchitectureMismatch);
    }
}

TEST(Params, CorruptFilesNameTheByte) {
    TempDir dir("params");
    save_params(init_params(tiny_arch(), 19), dir.path() / "p.bin");
    std::string bytes;
    {
        std::ifstream in(dir.path() / "p.bin", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto expect_io_error = [&](const std::string &content, const std::string &needle) {
        std::ofstream(dir.path() / "c.bin", std::ios::binary) << content;
        try {
            load_params(dir.path() / "c.bin");
            FAIL();
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), ErrorCode::IoError);
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    expect_io_error(bad_magic, "at byte 0");
    std::string bad_version = bytes;
    bad_version[8] = 9;
    expect_io_error(bad_version, "at byte 12");
    expect_io_error(bytes.substr(0, 20), "at byte 20");
    expect_io_error(bytes.substr(0, bytes.size() - 1), "byte");
}
