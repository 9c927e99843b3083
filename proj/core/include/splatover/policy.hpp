// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "splatover/demo.hpp"
#include "splatover/geometry.hpp"
#include "splatover/image.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace splatover {

/// conv(k1,s2) -> SiLU -> conv(k2,s2) -> SiLU -> conv(k3,s2) -> SiLU -> global average pool
/// -> fc -> SiLU -> heads {translation: t_max*tanh, rotation: r_max*tanh, grasp logit}.
struct PolicyArchitecture {
    int height = 128;
    int width = 128;
    int in_channels = 5;     ///< RGB + object mask + hand mask
    int coord_channels = 0;  ///< 0 or 2: normalized pixel x/y planes appended inside the network
    int c1 = 16, c2 = 32, c3 = 64;
    int k1 = 5, k2 = 3, k3 = 3; ///< odd kernel sizes; stride 2, padding k/2
    int hidden = 128;
    double t_max = 0.05;
    double r_max = 0.30;

    void validate() const;
    [[nodiscard]] std::size_t param_count() const;
    bool operator==(const PolicyArchitecture &) const = default;
};

struct PolicyParams {
    PolicyArchitecture arch;
    std::vector<float> values; ///< declaration order: conv1 w,b, conv2 w,b, conv3 w,b, fc w,b, t w,b, r w,b, g w,b
};

/// Planar C x H x W, values in [0, 1].
struct PolicyInput {
    int height = 0;
    int width = 0;
    std::vector<float> data;
};
PolicyInput make_policy_input(const Image8 &rgb, const Image8 &object_mask, const Image8 &hand_mask);

struct PolicyOutput {
    Vec3 delta_t = Vec3::Zero();
    Vec3 delta_r = Vec3::Zero();
    double grasp_logit = 0.0;
    double grasp_prob = 0.5;

    [[nodiscard]] DeltaAction action() const { return {delta_t, delta_r}; }
};

/// Throws ShapeMismatch.
PolicyOutput forward(const PolicyParams &params, const PolicyInput &input);

struct LossWeights {
    double lambda_t = 1.0;
    double lambda_r = 0.5;
    double lambda_g = 0.1;
    void validate() const;
};

/// Unweighted per-term values plus the weighted total.
struct LossTerms {
    double total = 0.0;
    double translation = 0.0; ///< |dt_pred - dt_label|^2, m^2
    double rotation = 0.0;    ///< |dr_pred - dr_label|^2, rad^2
    double grasp = 0.0;       ///< binary cross-entropy on the logit
};

/// Throws NonFiniteLoss.
LossTerms loss(const PolicyOutput &pred, const DeltaAction &label, int grasp_label, const LossWeights &w);

struct TrainingSample {
    const PolicyInput *input = nullptr;
    DeltaAction action;
    int grasp_label = 0;
};

/// Mean loss / gradient over a batch, float path (training).
LossTerms batch_loss(const PolicyParams &params, std::span<const TrainingSample> batch, const LossWeights &w);
std::vector<float> batch_gradient(const PolicyParams &params, std::span<const TrainingSample> batch,
                                  const LossWeights &w, LossTerms *terms = nullptr);

/// Same computations in double precision, for verification.
LossTerms batch_loss(const PolicyArchitecture &arch, std::span<const double> params,
                     std::span<const TrainingSample> batch, const LossWeights &w);
std::vector<double> batch_gradient(const PolicyArchitecture &arch, std::span<const double> params,
                                   std::span<const TrainingSample> batch, const LossWeights &w);

/// He-uniform trunk, heads scaled down by 10, zero biases.
PolicyParams init_params(const PolicyArchitecture &arch, std::uint64_t seed);

inline constexpr std::uint32_t kParamsSchemaVersion = 1;
/// Throws IoError.
void save_params(const PolicyParams &params, const std::filesystem::path &path);
/// Throws IoError (with byte offset) and ArchitectureMismatch.
PolicyParams load_params(const std::filesystem::path &path);
PolicyParams load_params(const std::filesystem::path &path, const PolicyArchitecture &expected);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double grad_clip = 0.0; ///< global-norm clip on the mean gradient; 0 disables
    std::uint64_t seed = 0;
    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    LossTerms mean; ///< running means over the epoch's batches
};
using TrainingLog = std::vector<EpochLog>;

struct TrainResult {
    PolicyParams params;
    TrainingLog log;
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// SGD with momentum over shuffled mini-batches. Throws EmptyDataset, DivergedLoss.
TrainResult train(std::span<const TrainingSample> samples, const PolicyArchitecture &arch, const TrainConfig &cfg,
                  const LossWeights &w, const EpochCallback &on_epoch = {});
/// Continues from given parameters.
TrainResult train(std::span<const TrainingSample> samples, PolicyParams initial, const TrainConfig &cfg,
                  const LossWeights &w, const EpochCallback &on_epoch = {});

/// Inputs for every step of a dataset; samples point into `inputs`, which must outlive them.
struct SampleSet {
    std::vector<PolicyInput> inputs;
    std::vector<TrainingSample> samples;
};
SampleSet make_samples(const Dataset &dataset);

/// Tab-separated: epoch, total, L_t, L_r, L_g.
void write_training_log(const TrainingLog &log, const std::filesystem::path &path);

} // namespace splatover
