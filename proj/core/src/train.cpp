// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/error.hpp"
#include "splatover/policy.hpp"
#include "splatover/random.hpp"

#include <cmath>
#include <numeric>

namespace splatover {

TrainResult
train(std::span<const TrainingSample> samples, const PolicyArchitecture &arch, const TrainConfig &cfg,
      const LossWeights &w, const EpochCallback &on_epoch) {
    return train(samples, init_params(arch, stream_seed(cfg.seed, 1)), cfg, w, on_epoch);
}

TrainResult
train(std::span<const TrainingSample> samples, PolicyParams initial, const TrainConfig &cfg, const LossWeights &w,
      const EpochCallback &on_epoch) {
    cfg.validate();
    w.validate();
    if (samples.empty()) {
        throw Error(ErrorCode::EmptyDataset, "training needs at least one step");
    }
    TrainResult result{std::move(initial), {}};
    std::vector<float> &p = result.params.values;
    std::vector<float> velocity(p.size(), 0.0f);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrainingSample> batch;
    Rng rng(cfg.seed, 2);
    const auto lr = static_cast<float>(cfg.learning_rate);
    const auto mom = static_cast<float>(cfg.momentum);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.index(i)]);
        }
        LossTerms sum;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(samples[order[i]]);
            }
            LossTerms terms;
            std::vector<float> g = batch_gradient(result.params, batch, w, &terms);
            if (!std::isfinite(terms.total)) {
                throw Error(ErrorCode::DivergedLoss, "loss diverged in epoch " + std::to_string(epoch));
            }
            float scale = 1.0f;
            if (cfg.grad_clip > 0.0) {
                double norm2 = 0.0;
                for (float v : g) {
                    norm2 += static_cast<double>(v) * v;
                }
                const double norm = std::sqrt(norm2);
                if (norm > cfg.grad_clip) {
                    scale = static_cast<float>(cfg.grad_clip / norm);
                }
            }
            for (std::size_t k = 0; k < p.size(); ++k) {
                velocity[k] = mom * velocity[k] + scale * g[k];
                p[k] -= lr * velocity[k];
            }
            const auto n = static_cast<double>(end - start);
            sum.total += terms.total * n;
            sum.translation += terms.translation * n;
            sum.rotation += terms.rotation * n;
            sum.grasp += terms.grasp * n;
        }
        const auto n = static_cast<double>(samples.size());
        EpochLog entry{epoch, {sum.total / n, sum.translation / n, sum.rotation / n, sum.grasp / n}};
        if (!std::isfinite(entry.mean.total)) {
            throw Error(ErrorCode::DivergedLoss, "loss diverged in epoch " + std::to_string(epoch));
        }
        result.log.push_back(entry);
        if (on_epoch) {
            on_epoch(entry);
        }
    }
    return result;
}

} // namespace splatover
