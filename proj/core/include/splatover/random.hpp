// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace splatover {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t
mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t
stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// Portable random stream: mt19937_64 bits with explicit real/integer mapping,
/// so sequences do not depend on the standard library's distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : mEngine(mix_seed(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : mEngine(stream_seed(seed, stream)) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Lemire-style rejection keeps the mapping unbiased.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = mEngine();
        } while (v >= limit);
        return v % n;
    }
    double normal() {
        // Box-Muller without caching the second variate.
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

  private:
    std::mt19937_64 mEngine;
};

} // namespace splatover
