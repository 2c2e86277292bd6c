// Copyright 2026 The Facefit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace facefit {

/// Deterministic random source. The variate transforms (uniform doubles,
/// Box-Muller normals) are spelled out here instead of using the standard
/// distributions, whose bit streams are implementation-defined; everything
/// downstream of a seed is therefore bit-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Derives a child seed; advances this generator.
    std::uint64_t fork() { return gen_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive (rejection-free modulo; the tiny
    /// modulo bias is irrelevant for the ranges used here).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    /// Standard normal via Box-Muller. Two uniforms per draw, no cached spare,
    /// so the stream position is a pure function of the draw count.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    Eigen::ArrayXd normal_array(Eigen::Index n, double mu = 0.0, double sigma = 1.0) {
        Eigen::ArrayXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(mu, sigma);
        return out;
    }

    Eigen::ArrayXd uniform_array(Eigen::Index n, double lo = 0.0, double hi = 1.0) {
        Eigen::ArrayXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = uniform(lo, hi);
        return out;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace facefit
