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

#include "facefit/tex/prior.hpp"

namespace facefit::tex {

struct GanTrainConfig {
    ad::Index steps = 1500;  // generator/critic step pairs
    ad::Index batch = 8;
    double lr = 1e-3;
    double penalty_weight = 2.0;  // directional gradient-penalty stabilizer
    double penalty_eps = 0.02;
    std::uint64_t seed = 1;
    ad::Index log_every = 25;
};

struct GanCurvePoint {
    long step;
    double critic_loss;
    double generator_loss;
};

struct GanTrainLog {
    std::vector<GanCurvePoint> curve;
};

/// Non-saturating GAN at fixed resolution over a UV texture corpus. The
/// critic carries a directional finite-difference gradient penalty on real
/// samples (first-order-friendly form of an R1-style stabilizer). Aborts
/// with a diagnostic on divergence (non-finite critic loss). Deterministic
/// given the seed.
Decoder train_texture_gan(const std::vector<Eigen::ArrayXf>& corpus, const DecoderConfig& gen_cfg,
                          const GanTrainConfig& cfg, GanTrainLog* log = nullptr);

struct InversionResult {
    ad::Tensor latent;
    double residual = 0.0;  // final mean-L1
    std::vector<double> trajectory;
};

/// Latent inversion against a target UV map: minimizes the per-pixel mean
/// Manhattan distance by Adam, starting from the zero latent.
InversionResult invert_latent(const TexturePrior& prior, const ad::Tensor& target,
                              ad::Index steps = 500, double lr = 0.05);

} // namespace facefit::tex
