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

#include "facefit/nn/params.hpp"
#include "facefit/render/renderer.hpp"

namespace facefit::percept {

/// Training failed to meet its quality gate; carries the diagnostic.
class TrainingFailure : public std::runtime_error {
public:
    explicit TrainingFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct FeatureNetConfig {
    ad::Index input_size = 64;
    ad::Index embed_dim = 64;
    std::vector<ad::Index> channels = {12, 24, 32, 48};  // one conv+pool block each
    double leaky_alpha = 0.2;
};

/// Identity feature extractor: conv3x3 -> leaky-relu -> avg-pool blocks with
/// a dense embedding head. The post-pool activation of every block is a
/// named tap; taps feed the content loss and the toy-FID embedding.
struct FeatureNet {
    FeatureNetConfig cfg;
    nn::WeightMap weights;

    struct Forward {
        std::vector<ad::Var> taps;  // shallow -> deep
        ad::Var embedding;          // [E]
    };

    /// Runs the net over an [H,W,3] image var, resizing (bilinear,
    /// differentiable) to the input size when needed. The WeightVars overload
    /// shares one set of leaf registrations across several calls on a tape
    /// (mini-batches).
    Forward forward(ad::Tape& tape, const ad::Var& image, nn::WeightVars& w) const;
    Forward forward(ad::Tape& tape, const ad::Var& image, bool trainable = false,
                    const std::string& prefix = "featnet.") const;

    /// Tap shapes (H_j, W_j, C_j) for the content-loss normalization.
    std::vector<ad::Shape> tap_shapes() const;

    static FeatureNet init(const FeatureNetConfig& cfg, Rng& rng);
};

/// Plain (untracked) feature pass over a stored image.
struct PlainFeatures {
    std::vector<ad::Tensor> taps;
    ad::Tensor embedding;
};
PlainFeatures features_plain(const FeatureNet& net, const ad::Tensor& image);

struct FeatNetTrainConfig {
    ad::Index n_identities = 24;
    ad::Index renders_per_identity = 14;  // last `held_out` of these are eval-only
    ad::Index held_out_per_identity = 2;
    ad::Index steps = 1200;
    ad::Index batch = 16;
    double lr = 2e-3;
    std::uint64_t seed = 1;
    ad::Index render_size = 64;
    double input_noise = 0.02;
    double min_accuracy = 0.8;
};

struct FeatNetTrainReport {
    double held_out_accuracy = 0.0;
    std::vector<std::pair<long, double>> loss_curve;  // (step, batch loss)
};

/// Trains the feature net as a K-way identity classifier over secondary
/// renders of K synthetic identities (shape coefficients + corpus texture per
/// identity). The classifier head is discarded; the penultimate dense layer
/// is the embedding. Throws TrainingFailure below the accuracy gate.
FeatureNet train_feature_net(const morph::ModelBundle& bundle, const FeatureNetConfig& net_cfg,
                             const FeatNetTrainConfig& cfg, FeatNetTrainReport* report = nullptr);

} // namespace facefit::percept
