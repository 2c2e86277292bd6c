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

#include "facefit/morph/bundle.hpp"
#include "facefit/nn/params.hpp"

namespace facefit::tex {

struct DecoderConfig {
    ad::Index latent_dim = 64;
    ad::Index out_size = 64;       // power of two >= 8; blocks = log2(out/4)
    ad::Index base_channels = 48;  // channels at the 4x4 root, halved-ish per stage
    double leaky_alpha = 0.2;
};

/// Generator network mapping a latent code to a UV image in [0,1]:
/// dense -> 4x4 feature grid -> repeated (nearest upsample x2, conv3x3,
/// leaky-relu) -> conv3x3 -> tanh rescaled to [0,1].
struct Decoder {
    DecoderConfig cfg;
    nn::WeightMap weights;

    ad::Var forward(ad::Tape& tape, const ad::Var& latent, nn::WeightVars& w) const;
    ad::Var forward(ad::Tape& tape, const ad::Var& latent, bool trainable = false,
                    const std::string& prefix = "gen.") const;
    /// Untracked evaluation.
    ad::Tensor eval(const ad::ArrayXd& latent) const;

    std::vector<ad::Index> stage_channels() const;
    static Decoder init(const DecoderConfig& cfg, Rng& rng);
};

/// Mirror conv stack ending in a scalar realness score.
struct Critic {
    ad::Index in_size = 64;
    std::vector<ad::Index> channels = {12, 24, 32, 48};
    double leaky_alpha = 0.2;
    nn::WeightMap weights;

    ad::Var forward(ad::Tape& tape, const ad::Var& image, nn::WeightVars& w) const;
    static Critic init(ad::Index in_size, const std::vector<ad::Index>& channels, Rng& rng);
};

/// Pluggable texture prior: either the linear PCA model or the neural
/// decoder, behind one differentiable eval(p_t) -> [H,W,3] surface. The
/// fitting code is identical for both.
class TexturePrior {
public:
    static TexturePrior linear(const morph::LinearModel* model, ad::Index uv_size) {
        TexturePrior p;
        p.linear_ = model;
        p.uv_size_ = uv_size;
        return p;
    }
    static TexturePrior neural(const Decoder* decoder) {
        TexturePrior p;
        p.decoder_ = decoder;
        p.uv_size_ = decoder->cfg.out_size;
        return p;
    }

    bool is_neural() const { return decoder_ != nullptr; }
    ad::Index latent_dim() const {
        return is_neural() ? decoder_->cfg.latent_dim : linear_->components();
    }
    ad::Index uv_size() const { return uv_size_; }

    /// Differentiable texture evaluation, [H,W,3].
    ad::Var eval(ad::Tape& tape, const ad::Var& p_t) const;
    ad::Tensor eval_plain(const ad::ArrayXd& p_t) const;

private:
    const morph::LinearModel* linear_ = nullptr;
    const Decoder* decoder_ = nullptr;
    ad::Index uv_size_ = 0;
};

} // namespace facefit::tex
