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

#include "facefit/tex/prior.hpp"

namespace facefit::tex {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;

std::vector<Index> Decoder::stage_channels() const {
    // 4x4 root down to the output resolution, channels tapering
    std::vector<Index> ch;
    Index c = cfg.base_channels;
    Index side = 4;
    while (side < cfg.out_size) {
        ch.push_back(c);
        c = std::max<Index>(8, (c * 2) / 3);
        side *= 2;
    }
    return ch;
}

Decoder Decoder::init(const DecoderConfig& cfg, Rng& rng) {
    require(cfg.out_size >= 8 && (cfg.out_size & (cfg.out_size - 1)) == 0,
            "Decoder: out_size must be a power of two >= 8");
    require(cfg.latent_dim >= 1, "Decoder: latent_dim must be positive");
    Decoder d;
    d.cfg = cfg;
    const auto stages = d.stage_channels();
    require(!stages.empty(), "Decoder: out_size must exceed the 4x4 root");
    d.weights["root.w"] = nn::xavier_dense(rng, cfg.latent_dim, 4 * 4 * stages[0]);
    d.weights["root.b"] = Tensor::zeros({4 * 4 * stages[0]});
    Index ci = stages[0];
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const Index co = i + 1 < stages.size() ? stages[i + 1] : stages.back();
        d.weights["up" + std::to_string(i) + ".w"] = nn::xavier_conv(rng, 3, 3, ci, co);
        d.weights["up" + std::to_string(i) + ".b"] = Tensor::zeros({co});
        ci = co;
    }
    d.weights["rgb.w"] = nn::xavier_conv(rng, 3, 3, ci, 3);
    d.weights["rgb.b"] = Tensor::zeros({3});
    return d;
}

Var Decoder::forward(ad::Tape& tape, const Var& latent, nn::WeightVars& w) const {
    require(latent.numel() == cfg.latent_dim, "Decoder: latent has ", latent.numel(),
            " entries, expected ", cfg.latent_dim);
    const auto stages = stage_channels();
    Var x = reshape(matmul(reshape(latent, {1, cfg.latent_dim}), w("root.w")),
                    {4, 4, stages[0]}) ;
    x = reshape(reshape(x, {x.numel()}) + w("root.b"), {4, 4, stages[0]});
    x = leaky_relu(x, cfg.leaky_alpha);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string name = "up" + std::to_string(i);
        x = leaky_relu(conv2d(upsample_nearest2(x), w(name + ".w"), w(name + ".b")),
                       cfg.leaky_alpha);
    }
    Var rgb = conv2d(x, w("rgb.w"), w("rgb.b"));
    return 0.5 * (tanh(rgb) + 1.0);
    (void)tape;
}

Var Decoder::forward(ad::Tape& tape, const Var& latent, bool trainable,
                     const std::string& prefix) const {
    nn::WeightVars w(tape, weights, trainable, prefix);
    return forward(tape, latent, w);
}

Tensor Decoder::eval(const ArrayXd& latent) const {
    ad::Tape tape;
    Var out = forward(tape, tape.constant(Tensor({latent.size()}, latent)));
    return out.value();
}

Critic Critic::init(Index in_size, const std::vector<Index>& channels, Rng& rng) {
    require(in_size >= 8 && (in_size & (in_size - 1)) == 0,
            "Critic: in_size must be a power of two >= 8");
    Critic c;
    c.in_size = in_size;
    c.channels = channels;
    Index ci = 3;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        c.weights["conv" + std::to_string(i) + ".w"] = nn::xavier_conv(rng, 3, 3, ci, channels[i]);
        c.weights["conv" + std::to_string(i) + ".b"] = Tensor::zeros({channels[i]});
        ci = channels[i];
    }
    const Index side = in_size >> channels.size();
    require(side >= 1, "Critic: too many blocks for the input size");
    c.weights["score.w"] = nn::xavier_dense(rng, side * side * ci, 1);
    c.weights["score.b"] = Tensor::zeros({1});
    return c;
}

Var Critic::forward(ad::Tape& tape, const Var& image, nn::WeightVars& w) const {
    require(image.shape().size() == 3 && image.shape()[0] == in_size &&
                image.shape()[1] == in_size && image.shape()[2] == 3,
            "Critic: image must be [", in_size, ",", in_size, ",3], got ",
            ad::shape_str(image.shape()));
    Var x = image;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const std::string c = "conv" + std::to_string(i);
        x = avg_pool2(leaky_relu(conv2d(x, w(c + ".w"), w(c + ".b")), leaky_alpha));
    }
    (void)tape;
    return reshape(matmul(reshape(x, {1, x.numel()}), w("score.w")), {1}) + w("score.b");
}

Var TexturePrior::eval(ad::Tape& tape, const Var& p_t) const {
    require(p_t.numel() == latent_dim(), "TexturePrior: p_t has ", p_t.numel(),
            " entries, prior expects ", latent_dim());
    if (is_neural()) return decoder_->forward(tape, p_t);
    return morph::texture_eval_linear(tape, *linear_, uv_size_, p_t);
}

Tensor TexturePrior::eval_plain(const ArrayXd& p_t) const {
    ad::Tape tape;
    return eval(tape, tape.constant(Tensor({p_t.size()}, p_t))).value();
}

} // namespace facefit::tex
