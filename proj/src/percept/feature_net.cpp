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

#include "facefit/percept/feature_net.hpp"

#include "facefit/morph/bundle.hpp"

namespace facefit::percept {

using ad::ArrayXd;
using ad::Index;
using ad::Shape;
using ad::Tensor;
using ad::Var;

FeatureNet FeatureNet::init(const FeatureNetConfig& cfg, Rng& rng) {
    require(cfg.input_size >= 8 && (cfg.input_size & (cfg.input_size - 1)) == 0,
            "FeatureNet: input size must be a power of two >= 8");
    require(!cfg.channels.empty(), "FeatureNet: need at least one block");
    FeatureNet net;
    net.cfg = cfg;
    Index ci = 3;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        const Index co = cfg.channels[i];
        net.weights["conv" + std::to_string(i) + ".w"] = nn::xavier_conv(rng, 3, 3, ci, co);
        net.weights["conv" + std::to_string(i) + ".b"] = Tensor::zeros({co});
        ci = co;
    }
    const Index side = cfg.input_size >> cfg.channels.size();
    require(side >= 1, "FeatureNet: too many blocks for the input size");
    const Index flat = side * side * ci;
    net.weights["embed.w"] = nn::xavier_dense(rng, flat, cfg.embed_dim);
    net.weights["embed.b"] = Tensor::zeros({cfg.embed_dim});
    return net;
}

std::vector<Shape> FeatureNet::tap_shapes() const {
    std::vector<Shape> shapes;
    Index side = cfg.input_size;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        side /= 2;
        shapes.push_back({side, side, cfg.channels[i]});
    }
    return shapes;
}

FeatureNet::Forward FeatureNet::forward(ad::Tape& tape, const Var& image, bool trainable,
                                        const std::string& prefix) const {
    nn::WeightVars w(tape, weights, trainable, prefix);
    return forward(tape, image, w);
}

FeatureNet::Forward FeatureNet::forward(ad::Tape& tape, const Var& image,
                                        nn::WeightVars& w) const {
    require(image.shape().size() == 3 && image.shape()[2] == 3,
            "FeatureNet: image must be [H,W,3]");
    Var x = image;
    if (image.shape()[0] != cfg.input_size || image.shape()[1] != cfg.input_size) {
        x = resize_bilinear(image, cfg.input_size, cfg.input_size);
    }
    Forward fwd;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        const std::string c = "conv" + std::to_string(i);
        x = avg_pool2(leaky_relu(conv2d(x, w(c + ".w"), w(c + ".b")), cfg.leaky_alpha));
        fwd.taps.push_back(x);
    }
    Var flat = reshape(x, {1, x.numel()});
    fwd.embedding =
        reshape(matmul(flat, w("embed.w")), {cfg.embed_dim}) + w("embed.b");
    return fwd;
}

PlainFeatures features_plain(const FeatureNet& net, const Tensor& image) {
    ad::Tape tape;
    auto fwd = net.forward(tape, tape.constant(image));
    PlainFeatures out;
    for (const Var& t : fwd.taps) out.taps.push_back(t.value());
    out.embedding = fwd.embedding.value();
    return out;
}

} // namespace facefit::percept
