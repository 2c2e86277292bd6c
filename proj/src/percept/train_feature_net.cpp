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

namespace facefit::percept {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;

namespace {
struct Sample {
    Eigen::ArrayXf image;  // render_size^2 * 3
    Index label;
};
} // namespace

FeatureNet train_feature_net(const morph::ModelBundle& bundle, const FeatureNetConfig& net_cfg,
                             const FeatNetTrainConfig& cfg, FeatNetTrainReport* report) {
    require(cfg.n_identities >= 20, "train_feature_net: need at least 20 identities, got ",
            cfg.n_identities);
    require(cfg.renders_per_identity > cfg.held_out_per_identity,
            "train_feature_net: no training renders left after the held-out split");

    Rng rng(cfg.seed);
    render::RenderConfig rcfg;
    rcfg.width = rcfg.height = cfg.render_size;
    rcfg.focal_scale = static_cast<double>(cfg.render_size) / bundle.render_size_ref;

    // K synthetic identities: shape coefficients + a corpus texture each,
    // rendered under random secondary conditions
    std::vector<Sample> train, held_out;
    for (Index id = 0; id < cfg.n_identities; ++id) {
        const ArrayXd p_s = rng.normal_array(bundle.n_s(), 0.0, 0.7);
        const Tensor texture(
            {bundle.uv_size, bundle.uv_size, 3},
            bundle.corpus[static_cast<std::size_t>(id) % bundle.corpus.size()].cast<double>());
        for (Index r = 0; r < cfg.renders_per_identity; ++r) {
            auto draw = render::draw_secondary_conditions(bundle.sampler, bundle.n_e(), rng);
            Tensor img = render::render_bundle_plain(bundle, p_s, draw.p_e_hat.data, texture,
                                                     draw.p_c_hat.data, draw.p_l_hat.data, rcfg);
            Sample s{img.data.cast<float>(), id};
            if (r >= cfg.renders_per_identity - cfg.held_out_per_identity)
                held_out.push_back(std::move(s));
            else
                train.push_back(std::move(s));
        }
    }

    FeatureNet net = FeatureNet::init(net_cfg, rng);
    nn::WeightMap head;
    head["cls.w"] = nn::xavier_dense(rng, net_cfg.embed_dim, cfg.n_identities);
    head["cls.b"] = Tensor::zeros({cfg.n_identities});
    nn::Optimizer opt_net, opt_head;
    opt_net.config.lr = cfg.lr;
    opt_head.config.lr = cfg.lr;

    const ad::Shape img_shape{cfg.render_size, cfg.render_size, 3};
    for (Index step = 0; step < cfg.steps; ++step) {
        ad::Tape tape;
        nn::WeightVars net_vars(tape, net.weights, /*trainable=*/true, "featnet.");
        nn::WeightVars head_vars(tape, head, /*trainable=*/true, "head.");
        Var loss = tape.constant_scalar(0.0);
        for (Index k = 0; k < cfg.batch; ++k) {
            const Sample& s =
                train[static_cast<std::size_t>(rng.uniform_int(0, static_cast<Index>(train.size()) - 1))];
            ArrayXd pixels = s.image.cast<double>();
            if (cfg.input_noise > 0)
                pixels += rng.normal_array(pixels.size(), 0.0, cfg.input_noise);
            Var img = tape.constant(Tensor(img_shape, std::move(pixels)));
            auto fwd = net.forward(tape, img, net_vars);
            Var logits = reshape(matmul(reshape(fwd.embedding, {1, net_cfg.embed_dim}),
                                        head_vars("cls.w")),
                                 {cfg.n_identities}) +
                         head_vars("cls.b");
            Var ce = logsumexp(logits) - slice_flat(logits, s.label, 1);
            loss = loss + ce;
        }
        loss = loss / static_cast<double>(cfg.batch);
        if (!loss.value().all_finite()) {
            throw TrainingFailure("train_feature_net: non-finite loss at step " +
                                  std::to_string(step));
        }
        auto grads = tape.backward(loss);
        opt_net.step(net.weights, grads, "featnet.");
        opt_head.step(head, grads, "head.");
        if (report && step % 25 == 0) report->loss_curve.emplace_back(step, loss.item());
    }

    // held-out accuracy with the trained head
    Index correct = 0;
    for (const Sample& s : held_out) {
        PlainFeatures f = features_plain(net, Tensor(img_shape, s.image.cast<double>()));
        Eigen::VectorXd logits =
            head["cls.w"].mat(net_cfg.embed_dim, cfg.n_identities).transpose() *
                f.embedding.data.matrix() +
            head["cls.b"].data.matrix();
        Index best = 0;
        logits.maxCoeff(&best);
        if (best == s.label) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(held_out.size());
    if (report) report->held_out_accuracy = acc;
    if (acc < cfg.min_accuracy) {
        throw TrainingFailure("train_feature_net: held-out accuracy " + std::to_string(acc) +
                              " below gate " + std::to_string(cfg.min_accuracy));
    }
    return net;
}

} // namespace facefit::percept
