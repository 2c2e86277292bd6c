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

#include "facefit/tex/gan.hpp"

#include "facefit/percept/feature_net.hpp"  // TrainingFailure

namespace facefit::tex {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;
using percept::TrainingFailure;

Decoder train_texture_gan(const std::vector<Eigen::ArrayXf>& corpus, const DecoderConfig& gen_cfg,
                          const GanTrainConfig& cfg, GanTrainLog* log) {
    const Index n_train = static_cast<Index>(corpus.size());
    require(n_train >= 500, "train_texture_gan: corpus must hold at least 500 images, got ",
            n_train);
    const Index hw3 = gen_cfg.out_size * gen_cfg.out_size * 3;
    for (Index i = 0; i < n_train; ++i) {
        require(corpus[static_cast<std::size_t>(i)].size() == hw3,
                "train_texture_gan: corpus image ", i, " size mismatch");
    }

    Rng rng(cfg.seed);
    Decoder gen = Decoder::init(gen_cfg, rng);
    Critic critic = Critic::init(gen_cfg.out_size, {12, 24, 32, 48}, rng);
    nn::Optimizer opt_g, opt_d;
    opt_g.config.lr = cfg.lr;
    opt_d.config.lr = cfg.lr;

    const ad::Shape img_shape{gen_cfg.out_size, gen_cfg.out_size, 3};
    auto real_image = [&](Rng& r) {
        const Index pick = r.uniform_int(0, n_train - 1);
        return Tensor(img_shape, corpus[static_cast<std::size_t>(pick)].cast<double>());
    };

    for (Index step = 0; step < cfg.steps; ++step) {
        // critic update: non-saturating loss + directional penalty on reals
        {
            ad::Tape tape;
            nn::WeightVars dw(tape, critic.weights, /*trainable=*/true, "critic.");
            nn::WeightVars gw(tape, gen.weights, /*trainable=*/false);
            Var loss = tape.constant_scalar(0.0);
            for (Index k = 0; k < cfg.batch; ++k) {
                Tensor real = real_image(rng);
                Var d_real = critic.forward(tape, tape.constant(real), dw);
                Var z = tape.constant(Tensor({gen_cfg.latent_dim},
                                             rng.normal_array(gen_cfg.latent_dim)));
                Var fake = gen.forward(tape, z, gw);
                Var d_fake = critic.forward(tape, fake, dw);
                loss = loss + softplus(-d_real) + softplus(d_fake);

                // symmetric directional derivative of the critic at the real
                // sample; penalizing its square is a first-order-friendly
                // stand-in for the gradient-norm penalty
                ArrayXd dir = rng.normal_array(hw3);
                dir /= std::max(std::sqrt(dir.square().sum()), 1e-12);
                Tensor up(img_shape, real.data + cfg.penalty_eps * dir);
                Tensor dn(img_shape, real.data - cfg.penalty_eps * dir);
                Var dd = (critic.forward(tape, tape.constant(up), dw) -
                          critic.forward(tape, tape.constant(dn), dw)) /
                         (2.0 * cfg.penalty_eps);
                loss = loss + cfg.penalty_weight * square(dd);
            }
            loss = loss / static_cast<double>(cfg.batch);
            if (!loss.value().all_finite()) {
                throw TrainingFailure("train_texture_gan: critic loss diverged (non-finite) at step " +
                                      std::to_string(step));
            }
            auto grads = tape.backward(loss);
            opt_d.step(critic.weights, grads, "critic.");
            if (log && step % cfg.log_every == 0)
                log->curve.push_back({step, loss.item(), 0.0});
        }
        // generator update
        {
            ad::Tape tape;
            nn::WeightVars gw(tape, gen.weights, /*trainable=*/true, "gen.");
            nn::WeightVars dw(tape, critic.weights, /*trainable=*/false);
            Var loss = tape.constant_scalar(0.0);
            for (Index k = 0; k < cfg.batch; ++k) {
                Var z = tape.constant(Tensor({gen_cfg.latent_dim},
                                             rng.normal_array(gen_cfg.latent_dim)));
                Var fake = gen.forward(tape, z, gw);
                loss = loss + softplus(-critic.forward(tape, fake, dw));
            }
            loss = loss / static_cast<double>(cfg.batch);
            if (!loss.value().all_finite()) {
                throw TrainingFailure("train_texture_gan: generator loss diverged at step " +
                                      std::to_string(step));
            }
            auto grads = tape.backward(loss);
            opt_g.step(gen.weights, grads, "gen.");
            if (log && step % cfg.log_every == 0 && !log->curve.empty())
                log->curve.back().generator_loss = loss.item();
        }
    }
    return gen;
}

InversionResult invert_latent(const TexturePrior& prior, const Tensor& target, Index steps,
                              double lr) {
    const Index hw3 = prior.uv_size() * prior.uv_size() * 3;
    require(target.numel() == hw3, "invert_latent: target size ", target.numel(),
            " does not match prior output ", hw3);

    Tensor latent = Tensor::zeros({prior.latent_dim()});
    ad::AdamState state;
    ad::AdamConfig adam;
    adam.lr = lr;
    InversionResult result;
    for (Index it = 0; it < steps; ++it) {
        ad::Tape tape;
        Var z = tape.leaf("p_t", latent);
        Var img = prior.eval(tape, z);
        Var loss = mean(abs(reshape(img, {hw3}) - tape.constant(Tensor({hw3}, target.data))));
        auto grads = tape.backward(loss);
        adam_step(latent, grads.grad("p_t"), state, adam);
        result.trajectory.push_back(loss.item());
    }
    // residual at the final latent
    ad::Tape tape;
    Var img = prior.eval(tape, tape.constant(latent));
    result.residual = (img.data() - target.data).abs().mean();
    result.latent = std::move(latent);
    return result;
}

} // namespace facefit::tex
