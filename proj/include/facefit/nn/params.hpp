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

#include <map>
#include <string>

#include "facefit/ad/adam.hpp"
#include "facefit/ad/ops.hpp"
#include "facefit/core/rng.hpp"

namespace facefit::nn {

/// Named parameter tensors of a network. Ordered map: iteration order (and
/// therefore optimizer update order) is deterministic.
using WeightMap = std::map<std::string, ad::Tensor>;

/// Brings weights onto a tape, as leaves when training (so backward() reports
/// their gradients) or as constants when the net is frozen.
class WeightVars {
public:
    WeightVars(ad::Tape& tape, const WeightMap& weights, bool trainable,
               std::string prefix = "")
        : tape_(tape), weights_(weights), trainable_(trainable), prefix_(std::move(prefix)) {}

    ad::Var operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        auto wit = weights_.find(name);
        require(wit != weights_.end(), "no weight named '", name, "'");
        ad::Var v = trainable_ ? tape_.leaf(prefix_ + name, wit->second)
                               : tape_.constant(wit->second);
        cache_.emplace(name, v);
        return v;
    }

private:
    ad::Tape& tape_;
    const WeightMap& weights_;
    bool trainable_;
    std::string prefix_;
    std::map<std::string, ad::Var> cache_;
};

/// Fan-based "xavier" uniform initialization.
inline ad::Tensor xavier_conv(Rng& rng, ad::Index kh, ad::Index kw, ad::Index ci, ad::Index co) {
    const double fan_in = static_cast<double>(kh * kw * ci);
    const double fan_out = static_cast<double>(kh * kw * co);
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    return ad::Tensor({kh, kw, ci, co}, rng.uniform_array(kh * kw * ci * co, -lim, lim));
}

inline ad::Tensor xavier_dense(Rng& rng, ad::Index in, ad::Index out) {
    const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
    return ad::Tensor({in, out}, rng.uniform_array(in * out, -lim, lim));
}

/// One Adam step over every weight, in map order. Gradients come from a
/// backward() over leaves registered with the given prefix.
struct Optimizer {
    std::map<std::string, ad::AdamState> state;
    ad::AdamConfig config;

    void step(WeightMap& weights, const ad::BackwardResult& grads,
              const std::string& prefix = "") {
        for (auto& [name, value] : weights) {
            adam_step(value, grads.grad(prefix + name), state[name], config);
        }
    }
};

} // namespace facefit::nn
