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

#include "facefit/ad/adam.hpp"

#include <cmath>

namespace facefit::ad {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
    check_same_shape(param, grad, "adam_step");
    if (!state.initialized()) state = AdamState::for_param(param);
    require(state.m.size() == param.numel(), "adam_step: state sized for ", state.m.size(),
            " entries, parameter has ", param.numel());

    state.step += 1;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad.data;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.data.square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    param.data -= cfg.lr * (state.m / bc1) / ((state.v / bc2).sqrt() + cfg.epsilon);
}

} // namespace facefit::ad
