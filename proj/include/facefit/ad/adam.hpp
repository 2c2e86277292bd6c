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

#include "facefit/ad/tensor.hpp"

namespace facefit::ad {

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam moments for one parameter tensor.
struct AdamState {
    long step = 0;
    ArrayXd m;
    ArrayXd v;

    static AdamState for_param(const Tensor& p) {
        AdamState s;
        s.m = ArrayXd::Zero(p.numel());
        s.v = ArrayXd::Zero(p.numel());
        return s;
    }
    bool initialized() const { return m.size() > 0; }
};

/// One Adam update in place. The state's moments are lazily sized on first
/// use; afterwards shapes must match exactly.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

} // namespace facefit::ad
