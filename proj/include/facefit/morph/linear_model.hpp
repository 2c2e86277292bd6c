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

#include "facefit/ad/ops.hpp"

namespace facefit::morph {

/// Linear statistical model: mean plus a basis whose columns are unit
/// directions pre-scaled by the per-component standard deviations, so that
/// unit-variance coefficients sample the model's distribution and a plain
/// sum of squares of coefficients is the natural regularizer.
struct LinearModel {
    ad::Tensor mean;   // [D]
    ad::Tensor basis;  // [D, n]

    ad::Index dim() const { return mean.numel(); }
    ad::Index components() const { return basis.shape.size() == 2 ? basis.shape[1] : 0; }

    void validate() const {
        require(mean.shape.size() == 1, "LinearModel: mean must be rank-1");
        require(basis.shape.size() == 2 && basis.shape[0] == mean.numel(),
                "LinearModel: basis shape ", ad::shape_str(basis.shape),
                " incompatible with mean of length ", mean.numel());
    }

    /// Plain (untracked) evaluation. eval(0) == mean exactly.
    ad::ArrayXd eval(const ad::ArrayXd& coeffs) const {
        require(coeffs.size() == components(), "LinearModel: got ", coeffs.size(),
                " coefficients, model has ", components());
        if (coeffs.size() == 0) return mean.data;
        ad::ArrayXd out = mean.data;
        out.matrix() += basis.mat(dim(), components()) * coeffs.matrix();
        return out;
    }

    /// Tape evaluation, differentiable w.r.t. the coefficients.
    ad::Var eval(ad::Tape& tape, const ad::Var& coeffs) const {
        require(coeffs.numel() == components(), "LinearModel: got ", coeffs.numel(),
                " coefficients, model has ", components());
        ad::Var b = tape.constant(ad::Tensor({dim(), components()}, basis.data));
        ad::Var m = tape.constant(ad::Tensor({dim()}, mean.data));
        return m + matmul(b, coeffs);
    }

    /// Column scales (the baked-in eigenvalue scaling).
    ad::ArrayXd column_scales() const {
        ad::ArrayXd s(components());
        auto bm = basis.mat(dim(), components());
        for (ad::Index j = 0; j < components(); ++j) s[j] = bm.col(j).norm();
        return s;
    }

    /// Least-squares projection of a sample onto the model (test oracle aid).
    ad::ArrayXd project(const ad::ArrayXd& sample) const;
};

} // namespace facefit::morph
