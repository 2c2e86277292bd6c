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

#include <vector>

#include "facefit/ad/tape.hpp"

// Differentiable operations over tape variables. Free functions; every op
// records exact local partials. Elementwise binary ops require matching
// shapes except that a true scalar (numel 1) broadcasts against anything.

namespace facefit::ad {

// ---- elementwise arithmetic ----
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

// ---- elementwise functions ----
Var relu(const Var& x);
Var leaky_relu(const Var& x, double alpha = 0.2);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);   // domain error on non-positive entries
Var sqrt(const Var& x);  // domain error on negative entries
Var pow(const Var& x, double p);
Var abs(const Var& x);
Var softplus(const Var& x);
Var square(const Var& x);

/// C1 clamp to [0,1]: exact identity on [margin, 1-margin], exponential
/// saturation outside, value always inside (0,1).
Var smooth_clamp01(const Var& x, double margin = 0.05);

// ---- reductions / contractions ----
Var sum(const Var& x);
Var mean(const Var& x);
Var dot(const Var& a, const Var& b);
Var l1_norm(const Var& x);
Var l2_norm(const Var& x);

// ---- shape plumbing ----
Var reshape(const Var& x, Shape s);
Var slice_flat(const Var& x, Index offset, Index len);
Var concat(const std::vector<Var>& parts);  // rank-1 concatenation
Var concat_channels(const Var& a, const Var& b);  // [H,W,Ca] ++ [H,W,Cb]

// ---- rows of [N,K] tensors ----
Var col(const Var& x, Index j);                        // [N,K] -> [N]
Var row_sums(const Var& x);                            // [N,K] -> [N]
Var row_dots(const Var& a, const Var& b);              // [N,K],[N,K] -> [N]
Var scale_rows(const Var& x, const Var& s);            // [N,K],[N] -> [N,K]
Var add_rowvec(const Var& x, const Var& v);            // [N,K],[K] -> [N,K]
Var outer(const Var& s, const Var& v);                 // [N],[K] -> [N,K]
Var cross_rows(const Var& a, const Var& b);            // [N,3],[N,3] -> [N,3]
Var normalize_rows(const Var& x, double eps = 1e-12);  // rows to unit length
Var columns2(const Var& a, const Var& b);              // [N],[N] -> [N,2]
Var columns3(const Var& a, const Var& b, const Var& c);  // [N]x3 -> [N,3]

// ---- linear algebra ----
/// [m,k] x [k,n] -> [m,n]; a rank-1 right operand of length k yields [m].
Var matmul(const Var& a, const Var& b);

// ---- gather / scatter ----
Var gather_rows(const Var& x, const std::vector<Index>& idx);
/// Scatter-add M rows into an [n_rows,K] zero tensor. Duplicate indices add.
Var scatter_rows(const Var& x, const std::vector<Index>& idx, Index n_rows);

// ---- image ops ([H,W,C] row-major) ----
/// 3x3-style convolution, stride 1, zero "same" padding. w is [kh,kw,Cin,Cout]
/// (kh, kw odd), b is [Cout].
Var conv2d(const Var& x, const Var& w, const Var& b);
Var avg_pool2(const Var& x);
Var upsample_nearest2(const Var& x);
Var resize_bilinear(const Var& x, Index h_out, Index w_out);

/// Samples grid [H,W,C] at N coordinates [N,2] given as (u,v) in [0,1]^2
/// (u across width, v down height), bilinear, clamp-to-edge; differentiable
/// in both the grid and the coordinates.
Var bilinear_sample(const Var& grid, const Var& coords);

// ---- small helpers ----
inline Var cross3(const Var& a, const Var& b) {
    return reshape(cross_rows(reshape(a, {1, 3}), reshape(b, {1, 3})), {3});
}
Var logsumexp(const Var& x);  // stable; max-shift folded in as a constant

} // namespace facefit::ad
