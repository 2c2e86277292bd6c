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

#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "facefit/core/require.hpp"

namespace facefit::ad {

using Eigen::ArrayXd;
using Eigen::Index;
using Shape = std::vector<Index>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

inline Index shape_numel(const Shape& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s);

/// Dense row-major array of 64-bit reals with an explicit shape. This is the
/// value type everything differentiable is built from; gradients share it.
struct Tensor {
    Shape shape;
    ArrayXd data;

    Tensor() = default;
    Tensor(Shape s, ArrayXd d) : shape(std::move(s)), data(std::move(d)) {
        require(shape_numel(shape) == data.size(), "tensor shape ", shape_str(shape),
                " does not match data length ", data.size());
    }

    static Tensor zeros(const Shape& s) { return Tensor(s, ArrayXd::Zero(shape_numel(s))); }
    static Tensor full(const Shape& s, double v) {
        return Tensor(s, ArrayXd::Constant(shape_numel(s), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, ArrayXd::Constant(1, v)); }
    static Tensor vector(std::initializer_list<double> vals) {
        ArrayXd d(static_cast<Index>(vals.size()));
        Index i = 0;
        for (double v : vals) d[i++] = v;
        return Tensor({static_cast<Index>(vals.size())}, std::move(d));
    }
    static Tensor from_array(const Shape& s, ArrayXd d) { return Tensor(s, std::move(d)); }

    Index numel() const { return data.size(); }
    Index rank() const { return static_cast<Index>(shape.size()); }
    Index dim(Index i) const { return shape[static_cast<std::size_t>(i)]; }

    bool all_finite() const { return data.isFinite().all(); }

    /// Row-major matrix view; valid for any tensor whose numel factors as r*c.
    ConstRowMatrixMap mat(Index rows, Index cols) const {
        require(rows * cols == numel(), "matrix view ", rows, "x", cols,
                " incompatible with tensor of ", numel(), " elements");
        return ConstRowMatrixMap(data.data(), rows, cols);
    }
    RowMatrixMap mat(Index rows, Index cols) {
        require(rows * cols == numel(), "matrix view ", rows, "x", cols,
                " incompatible with tensor of ", numel(), " elements");
        return RowMatrixMap(data.data(), rows, cols);
    }

    /// Element access for rank-2 tensors.
    double& at(Index r, Index c) { return data[r * shape[1] + c]; }
    double at(Index r, Index c) const { return data[r * shape[1] + c]; }
    /// Element access for rank-3 tensors.
    double& at(Index i, Index j, Index k) { return data[(i * shape[1] + j) * shape[2] + k]; }
    double at(Index i, Index j, Index k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
};

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace facefit::ad
