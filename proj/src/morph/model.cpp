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

#include <set>

#include <Eigen/Dense>

#include "facefit/morph/bundle.hpp"

namespace facefit::morph {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;

ArrayXd LinearModel::project(const ArrayXd& sample) const {
    require(sample.size() == dim(), "project: sample length ", sample.size(),
            " != model dim ", dim());
    auto bm = basis.mat(dim(), components());
    Eigen::VectorXd rhs = (sample - mean.data).matrix();
    return bm.colPivHouseholderQr().solve(rhs).array();
}

void TriMesh::validate() const {
    require(vertices.shape.size() == 2 && vertices.shape[1] == 3,
            "TriMesh: vertices must be [N,3]");
    const Index n = num_vertices();
    require(uv.shape.size() == 2 && uv.shape[0] == n && uv.shape[1] == 2,
            "TriMesh: uv must be [N,2]");
    for (const auto& t : triangles) {
        for (Index k : t) require(k >= 0 && k < n, "TriMesh: triangle index ", k, " out of range");
        // degenerate (zero-area) triangles are not allowed in templates
        Eigen::Vector3d a(vertices.at(t[0], 0), vertices.at(t[0], 1), vertices.at(t[0], 2));
        Eigen::Vector3d b(vertices.at(t[1], 0), vertices.at(t[1], 1), vertices.at(t[1], 2));
        Eigen::Vector3d c(vertices.at(t[2], 0), vertices.at(t[2], 1), vertices.at(t[2], 2));
        require((b - a).cross(c - a).norm() > 1e-9, "TriMesh: degenerate triangle");
    }
    std::set<Index> seen;
    for (Index lm : landmarks) {
        require(lm >= 0 && lm < n, "TriMesh: landmark id ", lm, " out of range");
        require(seen.insert(lm).second, "TriMesh: duplicate landmark id ", lm);
    }
    if (nose_tip >= 0) require(nose_tip < n, "TriMesh: nose tip id out of range");
}

Tensor TriMesh::vertex_normals() const {
    const Index n = num_vertices();
    ArrayXd normals = ArrayXd::Zero(n * 3);
    for (const auto& t : triangles) {
        Eigen::Vector3d a(vertices.at(t[0], 0), vertices.at(t[0], 1), vertices.at(t[0], 2));
        Eigen::Vector3d b(vertices.at(t[1], 0), vertices.at(t[1], 1), vertices.at(t[1], 2));
        Eigen::Vector3d c(vertices.at(t[2], 0), vertices.at(t[2], 1), vertices.at(t[2], 2));
        const Eigen::Vector3d fn = (b - a).cross(c - a);  // 2x area-weighted
        for (Index k : t) {
            normals.segment(k * 3, 3) += fn.array();
        }
    }
    for (Index i = 0; i < n; ++i) {
        const double len = normals.segment(i * 3, 3).matrix().norm();
        if (len > 1e-12) normals.segment(i * 3, 3) /= len;
    }
    return Tensor({n, 3}, std::move(normals));
}

void ModelBundle::validate() const {
    mesh.validate();
    shape.validate();
    expr.validate();
    texture.validate();
    const Index n3 = mesh.num_vertices() * 3;
    require(shape.dim() == n3, "ModelBundle: shape model dim ", shape.dim(),
            " != 3N = ", n3);
    require(expr.dim() == n3, "ModelBundle: expression model dim mismatch");
    require(texture.dim() == uv_size * uv_size * 3, "ModelBundle: texture model dim ",
            texture.dim(), " != H*W*3 = ", uv_size * uv_size * 3);
    require(sampler.mu_c.numel() == 10 && sampler.sigma_c.numel() == 10,
            "ModelBundle: camera sampler stats must have 10 entries");
    require(sampler.mu_l.numel() == 9 && sampler.sigma_l.numel() == 9,
            "ModelBundle: light sampler stats must have 9 entries");
}

ad::Var shape_eval(ad::Tape& tape, const LinearModel& shape, const LinearModel& expr,
                   const ad::Var& p_s, const ad::Var& p_e) {
    require(p_s.numel() == shape.components(), "shape_eval: p_s has ", p_s.numel(),
            " entries, model has ", shape.components());
    require(p_e.numel() == expr.components(), "shape_eval: p_e has ", p_e.numel(),
            " entries, model has ", expr.components());
    ad::Var s = shape.eval(tape, p_s);
    ad::Var e = expr.eval(tape, p_e);
    const Index n = shape.dim() / 3;
    return reshape(s + e, {n, 3});
}

Tensor shape_eval_plain(const LinearModel& shape, const LinearModel& expr, const ArrayXd& p_s,
                        const ArrayXd& p_e) {
    ArrayXd flat = shape.eval(p_s) + expr.eval(p_e);
    const Index n = shape.dim() / 3;
    return Tensor({n, 3}, std::move(flat));
}

ad::Var texture_eval_linear(ad::Tape& tape, const LinearModel& texture, Index uv_size,
                            const ad::Var& p_t) {
    require(p_t.numel() == texture.components(), "texture_eval_linear: p_t has ", p_t.numel(),
            " entries, model has ", texture.components());
    return reshape(texture.eval(tape, p_t), {uv_size, uv_size, 3});
}

ad::Var uv_sample(const ad::Var& uv_image, const ad::Var& uv_coords) {
    return bilinear_sample(uv_image, uv_coords);
}

} // namespace facefit::morph
