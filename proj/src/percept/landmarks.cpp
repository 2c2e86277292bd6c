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

#include "facefit/percept/landmarks.hpp"

#include <Eigen/Dense>

namespace facefit::percept {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;

LandmarkObservation LandmarkOracle::measure(const morph::ModelBundle& bundle,
                                            const ArrayXd& gt_p_s, const ArrayXd& gt_p_e,
                                            const ArrayXd& gt_p_c, Index width, Index height,
                                            double focal_scale, Rng& rng) const {
    const Tensor verts = morph::shape_eval_plain(bundle.shape, bundle.expr, gt_p_s, gt_p_e);
    const Index l = bundle.n_landmarks();
    ArrayXd lm_verts(l * 3);
    for (Index i = 0; i < l; ++i)
        lm_verts.segment(i * 3, 3) = verts.data.segment(bundle.mesh.landmarks[static_cast<std::size_t>(i)] * 3, 3);
    const Tensor lm_tensor({l, 3}, std::move(lm_verts));

    render::Camera cam = render::Camera::from_params(gt_p_c, width, height, focal_scale);
    ArrayXd px, depth;
    render::project_plain(cam, lm_tensor, px, depth);

    LandmarkObservation obs;
    obs.valid.resize(static_cast<std::size_t>(l));
    for (Index i = 0; i < l; ++i) {
        obs.valid[static_cast<std::size_t>(i)] = depth[i] > 1.0;
        px[i * 2] += rng.normal(0.0, sigma_px);
        px[i * 2 + 1] += rng.normal(0.0, sigma_px);
    }
    obs.points = Tensor({l, 2}, std::move(px));
    return obs;
}

Similarity2D similarity_align(const Tensor& src_pts, const Tensor& dst_pts) {
    require(src_pts.shape.size() == 2 && src_pts.shape[1] == 2, "similarity_align: src must be [L,2]");
    ad::check_same_shape(src_pts, dst_pts, "similarity_align");
    const Index l = src_pts.shape[0];
    require(l >= 2, "similarity_align: need at least 2 points");

    Eigen::Matrix2Xd x(2, l), y(2, l);
    for (Index i = 0; i < l; ++i) {
        x.col(i) << src_pts.at(i, 0), src_pts.at(i, 1);
        y.col(i) << dst_pts.at(i, 0), dst_pts.at(i, 1);
    }
    const Eigen::Vector2d mx = x.rowwise().mean(), my = y.rowwise().mean();
    x.colwise() -= mx;
    y.colwise() -= my;
    const double var_x = x.squaredNorm() / static_cast<double>(l);
    require(var_x > 1e-12, "similarity_align: source points are (nearly) coincident");

    const Eigen::Matrix2d sigma = y * x.transpose() / static_cast<double>(l);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d s = Eigen::Matrix2d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s(1, 1) = -1;

    Similarity2D out;
    out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
    out.scale = (svd.singularValues().asDiagonal().toDenseMatrix() * s).trace() / var_x;
    out.translation = my - out.scale * (out.rotation * mx);
    return out;
}

Var warp_similarity(ad::Tape& tape, const Var& image, const Similarity2D& transform,
                    Index out_h, Index out_w) {
    require(image.shape().size() == 3, "warp_similarity: image must be [H,W,3]");
    const Index h = image.shape()[0], w = image.shape()[1];
    const Similarity2D inv = transform.inverse();
    ArrayXd coords(out_h * out_w * 2);
    for (Index y = 0; y < out_h; ++y)
        for (Index x = 0; x < out_w; ++x) {
            const Eigen::Vector2d src = inv.apply(
                Eigen::Vector2d(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5));
            coords[(y * out_w + x) * 2 + 0] = src.x() / static_cast<double>(w);
            coords[(y * out_w + x) * 2 + 1] = src.y() / static_cast<double>(h);
        }
    Var sampled = bilinear_sample(image, tape.constant(Tensor({out_h * out_w, 2}, coords)));
    return reshape(sampled, {out_h, out_w, image.shape()[2]});
}

} // namespace facefit::percept
