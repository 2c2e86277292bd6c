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

#include "facefit/render/camera.hpp"

namespace facefit::render {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;

Camera Camera::from_params(const ArrayXd& p_c, Index w, Index h, double focal_scale) {
    require(p_c.size() == 10, "Camera: parameter vector must have 10 entries, got ", p_c.size());
    Camera cam;
    cam.position = Eigen::Vector3d(p_c[0], p_c[1], p_c[2]);
    cam.look_at = Eigen::Vector3d(p_c[3], p_c[4], p_c[5]);
    cam.up = Eigen::Vector3d(p_c[6], p_c[7], p_c[8]);
    cam.focal_px = p_c[9] * focal_scale;
    cam.width = w;
    cam.height = h;
    cam.validate();
    return cam;
}

void project_plain(const Camera& cam, const Tensor& points, ArrayXd& pixels_out,
                   ArrayXd& depth_out) {
    const Index n = points.shape[0];
    const Eigen::Vector3d f = cam.forward();
    const Eigen::Vector3d r = cam.right();
    const Eigen::Vector3d u = cam.up_cam();
    pixels_out.resize(n * 2);
    depth_out.resize(n);
    const double cx = static_cast<double>(cam.width) / 2.0;
    const double cy = static_cast<double>(cam.height) / 2.0;
    for (Index i = 0; i < n; ++i) {
        const Eigen::Vector3d rel =
            Eigen::Vector3d(points.at(i, 0), points.at(i, 1), points.at(i, 2)) - cam.position;
        const double z = rel.dot(f);
        depth_out[i] = z;
        pixels_out[i * 2 + 0] = cx + cam.focal_px * rel.dot(r) / z;
        pixels_out[i * 2 + 1] = cy - cam.focal_px * rel.dot(u) / z;
    }
}

std::vector<bool> points_in_front(const Camera& cam, const Tensor& points, double near_mm) {
    const Index n = points.shape[0];
    const Eigen::Vector3d f = cam.forward();
    std::vector<bool> ok(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Eigen::Vector3d rel =
            Eigen::Vector3d(points.at(i, 0), points.at(i, 1), points.at(i, 2)) - cam.position;
        ok[static_cast<std::size_t>(i)] = rel.dot(f) > near_mm;
    }
    return ok;
}

Projection project(ad::Tape& tape, const Var& p_c, const Var& points, Index width, Index height,
                   double focal_scale, double near_mm) {
    require(p_c.numel() == 10, "project: p_c must have 10 entries");
    require(points.shape().size() == 2 && points.shape()[1] == 3,
            "project: points must be [N,3]");

    Var pos = slice_flat(p_c, 0, 3);
    Var look = slice_flat(p_c, 3, 3);
    Var up = slice_flat(p_c, 6, 3);
    Var focal = slice_flat(p_c, 9, 1) * focal_scale;

    Var fwd = look - pos;
    Var f_hat = fwd / l2_norm(fwd);
    Var r_vec = cross3(f_hat, up);
    Var r_hat = r_vec / l2_norm(r_vec);
    Var u_hat = cross3(r_hat, f_hat);

    Var rel = add_rowvec(points, -pos);
    Var x_v = matmul(rel, r_hat);
    Var y_v = matmul(rel, u_hat);
    Var z_v = matmul(rel, f_hat);
    // clamp at the near plane so behind-camera garbage stays finite;
    // gradients below the plane are frozen, callers exclude those points
    Var z_safe = relu(z_v - near_mm) + near_mm;

    const double cx = static_cast<double>(width) / 2.0;
    const double cy = static_cast<double>(height) / 2.0;
    Var px = focal * (x_v / z_safe) + cx;
    Var py = cy - focal * (y_v / z_safe);
    return Projection{columns2(px, py), z_safe};
}

} // namespace facefit::render
