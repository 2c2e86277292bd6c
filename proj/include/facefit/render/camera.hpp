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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "facefit/ad/ops.hpp"

namespace facefit::render {

/// Pinhole camera: right-handed view basis built from position/look-at/up,
/// principal point at the image center, pixel y growing downward. The focal
/// length is expressed in pixels at a reference image size; rendering at
/// other sizes scales it by `focal_scale`.
struct Camera {
    Eigen::Vector3d position{0, 0, 420};
    Eigen::Vector3d look_at{0, 0, 0};
    Eigen::Vector3d up{0, 1, 0};
    double focal_px = 240;
    ad::Index width = 128, height = 128;

    static Camera from_params(const ad::ArrayXd& p_c, ad::Index w, ad::Index h,
                              double focal_scale = 1.0);

    void validate() const {
        require(focal_px > 0, "Camera: focal must be positive");
        require(up.cross(look_at - position).norm() > 1e-6,
                "Camera: up direction parallel to viewing direction");
    }

    Eigen::Vector3d forward() const { return (look_at - position).normalized(); }
    Eigen::Vector3d right() const { return forward().cross(up).normalized(); }
    Eigen::Vector3d up_cam() const { return right().cross(forward()); }
};

/// Plain projection of [N,3] points: pixel coordinates [N,2] and view-space
/// depths [N] (positive in front of the camera).
void project_plain(const Camera& cam, const ad::Tensor& points, ad::ArrayXd& pixels_out,
                   ad::ArrayXd& depth_out);

/// Differentiable projection products.
struct Projection {
    ad::Var pixels;  // [N,2]
    ad::Var depth;   // [N] view-space z, clamped at the near plane
};

/// Projects points through the camera held in p_c ([10]: position, look-at,
/// up, focal). Differentiable w.r.t. both p_c and the points. Depth is
/// clamped at `near_mm` before the perspective divide so points behind the
/// near plane produce finite (frozen-gradient) values; callers flag them via
/// `points_in_front`.
Projection project(ad::Tape& tape, const ad::Var& p_c, const ad::Var& points, ad::Index width,
                   ad::Index height, double focal_scale = 1.0, double near_mm = 1.0);

/// Per-point visibility flags (depth > near plane) from plain values.
std::vector<bool> points_in_front(const Camera& cam, const ad::Tensor& points,
                                  double near_mm = 1.0);

} // namespace facefit::render
