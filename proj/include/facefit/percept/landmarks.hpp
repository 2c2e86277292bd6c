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

#include "facefit/core/rng.hpp"
#include "facefit/morph/bundle.hpp"
#include "facefit/render/camera.hpp"

namespace facefit::percept {

/// Measured 2D landmarks. Points are constants (no gradients flow into
/// measurements); `valid` flags points usable by the landmark loss.
struct LandmarkObservation {
    ad::Tensor points;        // [L,2] pixels
    std::vector<bool> valid;  // false: behind the camera, loss skips it
};

/// Ground-truth landmark oracle over synthetic scenes: projects the GT
/// mesh's landmark vertices with the GT camera and adds Gaussian pixel noise
/// of the given sigma.
struct LandmarkOracle {
    double sigma_px = 0.5;

    LandmarkObservation measure(const morph::ModelBundle& bundle, const ad::ArrayXd& gt_p_s,
                                const ad::ArrayXd& gt_p_e, const ad::ArrayXd& gt_p_c,
                                ad::Index width, ad::Index height, double focal_scale,
                                Rng& rng) const;
};

/// Closed-form least-squares similarity transform dst ~ s*R*src + t
/// (2D Umeyama).
struct Similarity2D {
    double scale = 1.0;
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
        return scale * (rotation * p) + translation;
    }
    Similarity2D inverse() const {
        Similarity2D inv;
        inv.scale = 1.0 / scale;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation) / scale;
        return inv;
    }
};

Similarity2D similarity_align(const ad::Tensor& src_pts, const ad::Tensor& dst_pts);

/// Warps an image by a similarity transform (output pixel = image sampled at
/// the inverse-transformed location, bilinear). Differentiable in the image;
/// the transform is a measured constant.
ad::Var warp_similarity(ad::Tape& tape, const ad::Var& image, const Similarity2D& transform,
                        ad::Index out_h, ad::Index out_w);

} // namespace facefit::percept
