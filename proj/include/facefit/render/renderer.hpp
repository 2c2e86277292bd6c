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

namespace facefit::render {

struct RenderConfig {
    ad::Index width = 128, height = 128;
    double near_mm = 1.0;
    double clamp_margin = 0.05;   // smooth-clamp identity margin
    double focal_scale = 1.0;     // width / bundle.render_size_ref
    bool light_attenuation = false;  // inverse-square, off by default
    double attenuation_ref_mm = 420.0;
};

/// Frozen per-pixel visibility: which triangle covers each pixel, its depth,
/// and the perspective-correct barycentric weights of the forward pass.
/// Triangle assignment is treated as constant within an iteration; gradients
/// flow through the weights recomputed on the tape, not through coverage.
struct GBuffer {
    ad::Index width = 0, height = 0;
    std::vector<int> tri_id;       // H*W, -1 outside coverage
    std::vector<double> depth;     // H*W, +inf outside
    ad::ArrayXd bary;              // H*W*3 perspective-correct weights
    std::vector<ad::Index> covered;  // row-major pixel indices with coverage

    double coverage_fraction() const {
        return static_cast<double>(covered.size()) /
               static_cast<double>(std::max<ad::Index>(width * height, 1));
    }
    /// Coverage mask as H*W doubles in {0,1}.
    ad::ArrayXd mask() const;
};

/// Z-buffered visibility pass at pixel centers. Triangles with any vertex at
/// or behind the near plane are skipped. A fully off-screen mesh yields a
/// zero-coverage buffer (not an error).
GBuffer rasterize(const Camera& cam, const ad::Tensor& vertices,
                  const std::vector<std::array<ad::Index, 3>>& triangles, double near_mm = 1.0);

/// Deferred diffuse-plus-ambient shading of per-pixel attributes:
/// rgb = smooth_clamp01(albedo * (ambient + light_rgb * max(0, n.l))).
/// p_l is [9]: light position, light rgb, ambient rgb. All inputs
/// differentiable.
ad::Var shade(ad::Tape& tape, const ad::Var& albedo_px, const ad::Var& normal_px,
              const ad::Var& worldpos_px, const ad::Var& p_l, const RenderConfig& cfg);

/// Differentiable area-weighted vertex normals, rows normalized.
ad::Var vertex_normals(ad::Tape& tape, const ad::Var& vertices,
                       const std::vector<std::array<ad::Index, 3>>& triangles);

struct RenderOutput {
    ad::Var rgb;      // [H,W,3] over a black background
    GBuffer gbuffer;  // the frozen visibility used
};

/// Full differentiable render of a textured mesh: projected with p_c, shaded
/// with p_l, per-pixel attributes interpolated with barycentric weights that
/// are differentiable functions of the projected vertex positions. If
/// `frozen` is given, its visibility is reused (finite-difference oracles
/// must pass the analytic pass's buffer).
RenderOutput render_scene(ad::Tape& tape, const morph::TriMesh& mesh_topology,
                          const ad::Var& vertices, const ad::Var& vertex_albedo,
                          const ad::Var& p_c, const ad::Var& p_l, const RenderConfig& cfg,
                          const GBuffer* frozen = nullptr);

/// Untracked convenience render of bundle geometry textured by a UV image.
ad::Tensor render_bundle_plain(const morph::ModelBundle& bundle, const ad::ArrayXd& p_s,
                               const ad::ArrayXd& p_e, const ad::Tensor& uv_texture,
                               const ad::ArrayXd& p_c, const ad::ArrayXd& p_l,
                               const RenderConfig& cfg);

/// One draw of the random secondary-render conditions (expression, camera,
/// lighting). Redraws a degenerate camera up to 10 times, then errors.
struct SecondaryDraw {
    ad::Tensor p_e_hat;  // [n_e]
    ad::Tensor p_c_hat;  // [10]
    ad::Tensor p_l_hat;  // [9]
};
SecondaryDraw draw_secondary_conditions(const morph::SamplerStats& stats, ad::Index n_e,
                                        Rng& rng);

} // namespace facefit::render
