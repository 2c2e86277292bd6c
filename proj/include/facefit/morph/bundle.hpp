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

#include "facefit/morph/linear_model.hpp"
#include "facefit/morph/trimesh.hpp"

namespace facefit::morph {

/// Gaussian statistics for the secondary-render condition samplers. The
/// means double as the default scene (camera/light) and the sigmas as the
/// natural parameter scales for optimization.
struct SamplerStats {
    ad::Tensor mu_c, sigma_c;  // [10] camera: position, look-at, up, focal
    ad::Tensor mu_l, sigma_l;  // [9] light: position, rgb, ambient rgb
    double sigma_e = 0.5;      // expression coefficient sigma
};

/// Full in-memory model bundle: template mesh, the three linear models, the
/// texture corpus the texture model was learned from, and scene defaults.
/// Immutable after creation; safe to share across concurrent jobs.
struct ModelBundle {
    TriMesh mesh;
    LinearModel shape;    // [3N x n_s]
    LinearModel expr;     // [3N x n_e], zero mean
    LinearModel texture;  // [H*W*3 x n_t]
    std::vector<Eigen::ArrayXf> corpus;  // UV maps, each H*W*3, values [0,1]
    ad::Index uv_size = 0;               // H_uv == W_uv
    SamplerStats sampler;
    int render_size_ref = 128;  // image size mu_c's focal is expressed for

    ad::Index n_s() const { return shape.components(); }
    ad::Index n_e() const { return expr.components(); }
    ad::Index n_t() const { return texture.components(); }
    ad::Index n_landmarks() const { return static_cast<ad::Index>(mesh.landmarks.size()); }

    void validate() const;
};

/// Full parameter state of one fit: shape/expression/texture coefficients,
/// camera [position, look-at, up, focal_px], lighting [light pos, light rgb,
/// ambient rgb].
struct ParameterSet {
    ad::Tensor p_s, p_e, p_t;
    ad::Tensor p_c;  // [10]
    ad::Tensor p_l;  // [9]

    static ParameterSet zeros(ad::Index ns, ad::Index ne, ad::Index nt,
                              const ad::Tensor& default_camera, const ad::Tensor& default_light) {
        ParameterSet p;
        p.p_s = ad::Tensor::zeros({ns});
        p.p_e = ad::Tensor::zeros({ne});
        p.p_t = ad::Tensor::zeros({nt});
        p.p_c = default_camera;
        p.p_l = default_light;
        return p;
    }

    void check_dims(const ModelBundle& bundle, ad::Index latent_dim) const {
        require(p_s.numel() == bundle.n_s(), "ParameterSet: p_s has ", p_s.numel(),
                " entries, bundle expects ", bundle.n_s());
        require(p_e.numel() == bundle.n_e(), "ParameterSet: p_e has ", p_e.numel(),
                " entries, bundle expects ", bundle.n_e());
        require(p_t.numel() == latent_dim, "ParameterSet: p_t has ", p_t.numel(),
                " entries, prior expects ", latent_dim);
        require(p_c.numel() == 10, "ParameterSet: p_c must have 10 entries");
        require(p_l.numel() == 9, "ParameterSet: p_l must have 9 entries");
    }
};

/// Evaluates the shape model with identity and expression coefficients:
/// mean + U_s p_s + U_e p_e, reshaped to [N,3]. Differentiable in both.
ad::Var shape_eval(ad::Tape& tape, const LinearModel& shape, const LinearModel& expr,
                   const ad::Var& p_s, const ad::Var& p_e);

/// Plain evaluation of the same.
ad::Tensor shape_eval_plain(const LinearModel& shape, const LinearModel& expr,
                            const ad::ArrayXd& p_s, const ad::ArrayXd& p_e);

/// Evaluates the linear texture model into a UV image [H,W,3]. Values may
/// leave [0,1]; the renderer clamps smoothly at shading time.
ad::Var texture_eval_linear(ad::Tape& tape, const LinearModel& texture, ad::Index uv_size,
                            const ad::Var& p_t);

/// Samples a UV image at per-vertex texture coordinates: bilinear,
/// clamp-to-edge, differentiable w.r.t. the image and the coordinates.
ad::Var uv_sample(const ad::Var& uv_image, const ad::Var& uv_coords);

} // namespace facefit::morph
