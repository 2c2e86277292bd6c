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

#include "facefit/render/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace facefit::render {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;
using ad::Var;

ArrayXd GBuffer::mask() const {
    ArrayXd m = ArrayXd::Zero(width * height);
    for (Index p : covered) m[p] = 1.0;
    return m;
}

GBuffer rasterize(const Camera& cam, const Tensor& vertices,
                  const std::vector<std::array<Index, 3>>& triangles, double near_mm) {
    require(vertices.shape.size() == 2 && vertices.shape[1] == 3,
            "rasterize: vertices must be [N,3]");
    GBuffer gb;
    gb.width = cam.width;
    gb.height = cam.height;
    const Index hw = gb.width * gb.height;
    gb.tri_id.assign(static_cast<std::size_t>(hw), -1);
    gb.depth.assign(static_cast<std::size_t>(hw), std::numeric_limits<double>::infinity());
    gb.bary = ArrayXd::Zero(hw * 3);

    ArrayXd px, depth;
    project_plain(cam, vertices, px, depth);

    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        const Index i0 = tri[0], i1 = tri[1], i2 = tri[2];
        if (depth[i0] <= near_mm || depth[i1] <= near_mm || depth[i2] <= near_mm) continue;
        const double x0 = px[i0 * 2], y0 = px[i0 * 2 + 1];
        const double x1 = px[i1 * 2], y1 = px[i1 * 2 + 1];
        const double x2 = px[i2 * 2], y2 = px[i2 * 2 + 1];

        const double area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
        if (std::abs(area) < 1e-12) continue;

        const Index xlo = std::max<Index>(
            0, static_cast<Index>(std::floor(std::min({x0, x1, x2}) - 0.5)));
        const Index xhi = std::min<Index>(
            gb.width - 1, static_cast<Index>(std::ceil(std::max({x0, x1, x2}) + 0.5)));
        const Index ylo = std::max<Index>(
            0, static_cast<Index>(std::floor(std::min({y0, y1, y2}) - 0.5)));
        const Index yhi = std::min<Index>(
            gb.height - 1, static_cast<Index>(std::ceil(std::max({y0, y1, y2}) + 0.5)));

        for (Index y = ylo; y <= yhi; ++y) {
            const double qy = static_cast<double>(y) + 0.5;
            for (Index x = xlo; x <= xhi; ++x) {
                const double qx = static_cast<double>(x) + 0.5;
                const double w0 = ((x1 - qx) * (y2 - qy) - (y1 - qy) * (x2 - qx)) / area;
                const double w1 = ((x2 - qx) * (y0 - qy) - (y2 - qy) * (x0 - qx)) / area;
                const double w2 = ((x0 - qx) * (y1 - qy) - (y0 - qy) * (x1 - qx)) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                // perspective-correct weights and depth
                const double q0 = w0 / depth[i0], q1 = w1 / depth[i1], q2 = w2 / depth[i2];
                const double qsum = q0 + q1 + q2;
                const double z = 1.0 / qsum;
                const Index p = y * gb.width + x;
                if (z < gb.depth[static_cast<std::size_t>(p)]) {
                    gb.depth[static_cast<std::size_t>(p)] = z;
                    gb.tri_id[static_cast<std::size_t>(p)] = static_cast<int>(t);
                    gb.bary[p * 3 + 0] = q0 / qsum;
                    gb.bary[p * 3 + 1] = q1 / qsum;
                    gb.bary[p * 3 + 2] = q2 / qsum;
                }
            }
        }
    }
    for (Index p = 0; p < hw; ++p) {
        if (gb.tri_id[static_cast<std::size_t>(p)] >= 0) gb.covered.push_back(p);
    }
    return gb;
}

Var vertex_normals(ad::Tape& tape, const Var& vertices,
                   const std::vector<std::array<Index, 3>>& triangles) {
    const Index n = vertices.shape()[0];
    std::vector<Index> i0s, i1s, i2s;
    i0s.reserve(triangles.size());
    i1s.reserve(triangles.size());
    i2s.reserve(triangles.size());
    for (const auto& t : triangles) {
        i0s.push_back(t[0]);
        i1s.push_back(t[1]);
        i2s.push_back(t[2]);
    }
    Var v0 = gather_rows(vertices, i0s);
    Var v1 = gather_rows(vertices, i1s);
    Var v2 = gather_rows(vertices, i2s);
    // 2x-area-weighted face normals accumulated onto the corners
    Var fn = cross_rows(v1 - v0, v2 - v0);
    Var acc = scatter_rows(fn, i0s, n) + scatter_rows(fn, i1s, n) + scatter_rows(fn, i2s, n);
    (void)tape;
    return normalize_rows(acc);
}

Var shade(ad::Tape& tape, const Var& albedo_px, const Var& normal_px, const Var& worldpos_px,
          const Var& p_l, const RenderConfig& cfg) {
    require(p_l.numel() == 9, "shade: p_l must have 9 entries");
    Var light_pos = slice_flat(p_l, 0, 3);
    Var light_rgb = slice_flat(p_l, 3, 3);
    Var ambient = slice_flat(p_l, 6, 3);

    Var to_light = add_rowvec(-worldpos_px, light_pos);
    Var l_dir = normalize_rows(to_light);
    Var ndotl = relu(row_dots(normal_px, l_dir));
    if (cfg.light_attenuation) {
        // inverse-square falloff, unit gain at the reference distance
        Var dist2 = row_dots(to_light, to_light);
        Var gain = (cfg.attenuation_ref_mm * cfg.attenuation_ref_mm) / dist2;
        ndotl = ndotl * gain;
    }
    Var radiance = add_rowvec(outer(ndotl, light_rgb), ambient);
    (void)tape;
    return smooth_clamp01(albedo_px * radiance, cfg.clamp_margin);
}

RenderOutput render_scene(ad::Tape& tape, const morph::TriMesh& mesh_topology,
                          const Var& vertices, const Var& vertex_albedo, const Var& p_c,
                          const Var& p_l, const RenderConfig& cfg, const GBuffer* frozen) {
    require(vertex_albedo.shape().size() == 2 &&
                vertex_albedo.shape()[0] == vertices.shape()[0] && vertex_albedo.shape()[1] == 3,
            "render_scene: vertex_albedo must be [N,3] matching the vertices");

    RenderOutput out;
    if (frozen != nullptr) {
        require(frozen->width == cfg.width && frozen->height == cfg.height,
                "render_scene: frozen visibility buffer size mismatch");
        out.gbuffer = *frozen;
    } else {
        Camera cam = Camera::from_params(p_c.data(), cfg.width, cfg.height, cfg.focal_scale);
        out.gbuffer = rasterize(cam, vertices.value(), mesh_topology.triangles, cfg.near_mm);
    }
    const GBuffer& gb = out.gbuffer;
    const Index hw = cfg.width * cfg.height;
    const Index n_px = static_cast<Index>(gb.covered.size());

    Projection proj = project(tape, p_c, vertices, cfg.width, cfg.height, cfg.focal_scale,
                              cfg.near_mm);
    Var normals = vertex_normals(tape, vertices, mesh_topology.triangles);

    // per-covered-pixel corner ids and pixel centers
    std::vector<Index> ia(static_cast<std::size_t>(n_px)), ib(static_cast<std::size_t>(n_px)),
        ic(static_cast<std::size_t>(n_px));
    ArrayXd centers(n_px * 2);
    for (Index j = 0; j < n_px; ++j) {
        const Index p = gb.covered[static_cast<std::size_t>(j)];
        const auto& tri =
            mesh_topology.triangles[static_cast<std::size_t>(gb.tri_id[static_cast<std::size_t>(p)])];
        ia[static_cast<std::size_t>(j)] = tri[0];
        ib[static_cast<std::size_t>(j)] = tri[1];
        ic[static_cast<std::size_t>(j)] = tri[2];
        centers[j * 2 + 0] = static_cast<double>(p % cfg.width) + 0.5;
        centers[j * 2 + 1] = static_cast<double>(p / cfg.width) + 0.5;
    }

    Var a = gather_rows(proj.pixels, ia);
    Var b = gather_rows(proj.pixels, ib);
    Var c = gather_rows(proj.pixels, ic);
    Var q = tape.constant(Tensor({n_px, 2}, centers));

    Var ax = col(a, 0), ay = col(a, 1);
    Var bx = col(b, 0), by = col(b, 1);
    Var cx = col(c, 0), cy = col(c, 1);
    Var qx = col(q, 0), qy = col(q, 1);

    // screen-space barycentric weights as differentiable functions of the
    // projected corners (shared signed-area denominator)
    Var area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    Var w0 = ((bx - qx) * (cy - qy) - (by - qy) * (cx - qx)) / area;
    Var w1 = ((cx - qx) * (ay - qy) - (cy - qy) * (ax - qx)) / area;
    Var w2 = ((ax - qx) * (by - qy) - (ay - qy) * (bx - qx)) / area;

    // perspective correction with the view depths
    Var za = gather_rows(reshape(proj.depth, {vertices.shape()[0], 1}), ia);
    Var zb = gather_rows(reshape(proj.depth, {vertices.shape()[0], 1}), ib);
    Var zc = gather_rows(reshape(proj.depth, {vertices.shape()[0], 1}), ic);
    Var q0 = w0 / reshape(za, {n_px});
    Var q1 = w1 / reshape(zb, {n_px});
    Var q2 = w2 / reshape(zc, {n_px});
    Var qsum = q0 + q1 + q2;
    Var u0 = q0 / qsum, u1 = q1 / qsum, u2 = q2 / qsum;

    auto interpolate = [&](const Var& attr) {
        return scale_rows(gather_rows(attr, ia), u0) + scale_rows(gather_rows(attr, ib), u1) +
               scale_rows(gather_rows(attr, ic), u2);
    };
    Var albedo_px = interpolate(vertex_albedo);
    Var pos_px = interpolate(vertices);
    Var normal_px = normalize_rows(interpolate(normals));

    Var rgb_px = shade(tape, albedo_px, normal_px, pos_px, p_l, cfg);
    out.rgb = reshape(scatter_rows(rgb_px, gb.covered, hw), {cfg.height, cfg.width, 3});
    return out;
}

Tensor render_bundle_plain(const morph::ModelBundle& bundle, const ArrayXd& p_s,
                           const ArrayXd& p_e, const Tensor& uv_texture, const ArrayXd& p_c,
                           const ArrayXd& p_l, const RenderConfig& cfg) {
    ad::Tape tape;
    Var vs = tape.constant(Tensor({p_s.size()}, p_s));
    Var ve = tape.constant(Tensor({p_e.size()}, p_e));
    Var verts = morph::shape_eval(tape, bundle.shape, bundle.expr, vs, ve);
    Var albedo = bilinear_sample(tape.constant(uv_texture), tape.constant(bundle.mesh.uv));
    auto out = render_scene(tape, bundle.mesh, verts, albedo, tape.constant(Tensor({10}, p_c)),
                            tape.constant(Tensor({9}, p_l)), cfg);
    return out.rgb.value();
}

SecondaryDraw draw_secondary_conditions(const morph::SamplerStats& stats, Index n_e, Rng& rng) {
    SecondaryDraw draw;
    draw.p_e_hat = Tensor({n_e}, rng.normal_array(n_e, 0.0, stats.sigma_e));
    for (int attempt = 0; attempt < 10; ++attempt) {
        ArrayXd c(10);
        for (Index i = 0; i < 10; ++i)
            c[i] = rng.normal(stats.mu_c.data[i], stats.sigma_c.data[i]);
        const Eigen::Vector3d pos(c[0], c[1], c[2]), look(c[3], c[4], c[5]), up(c[6], c[7], c[8]);
        if (c[9] > 1.0 && up.cross(look - pos).norm() > 1e-6) {
            draw.p_c_hat = Tensor({10}, std::move(c));
            break;
        }
        require(attempt < 9, "draw_secondary_conditions: no valid camera in 10 attempts");
    }
    ArrayXd l(9);
    for (Index i = 0; i < 9; ++i) l[i] = rng.normal(stats.mu_l.data[i], stats.sigma_l.data[i]);
    l.tail(6) = l.tail(6).max(0.0);  // color channels stay nonnegative
    draw.p_l_hat = Tensor({9}, std::move(l));
    return draw;
}

} // namespace facefit::render
