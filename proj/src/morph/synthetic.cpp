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

#include "facefit/morph/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "facefit/core/rng.hpp"

namespace facefit::morph {

using ad::ArrayXd;
using ad::Index;
using ad::Tensor;

namespace {

struct IcoMesh {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<Index, 3>> tris;
};

IcoMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    IcoMesh m;
    m.verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : m.verts) v.normalize();
    m.tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
              {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
              {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
              {8, 6, 7},  {9, 8, 1}};
    return m;
}

IcoMesh subdivide(const IcoMesh& in) {
    IcoMesh out;
    out.verts = in.verts;
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Eigen::Vector3d v = (out.verts[static_cast<std::size_t>(a)] +
                             out.verts[static_cast<std::size_t>(b)]).normalized();
        out.verts.push_back(v);
        const Index id = static_cast<Index>(out.verts.size()) - 1;
        midpoint.emplace(key, id);
        return id;
    };
    for (const auto& t : in.tris) {
        const Index m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
        out.tris.push_back({t[0], m01, m20});
        out.tris.push_back({t[1], m12, m01});
        out.tris.push_back({t[2], m20, m12});
        out.tris.push_back({m01, m12, m20});
    }
    return out;
}

// Deforms a unit sphere into a mildly head-like blob, millimeters.
Eigen::Vector3d head_deform(const Eigen::Vector3d& unit) {
    const double base_radius = 100.0;
    Eigen::Vector3d p = unit;
    // slightly taller than wide, flattened back
    p.x() *= 0.92;
    p.y() *= 1.12;
    p.z() *= (unit.z() > 0 ? 1.0 : 0.88);
    p *= base_radius;
    // nose: bump along +z near the equator front
    const Eigen::Vector3d nose_dir(0.0, -0.12, 1.0);
    const double ang = std::acos(std::clamp(unit.dot(nose_dir.normalized()), -1.0, 1.0));
    p += 16.0 * std::exp(-(ang * ang) / (2.0 * 0.22 * 0.22)) * unit;
    // brow ridge
    const Eigen::Vector3d brow_dir(0.0, 0.35, 1.0);
    const double ang_b = std::acos(std::clamp(unit.dot(brow_dir.normalized()), -1.0, 1.0));
    p += 5.0 * std::exp(-(ang_b * ang_b) / (2.0 * 0.3 * 0.3)) * unit;
    // chin
    const Eigen::Vector3d chin_dir(0.0, -0.75, 0.66);
    const double ang_c = std::acos(std::clamp(unit.dot(chin_dir.normalized()), -1.0, 1.0));
    p += 6.0 * std::exp(-(ang_c * ang_c) / (2.0 * 0.25 * 0.25)) * unit;
    return p;
}

// Farthest-point sampling over a candidate vertex set, seeded at `start`.
std::vector<Index> farthest_point_sample(const Tensor& vertices,
                                         const std::vector<Index>& candidates, Index start,
                                         Index count) {
    std::vector<Index> chosen{start};
    std::vector<double> dist(candidates.size(), std::numeric_limits<double>::infinity());
    auto vpos = [&](Index id) {
        return Eigen::Vector3d(vertices.at(id, 0), vertices.at(id, 1), vertices.at(id, 2));
    };
    while (static_cast<Index>(chosen.size()) < count) {
        const Eigen::Vector3d last = vpos(chosen.back());
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            dist[i] = std::min(dist[i], (vpos(candidates[i]) - last).norm());
            if (dist[i] > best) {
                best = dist[i];
                best_i = i;
            }
        }
        chosen.push_back(candidates[best_i]);
    }
    return chosen;
}

// Smooth random low-frequency displacement field over the template.
ArrayXd random_field(Rng& rng, const Tensor& vertices, bool localized) {
    const Index n = vertices.shape[0];
    ArrayXd field = ArrayXd::Zero(n * 3);
    const int waves = 5;
    for (int k = 0; k < waves; ++k) {
        Eigen::Vector3d amp(rng.normal(), rng.normal(), rng.normal());
        Eigen::Vector3d omega(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0));
        omega *= rng.uniform(0.5, 2.2) / std::max(omega.norm(), 1e-9);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (Index i = 0; i < n; ++i) {
            const Eigen::Vector3d x(vertices.at(i, 0) / 100.0, vertices.at(i, 1) / 100.0,
                                    vertices.at(i, 2) / 100.0);
            const double s = std::sin(omega.dot(x) + phase);
            field.segment(i * 3, 3) += (amp * s).array();
        }
    }
    if (localized) {
        // expression-style: gate by a radial bump around a random front anchor
        const double theta = rng.uniform(-0.9, 0.9);
        const double phi = rng.uniform(-0.9, 0.9);
        const Eigen::Vector3d anchor =
            100.0 * Eigen::Vector3d(std::sin(theta), std::sin(phi), 1.0).normalized();
        const double sigma = rng.uniform(18.0, 42.0);
        for (Index i = 0; i < n; ++i) {
            const Eigen::Vector3d x(vertices.at(i, 0), vertices.at(i, 1), vertices.at(i, 2));
            const double w = std::exp(-(x - anchor).squaredNorm() / (2.0 * sigma * sigma));
            field.segment(i * 3, 3) *= w;
        }
    }
    return field;
}

// Orthonormalizes columns then scales them to the given per-component
// standard deviations (column norms).
Tensor build_scaled_basis(Rng& rng, const Tensor& vertices, Index n_comp, bool localized,
                          double rms_mm, double decay) {
    const Index d = vertices.shape[0] * 3;
    Eigen::MatrixXd cols(d, n_comp);
    for (Index j = 0; j < n_comp; ++j) cols.col(j) = random_field(rng, vertices, localized).matrix();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(cols);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, n_comp);
    ArrayXd data(d * n_comp);
    ad::RowMatrixMap m(data.data(), d, n_comp);
    const double per_vertex_to_col = std::sqrt(static_cast<double>(d));
    for (Index j = 0; j < n_comp; ++j) {
        const double scale =
            rms_mm * std::pow(1.0 + static_cast<double>(j), -decay) * per_vertex_to_col;
        m.col(j) = q.col(j) * scale;
    }
    return Tensor({d, n_comp}, std::move(data));
}

void splat_gaussian(ArrayXd& img, Index h, double cu, double cv, double sigma_px,
                    const Eigen::Vector3d& amp) {
    const double cx = cu * static_cast<double>(h);
    const double cy = cv * static_cast<double>(h);
    const Index r = static_cast<Index>(std::ceil(3.0 * sigma_px)) + 1;
    const Index x0 = std::max<Index>(0, static_cast<Index>(cx) - r);
    const Index x1 = std::min<Index>(h - 1, static_cast<Index>(cx) + r);
    const Index y0 = std::max<Index>(0, static_cast<Index>(cy) - r);
    const Index y1 = std::min<Index>(h - 1, static_cast<Index>(cy) + r);
    for (Index y = y0; y <= y1; ++y)
        for (Index x = x0; x <= x1; ++x) {
            const double dx = (static_cast<double>(x) + 0.5) - cx;
            const double dy = (static_cast<double>(y) + 0.5) - cy;
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_px * sigma_px));
            for (int c = 0; c < 3; ++c) img[(y * h + x) * 3 + c] += w * amp[c];
        }
}

// Procedural identity texture: base skin tone + low-frequency blotches +
// per-identity high-frequency marks.
ArrayXd make_texture(Rng& rng, Index h) {
    ArrayXd img(h * h * 3);
    const double r = rng.uniform(0.45, 0.8);
    const double g = r * rng.uniform(0.78, 0.92);
    const double b = g * rng.uniform(0.72, 0.9);
    for (Index p = 0; p < h * h; ++p) {
        img[p * 3 + 0] = r;
        img[p * 3 + 1] = g;
        img[p * 3 + 2] = b;
    }
    const Index blotches = rng.uniform_int(3, 6);
    for (Index k = 0; k < blotches; ++k) {
        const double amp = rng.uniform(0.05, 0.15) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        Eigen::Vector3d a(amp, amp * rng.uniform(0.7, 1.0), amp * rng.uniform(0.6, 1.0));
        splat_gaussian(img, h, rng.uniform(), rng.uniform(),
                       rng.uniform(0.08, 0.25) * static_cast<double>(h), a);
    }
    const Index marks = rng.uniform_int(25, 55);
    for (Index k = 0; k < marks; ++k) {
        const double amp = -rng.uniform(0.1, 0.3);  // mostly dark moles/freckles
        Eigen::Vector3d a(amp, amp * 0.9, amp * 0.8);
        if (rng.uniform() < 0.15) a = -a * 0.6;  // a few light marks
        splat_gaussian(img, h, rng.uniform(), rng.uniform(), rng.uniform(0.7, 1.6), a);
    }
    img = img.min(0.97).max(0.06);
    return img;
}

} // namespace

ModelBundle gen_synthetic_bundle(const GenOptions& opts) {
    require(opts.n_template >= 200, "gen_synthetic_bundle: N_template must be >= 200, got ",
            opts.n_template);
    require(opts.n_landmarks >= 5, "gen_synthetic_bundle: need at least 5 landmarks");
    require(opts.corpus_size >= opts.n_t + 1, "gen_synthetic_bundle: corpus size ",
            opts.corpus_size, " too small for ", opts.n_t, " texture components");
    require(opts.h_uv >= 8 && (opts.h_uv & (opts.h_uv - 1)) == 0,
            "gen_synthetic_bundle: H_uv must be a power of two >= 8");

    Rng rng(opts.seed);
    ModelBundle bundle;

    // template: subdivided icosphere, deformed into a head
    IcoMesh ico = icosahedron();
    while (static_cast<Index>(ico.verts.size()) < opts.n_template) ico = subdivide(ico);
    const Index n = static_cast<Index>(ico.verts.size());
    ArrayXd verts(n * 3), uv(n * 2);
    for (Index i = 0; i < n; ++i) {
        const Eigen::Vector3d u = ico.verts[static_cast<std::size_t>(i)];
        const Eigen::Vector3d p = head_deform(u);
        verts.segment(i * 3, 3) = p.array();
        // cylindrical unwrap: azimuth around +y, polar angle down from +y
        uv[i * 2 + 0] = std::atan2(u.x(), u.z()) / (2.0 * M_PI) + 0.5;
        uv[i * 2 + 1] = std::acos(std::clamp(u.y(), -1.0, 1.0)) / M_PI;
    }
    bundle.mesh.vertices = Tensor({n, 3}, std::move(verts));
    bundle.mesh.uv = Tensor({n, 2}, std::move(uv));
    bundle.mesh.triangles = ico.tris;

    // landmarks: spread over the front of the head by farthest-point
    // sampling, seeded at the nose tip (max z)
    Index nose = 0;
    for (Index i = 1; i < n; ++i)
        if (bundle.mesh.vertices.at(i, 2) > bundle.mesh.vertices.at(nose, 2)) nose = i;
    std::vector<Index> front;
    for (Index i = 0; i < n; ++i)
        if (bundle.mesh.vertices.at(i, 2) > 30.0 && i != nose) front.push_back(i);
    bundle.mesh.landmarks = farthest_point_sample(bundle.mesh.vertices, front, nose,
                                                  opts.n_landmarks);
    bundle.mesh.nose_tip = nose;
    bundle.mesh.validate();

    // shape / expression bases
    bundle.shape.mean = Tensor({n * 3}, bundle.mesh.vertices.data);
    bundle.shape.basis = build_scaled_basis(rng, bundle.mesh.vertices, opts.n_s,
                                            /*localized=*/false, 2.2, 0.55);
    bundle.expr.mean = Tensor::zeros({n * 3});
    bundle.expr.basis = build_scaled_basis(rng, bundle.mesh.vertices, opts.n_e,
                                           /*localized=*/true, 1.5, 0.5);

    // texture corpus + PCA model
    bundle.uv_size = opts.h_uv;
    const Index d_tex = opts.h_uv * opts.h_uv * 3;
    bundle.corpus.reserve(static_cast<std::size_t>(opts.corpus_size));
    Eigen::MatrixXd corpus_mat(opts.corpus_size, d_tex);
    for (Index i = 0; i < opts.corpus_size; ++i) {
        ArrayXd img = make_texture(rng, opts.h_uv);
        corpus_mat.row(i) = img.matrix().transpose();
        bundle.corpus.push_back(img.cast<float>());
    }
    Eigen::VectorXd tex_mean = corpus_mat.colwise().mean();
    corpus_mat.rowwise() -= tex_mean.transpose();
    // PCA via the Gram matrix (corpus_size << pixel count)
    Eigen::MatrixXd gram = corpus_mat * corpus_mat.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    ArrayXd basis_data(d_tex * opts.n_t);
    ad::RowMatrixMap basis_map(basis_data.data(), d_tex, opts.n_t);
    for (Index j = 0; j < opts.n_t; ++j) {
        const Index src = opts.corpus_size - 1 - j;  // eigenvalues ascend
        const double lambda = std::max(eig.eigenvalues()[src], 0.0);
        const double sv = std::sqrt(lambda);
        Eigen::VectorXd dir = corpus_mat.transpose() * eig.eigenvectors().col(src);
        if (sv > 1e-12) dir /= sv;
        const double stddev = sv / std::sqrt(static_cast<double>(opts.corpus_size - 1));
        basis_map.col(j) = dir * stddev;
    }
    bundle.texture.mean = Tensor({d_tex}, tex_mean.array());
    bundle.texture.basis = Tensor({d_tex, opts.n_t}, std::move(basis_data));

    // scene defaults and sampler statistics (stand-in for external pose and
    // illumination statistics, estimated for this synthetic scene family)
    bundle.sampler.mu_c = Tensor::from_array(
        {10}, (ArrayXd(10) << 0, 0, 420, 0, 0, 0, 0, 1, 0, 240).finished());
    bundle.sampler.sigma_c = Tensor::from_array(
        {10}, (ArrayXd(10) << 25, 25, 30, 8, 8, 8, 0.05, 0.02, 0.05, 15).finished());
    bundle.sampler.mu_l = Tensor::from_array(
        {9}, (ArrayXd(9) << 180, 160, 380, 0.55, 0.55, 0.55, 0.45, 0.45, 0.45).finished());
    bundle.sampler.sigma_l = Tensor::from_array(
        {9}, (ArrayXd(9) << 90, 90, 60, 0.07, 0.07, 0.07, 0.05, 0.05, 0.05).finished());
    bundle.sampler.sigma_e = 0.5;
    bundle.render_size_ref = 128;

    bundle.validate();
    return bundle;
}

} // namespace facefit::morph
