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

#include <doctest.h>

#include <filesystem>

#include "facefit/io/array_store.hpp"
#include "facefit/render/renderer.hpp"
#include "testutil.hpp"

using namespace facefit;
using namespace facefit::ad;
using namespace facefit::render;
using facefit::morph::ModelBundle;
using facefit::testutil::max_rel_err;
using facefit::testutil::test_bundle;

namespace {

RenderConfig small_render_config(const ModelBundle& b, Index size = 64) {
    RenderConfig cfg;
    cfg.width = size;
    cfg.height = size;
    cfg.focal_scale = static_cast<double>(size) / b.render_size_ref;
    return cfg;
}

// Vertices/albedo of the bundle head at given coefficients, as tape vars.
struct SceneVars {
    Var vertices, albedo, p_c, p_l;
};

SceneVars scene_vars(Tape& tape, const ModelBundle& b, const ArrayXd& ps, const ArrayXd& pe,
                     const ArrayXd& pt, const ArrayXd& pc, const ArrayXd& pl) {
    SceneVars sv;
    Var vps = tape.leaf("p_s", Tensor({ps.size()}, ps));
    Var vpe = tape.leaf("p_e", Tensor({pe.size()}, pe));
    Var vpt = tape.leaf("p_t", Tensor({pt.size()}, pt));
    sv.p_c = tape.leaf("p_c", Tensor({10}, pc));
    sv.p_l = tape.leaf("p_l", Tensor({9}, pl));
    sv.vertices = morph::shape_eval(tape, b.shape, b.expr, vps, vpe);
    Var uv_img = morph::texture_eval_linear(tape, b.texture, b.uv_size, vpt);
    Var uv_coords = tape.constant(b.mesh.uv);
    sv.albedo = morph::uv_sample(uv_img, uv_coords);
    return sv;
}

} // namespace

TEST_CASE("project") {
    const auto& b = test_bundle();
    SUBCASE("look-at point lands on the image center") {
        Tape tape;
        Rng rng(31);
        for (int trial = 0; trial < 3; ++trial) {
            ArrayXd pc = b.sampler.mu_c.data;
            for (Index i = 0; i < 10; ++i) pc[i] += rng.normal(0.0, b.sampler.sigma_c.data[i]);
            Var p_c = tape.constant(Tensor({10}, pc));
            Tensor pt({1, 3}, pc.segment(3, 3));
            auto pr = project(tape, p_c, tape.constant(pt), 128, 128);
            CHECK(pr.pixels.data()[0] == doctest::Approx(64.0).epsilon(1e-12));
            CHECK(pr.pixels.data()[1] == doctest::Approx(64.0).epsilon(1e-12));
        }
    }
    SUBCASE("doubling focal doubles offsets from center") {
        Tape tape;
        ArrayXd pc = b.sampler.mu_c.data;
        Tensor pts({2, 3}, (ArrayXd(6) << 30, 20, 60, -25, 14, -10).finished());
        auto pr1 = project(tape, tape.constant(Tensor({10}, pc)), tape.constant(pts), 128, 128);
        ArrayXd pc2 = pc;
        pc2[9] *= 2.0;
        auto pr2 = project(tape, tape.constant(Tensor({10}, pc2)), tape.constant(pts), 128, 128);
        for (Index i = 0; i < 2; ++i) {
            for (Index k = 0; k < 2; ++k) {
                const double off1 = pr1.pixels.data()[i * 2 + k] - 64.0;
                const double off2 = pr2.pixels.data()[i * 2 + k] - 64.0;
                CHECK(off2 == doctest::Approx(2.0 * off1).epsilon(1e-10));
            }
        }
    }
    SUBCASE("gradients vs finite differences") {
        Rng rng(32);
        testutil::GradCheck gc;
        gc.inputs.push_back(Tensor({10}, b.sampler.mu_c.data +
                                             rng.normal_array(10, 0.0, 1.0) *
                                                 b.sampler.sigma_c.data * 0.3));
        ArrayXd pts(4 * 3);
        for (Index i = 0; i < 4; ++i) {
            pts[i * 3 + 0] = rng.uniform(-60, 60);
            pts[i * 3 + 1] = rng.uniform(-60, 60);
            pts[i * 3 + 2] = rng.uniform(-40, 80);
        }
        gc.inputs.push_back(Tensor({4, 3}, pts));
        gc.op = [](Tape& t, const std::vector<Var>& v) {
            return project(t, v[0], v[1], 128, 128).pixels;
        };
        CHECK(gc.run() < 1e-6);
    }
    SUBCASE("behind-camera points are flagged") {
        Camera cam = Camera::from_params(b.sampler.mu_c.data, 128, 128);
        Tensor pts({2, 3}, (ArrayXd(6) << 0, 0, 0, 0, 0, 1000).finished());
        auto flags = points_in_front(cam, pts);
        CHECK(flags[0]);
        CHECK_FALSE(flags[1]);  // behind the camera at z=420
    }
}

TEST_CASE("rasterize") {
    // camera at -z looking at origin with focal 200 at 64x64
    ArrayXd pc(10);
    pc << 0, 0, -400, 0, 0, 0, 0, 1, 0, 200;
    Camera cam = Camera::from_params(pc, 64, 64, 1.0);

    SUBCASE("pixel at a projected vertex gets weight (1,0,0)") {
        // v0 projects exactly onto a pixel center (half-integer coordinates)
        Tensor verts({3, 3}, (ArrayXd(9) << 1, -1, 0, 40, -1, 0, 1, 30, 0).finished());
        std::vector<std::array<Index, 3>> tris = {{0, 1, 2}};
        GBuffer gb = rasterize(cam, verts, tris);
        ArrayXd px, depth;
        project_plain(cam, verts, px, depth);
        REQUIRE(px[0] == doctest::Approx(std::floor(px[0]) + 0.5).epsilon(1e-12));
        REQUIRE(px[1] == doctest::Approx(std::floor(px[1]) + 0.5).epsilon(1e-12));
        const Index p = static_cast<Index>(px[1]) * 64 + static_cast<Index>(px[0]);
        REQUIRE(gb.tri_id[p] == 0);
        CHECK(gb.bary[p * 3 + 0] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(std::abs(gb.bary[p * 3 + 1]) < 1e-6);
        CHECK(std::abs(gb.bary[p * 3 + 2]) < 1e-6);
    }
    SUBCASE("two overlapping triangles: nearer wins every contested pixel") {
        // triangle 0 at z=0, triangle 1 at z=-100 (nearer to the camera),
        // shifted so they partially overlap on screen
        Tensor verts({6, 3}, (ArrayXd(18) << -60, -60, 0, 60, -60, 0, 0, 80, 0, -30, -30, -100,
                              90, -30, -100, 30, 90, -100)
                                 .finished());
        std::vector<std::array<Index, 3>> tris = {{0, 1, 2}, {3, 4, 5}};
        GBuffer gb = rasterize(cam, verts, tris);

        // brute-force oracle: screen-space point-in-triangle + depth per pixel
        ArrayXd px, depth;
        project_plain(cam, verts, px, depth);
        auto covers = [&](int t, double qx, double qy, double& z_out) {
            const Index i0 = tris[t][0], i1 = tris[t][1], i2 = tris[t][2];
            const double x0 = px[i0 * 2], y0 = px[i0 * 2 + 1];
            const double x1 = px[i1 * 2], y1 = px[i1 * 2 + 1];
            const double x2 = px[i2 * 2], y2 = px[i2 * 2 + 1];
            const double area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
            const double w0 = ((x1 - qx) * (y2 - qy) - (y1 - qy) * (x2 - qx)) / area;
            const double w1 = ((x2 - qx) * (y0 - qy) - (y2 - qy) * (x0 - qx)) / area;
            const double w2 = 1.0 - w0 - w1;
            if (w0 < 0 || w1 < 0 || w2 < 0) return false;
            z_out = 1.0 / (w0 / depth[i0] + w1 / depth[i1] + w2 / depth[i2]);
            return true;
        };
        int contested = 0;
        for (Index y = 0; y < 64; ++y)
            for (Index x = 0; x < 64; ++x) {
                double z0 = 0, z1 = 0;
                const bool c0 = covers(0, x + 0.5, y + 0.5, z0);
                const bool c1 = covers(1, x + 0.5, y + 0.5, z1);
                const int got = gb.tri_id[y * 64 + x];
                if (c0 && c1) {
                    ++contested;
                    CHECK(got == (z1 < z0 ? 1 : 0));
                } else if (c0 || c1) {
                    CHECK(got == (c0 ? 0 : 1));
                } else {
                    CHECK(got == -1);
                }
            }
        CHECK(contested > 50);  // the setup really does overlap
    }
    SUBCASE("fully off-screen mesh yields zero coverage, not an error") {
        Tensor verts({3, 3}, (ArrayXd(9) << 5000, 5000, 0, 5100, 5000, 0, 5000, 5100, 0)
                                 .finished());
        GBuffer gb = rasterize(cam, verts, {{0, 1, 2}});
        CHECK(gb.covered.empty());
        CHECK(gb.coverage_fraction() == 0.0);
    }
    SUBCASE("barycentric partition of unity on covered pixels") {
        const auto& b = test_bundle();
        Camera hc = Camera::from_params(b.sampler.mu_c.data, 64, 64, 0.5);
        GBuffer gb = rasterize(hc, b.mesh.vertices, b.mesh.triangles);
        REQUIRE(gb.covered.size() > 400);
        for (Index p : gb.covered) {
            const double s = gb.bary[p * 3] + gb.bary[p * 3 + 1] + gb.bary[p * 3 + 2];
            CHECK(std::abs(s - 1.0) < 1e-9);
            CHECK(gb.bary[p * 3] >= -1e-12);
            CHECK(gb.bary[p * 3 + 1] >= -1e-12);
            CHECK(gb.bary[p * 3 + 2] >= -1e-12);
        }
    }
}

TEST_CASE("shade") {
    Tape tape;
    const Index n = 4;
    Var albedo = tape.constant(Tensor::full({n, 3}, 0.5));
    // normals facing +z, light on the +z axis
    ArrayXd nz(n * 3);
    for (Index i = 0; i < n; ++i) {
        nz[i * 3] = 0;
        nz[i * 3 + 1] = 0;
        nz[i * 3 + 2] = 1;
    }
    Var normals = tape.constant(Tensor({n, 3}, nz));
    Var pos = tape.constant(Tensor::zeros({n, 3}));
    RenderConfig cfg;

    SUBCASE("ambient-only reproduces the albedo exactly") {
        ArrayXd pl(9);
        pl << 0, 0, 500, 0, 0, 0, 1, 1, 1;
        Var rgb = shade(tape, albedo, normals, pos, tape.constant(Tensor({9}, pl)), cfg);
        CHECK((rgb.data() - 0.5).abs().maxCoeff() == 0.0);
    }
    SUBCASE("head-on light, no ambient: Lambert cosine of 1") {
        ArrayXd pl(9);
        pl << 0, 0, 500, 1, 1, 1, 0, 0, 0;
        Var rgb = shade(tape, albedo, normals, pos, tape.constant(Tensor({9}, pl)), cfg);
        CHECK((rgb.data() - 0.5).abs().maxCoeff() < 1e-14);
    }
    SUBCASE("normal at 60 degrees to the light gives diffuse factor 0.5") {
        ArrayXd n60(3);
        n60 << std::sqrt(3.0) / 2.0, 0.0, 0.5;  // 60 deg from +z
        Var tilted = tape.constant(Tensor({1, 3}, n60));
        ArrayXd pl(9);
        pl << 0, 0, 500, 1, 1, 1, 0, 0, 0;
        Var one_albedo = tape.constant(Tensor::full({1, 3}, 0.9));
        Var rgb = shade(tape, one_albedo, tilted, tape.constant(Tensor::zeros({1, 3})),
                        tape.constant(Tensor({9}, pl)), cfg);
        CHECK(rgb.data()[0] == doctest::Approx(0.45).epsilon(1e-12));
    }
    SUBCASE("light behind the surface leaves only ambient") {
        ArrayXd pl(9);
        pl << 0, 0, -500, 1, 1, 1, 0.3, 0.3, 0.3;
        Var rgb = shade(tape, albedo, normals, pos, tape.constant(Tensor({9}, pl)), cfg);
        CHECK((rgb.data() - 0.15).abs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("render_scene") {
    const auto& b = test_bundle();
    RenderConfig cfg = small_render_config(b);
    Rng rng(41);
    const ArrayXd ps = rng.normal_array(b.n_s(), 0.0, 0.5);
    const ArrayXd pe = rng.normal_array(b.n_e(), 0.0, 0.3);
    const ArrayXd pt = rng.normal_array(b.n_t(), 0.0, 0.7);

    SUBCASE("pure function: identical inputs give bit-identical output") {
        auto run = [&] {
            Tape tape;
            SceneVars sv = scene_vars(tape, b, ps, pe, pt, b.sampler.mu_c.data,
                                      b.sampler.mu_l.data);
            auto out = render_scene(tape, b.mesh, sv.vertices, sv.albedo, sv.p_c, sv.p_l, cfg);
            return ArrayXd(out.rgb.data());
        };
        ArrayXd r1 = run(), r2 = run();
        CHECK((r1 == r2).all());
    }
    SUBCASE("ambient-only render of constant albedo reproduces the color on the mask") {
        Tape tape;
        Var vps = tape.constant(Tensor::zeros({b.n_s()}));
        Var vpe = tape.constant(Tensor::zeros({b.n_e()}));
        Var verts = morph::shape_eval(tape, b.shape, b.expr, vps, vpe);
        Var albedo = tape.constant(Tensor::full({b.mesh.num_vertices(), 3}, 0.4));
        ArrayXd pl(9);
        pl << 0, 0, 500, 0, 0, 0, 1, 1, 1;
        auto out = render_scene(tape, b.mesh, verts, albedo, tape.constant(b.sampler.mu_c),
                                tape.constant(Tensor({9}, pl)), cfg);
        REQUIRE(out.gbuffer.covered.size() > 200);
        // exact up to the roundoff of the barycentric partition of unity
        double worst = 0.0;
        for (Index p : out.gbuffer.covered)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(out.rgb.data()[p * 3 + c] - 0.4));
        CHECK(worst < 1e-14);
        // background stays black
        Index bg = -1;
        for (Index p = 0; p < cfg.width * cfg.height; ++p)
            if (out.gbuffer.tri_id[static_cast<std::size_t>(p)] < 0) {
                bg = p;
                break;
            }
        REQUIRE(bg >= 0);
        CHECK(out.rgb.data()[bg * 3] == 0.0);
    }
    SUBCASE("light behind the head: covered pixels are albedo * ambient") {
        Tape tape;
        Var vps = tape.constant(Tensor::zeros({b.n_s()}));
        Var vpe = tape.constant(Tensor::zeros({b.n_e()}));
        Var verts = morph::shape_eval(tape, b.shape, b.expr, vps, vpe);
        Var albedo = tape.constant(Tensor::full({b.mesh.num_vertices(), 3}, 0.6));
        ArrayXd pl(9);
        pl << 0, 0, -2000, 1, 1, 1, 0.5, 0.5, 0.5;  // light far behind
        auto out = render_scene(tape, b.mesh, verts, albedo, tape.constant(b.sampler.mu_c),
                                tape.constant(Tensor({9}, pl)), cfg);
        for (Index p : out.gbuffer.covered) {
            for (int c = 0; c < 3; ++c)
                CHECK(out.rgb.data()[p * 3 + c] == doctest::Approx(0.3).epsilon(1e-12));
        }
    }
    SUBCASE("golden render: zero parameters, default camera and light") {
        Tape tape;
        SceneVars sv = scene_vars(tape, b, ArrayXd::Zero(b.n_s()), ArrayXd::Zero(b.n_e()),
                                  ArrayXd::Zero(b.n_t()), b.sampler.mu_c.data,
                                  b.sampler.mu_l.data);
        auto out = render_scene(tape, b.mesh, sv.vertices, sv.albedo, sv.p_c, sv.p_l, cfg);
        const std::filesystem::path golden =
            std::filesystem::path(FACEFIT_TESTS_DIR) / "golden" / "render_zero.f32";
        ArrayXd rendered = out.rgb.data();
        if (!std::filesystem::exists(golden)) {
            std::filesystem::create_directories(golden.parent_path());
            io::write_f32(golden, rendered);
            MESSAGE("golden file created at ", golden.string());
        }
        ArrayXd stored = io::read_f32(golden);
        REQUIRE(stored.size() == rendered.size());
        // frozen at f32 precision; comparison is bit-exact at that width
        for (Index i = 0; i < rendered.size(); ++i)
            CHECK(static_cast<float>(rendered[i]) == static_cast<float>(stored[i]));
    }
    SUBCASE("gradient of mean rgb w.r.t. camera matches frozen-visibility FD") {
        Tape tape;
        SceneVars sv = scene_vars(tape, b, ps, pe, pt, b.sampler.mu_c.data, b.sampler.mu_l.data);
        auto out = render_scene(tape, b.mesh, sv.vertices, sv.albedo, sv.p_c, sv.p_l, cfg);
        Var loss = mean(out.rgb);
        auto grads = tape.backward(loss);
        const GBuffer frozen = out.gbuffer;

        auto eval = [&](const ArrayXd& pc) {
            Tape t2;
            SceneVars sv2 = scene_vars(t2, b, ps, pe, pt, pc, b.sampler.mu_l.data);
            auto o2 = render_scene(t2, b.mesh, sv2.vertices, sv2.albedo, sv2.p_c, sv2.p_l, cfg,
                                   &frozen);
            return mean(o2.rgb).item();
        };
        ArrayXd fd(10);
        ArrayXd pc0 = b.sampler.mu_c.data;
        for (Index i = 0; i < 10; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(pc0[i]));
            ArrayXd p_up = pc0, p_dn = pc0;
            p_up[i] += h;
            p_dn[i] -= h;
            fd[i] = (eval(p_up) - eval(p_dn)) / (2.0 * h);
        }
        const double err = max_rel_err(grads.grad("p_c").data, fd);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("render_random_secondary draws") {
    const auto& b = test_bundle();
    SUBCASE("zero sigmas reproduce the means") {
        morph::SamplerStats s0 = b.sampler;
        s0.sigma_c = Tensor::zeros({10});
        s0.sigma_l = Tensor::zeros({9});
        s0.sigma_e = 0.0;
        Rng rng(5);
        auto draw = draw_secondary_conditions(s0, b.n_e(), rng);
        CHECK((draw.p_c_hat.data == b.sampler.mu_c.data).all());
        CHECK((draw.p_l_hat.data == b.sampler.mu_l.data).all());
        CHECK(draw.p_e_hat.data.abs().maxCoeff() == 0.0);
    }
    SUBCASE("expression sampling std within 5% of 0.5 over 10^4 draws") {
        Rng rng(6);
        double sum = 0, sum2 = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            auto d = draw_secondary_conditions(b.sampler, 1, rng);
            sum += d.p_e_hat.data[0];
            sum2 += d.p_e_hat.data[0] * d.p_e_hat.data[0];
        }
        const double var = sum2 / n - (sum / n) * (sum / n);
        CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.05));
    }
    SUBCASE("fixed seed gives identical draws") {
        Rng r1(9), r2(9);
        auto d1 = draw_secondary_conditions(b.sampler, b.n_e(), r1);
        auto d2 = draw_secondary_conditions(b.sampler, b.n_e(), r2);
        CHECK((d1.p_c_hat.data == d2.p_c_hat.data).all());
        CHECK((d1.p_l_hat.data == d2.p_l_hat.data).all());
        CHECK((d1.p_e_hat.data == d2.p_e_hat.data).all());
    }
}
