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

#include "facefit/ad/ops.hpp"

#include <cmath>
#include <memory>

namespace facefit::ad {

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
    require(a.valid() && b.valid(), op, ": invalid operand");
    require(&a.tape() == &b.tape(), op, ": operands live on different tapes");
    return a.tape();
}

struct Broadcast2 {
    ArrayXd va, vb;
    Shape shape;
    bool a_scalar = false;
    bool b_scalar = false;
};

Broadcast2 broadcast2(const Var& a, const Var& b, const char* op) {
    Broadcast2 r;
    const ArrayXd& da = a.data();
    const ArrayXd& db = b.data();
    if (same_shape(a.shape(), b.shape())) {
        r.va = da;
        r.vb = db;
        r.shape = a.shape();
    } else if (da.size() == 1) {
        r.a_scalar = true;
        r.va = ArrayXd::Constant(db.size(), da[0]);
        r.vb = db;
        r.shape = b.shape();
    } else if (db.size() == 1) {
        r.b_scalar = true;
        r.va = da;
        r.vb = ArrayXd::Constant(da.size(), db[0]);
        r.shape = a.shape();
    } else {
        require(false, op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                shape_str(b.shape()));
    }
    return r;
}

ArrayXd reduce_if(bool to_scalar, const ArrayXd& g) {
    if (!to_scalar) return g;
    return ArrayXd::Constant(1, g.sum());
}

const Tensor* node_value(const Var& v) { return &v.value(); }

} // namespace

// ---------------------------------------------------------------- arithmetic

Var operator+(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "add");
    auto bc = broadcast2(a, b, "add");
    const int ia = a.id(), ib = b.id();
    const bool as = bc.a_scalar, bs = bc.b_scalar;
    return t.emit(Tensor(bc.shape, bc.va + bc.vb), {ia, ib},
                  [ia, ib, as, bs](const ArrayXd& g, Gradients& s) {
                      s.add(ia, reduce_if(as, g));
                      s.add(ib, reduce_if(bs, g));
                  });
}

Var operator-(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "sub");
    auto bc = broadcast2(a, b, "sub");
    const int ia = a.id(), ib = b.id();
    const bool as = bc.a_scalar, bs = bc.b_scalar;
    return t.emit(Tensor(bc.shape, bc.va - bc.vb), {ia, ib},
                  [ia, ib, as, bs](const ArrayXd& g, Gradients& s) {
                      s.add(ia, reduce_if(as, g));
                      s.add(ib, reduce_if(bs, ArrayXd(-g)));
                  });
}

Var operator*(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "mul");
    auto bc = broadcast2(a, b, "mul");
    const int ia = a.id(), ib = b.id();
    const bool as = bc.a_scalar, bs = bc.b_scalar;
    return t.emit(Tensor(bc.shape, bc.va * bc.vb), {ia, ib},
                  [ia, ib, as, bs, va = bc.va, vb = bc.vb](const ArrayXd& g, Gradients& s) {
                      s.add(ia, reduce_if(as, ArrayXd(g * vb)));
                      s.add(ib, reduce_if(bs, ArrayXd(g * va)));
                  });
}

Var operator/(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "div");
    auto bc = broadcast2(a, b, "div");
    const int ia = a.id(), ib = b.id();
    const bool as = bc.a_scalar, bs = bc.b_scalar;
    ArrayXd out = bc.va / bc.vb;
    return t.emit(Tensor(bc.shape, out), {ia, ib},
                  [ia, ib, as, bs, vb = bc.vb, out](const ArrayXd& g, Gradients& s) {
                      s.add(ia, reduce_if(as, ArrayXd(g / vb)));
                      s.add(ib, reduce_if(bs, ArrayXd(-g * out / vb)));
                  });
}

Var operator-(const Var& a) {
    const int ia = a.id();
    return a.tape().emit(Tensor(a.shape(), -a.data()), {ia},
                         [ia](const ArrayXd& g, Gradients& s) { s.add(ia, ArrayXd(-g)); });
}

Var operator+(const Var& a, double b) {
    const int ia = a.id();
    return a.tape().emit(Tensor(a.shape(), a.data() + b), {ia},
                         [ia](const ArrayXd& g, Gradients& s) { s.add(ia, g); });
}
Var operator+(double a, const Var& b) { return b + a; }

Var operator-(const Var& a, double b) { return a + (-b); }
Var operator-(double a, const Var& b) {
    const int ib = b.id();
    return b.tape().emit(Tensor(b.shape(), a - b.data()), {ib},
                         [ib](const ArrayXd& g, Gradients& s) { s.add(ib, ArrayXd(-g)); });
}

Var operator*(const Var& a, double b) {
    const int ia = a.id();
    return a.tape().emit(Tensor(a.shape(), a.data() * b), {ia},
                         [ia, b](const ArrayXd& g, Gradients& s) { s.add(ia, ArrayXd(g * b)); });
}
Var operator*(double a, const Var& b) { return b * a; }

Var operator/(const Var& a, double b) { return a * (1.0 / b); }
Var operator/(double a, const Var& b) {
    const int ib = b.id();
    ArrayXd out = a / b.data();
    return b.tape().emit(Tensor(b.shape(), out), {ib},
                         [ib, out, vb = ArrayXd(b.data())](const ArrayXd& g, Gradients& s) {
                             s.add(ib, ArrayXd(-g * out / vb));
                         });
}

// ---------------------------------------------------------- elementwise fns

Var relu(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor(x.shape(), v.max(0.0)), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) {
                             // subgradient 0 at exactly 0
                             s.add(ix, ArrayXd((v > 0.0).select(g, 0.0)));
                         });
}

Var leaky_relu(const Var& x, double alpha) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    ArrayXd out = (v > 0.0).select(v, alpha * v);
    return x.tape().emit(Tensor(x.shape(), std::move(out)), {ix},
                         [ix, v, alpha](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd((v > 0.0).select(g, alpha * g)));
                         });
}

Var tanh(const Var& x) {
    const int ix = x.id();
    ArrayXd out = x.data().tanh();
    return x.tape().emit(Tensor(x.shape(), out), {ix},
                         [ix, out](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * (1.0 - out.square())));
                         });
}

Var exp(const Var& x) {
    const int ix = x.id();
    ArrayXd out = x.data().exp();
    return x.tape().emit(Tensor(x.shape(), out), {ix},
                         [ix, out](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * out));
                         });
}

Var log(const Var& x) {
    require_domain((x.data() > 0.0).all(), "log: non-positive input");
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor(x.shape(), v.log()), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) { s.add(ix, ArrayXd(g / v)); });
}

Var sqrt(const Var& x) {
    require_domain((x.data() >= 0.0).all(), "sqrt: negative input");
    const int ix = x.id();
    ArrayXd out = x.data().sqrt();
    return x.tape().emit(Tensor(x.shape(), out), {ix},
                         [ix, out](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * 0.5 / out));
                         });
}

Var pow(const Var& x, double p) {
    if (p != std::floor(p)) {
        require_domain((x.data() >= 0.0).all(), "pow: negative base with fractional exponent");
    }
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor(x.shape(), v.pow(p)), {ix},
                         [ix, v, p](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * p * v.pow(p - 1.0)));
                         });
}

Var abs(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor(x.shape(), v.abs()), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * v.sign()));
                         });
}

Var softplus(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    ArrayXd out = v.max(0.0) + (-v.abs()).exp().log1p();
    return x.tape().emit(Tensor(x.shape(), std::move(out)), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) {
                             // sigmoid(v), written to avoid overflow
                             ArrayXd sig = 0.5 * (1.0 + (0.5 * v).tanh());
                             s.add(ix, ArrayXd(g * sig));
                         });
}

Var square(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor(x.shape(), v.square()), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(2.0 * g * v));
                         });
}

Var smooth_clamp01(const Var& x, double margin) {
    require(margin > 0.0 && margin < 0.5, "smooth_clamp01: margin must be in (0, 0.5)");
    const int ix = x.id();
    const ArrayXd& v = x.data();
    const double m = margin, hi = 1.0 - margin;
    ArrayXd out(v.size()), dv(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double t = v[i];
        if (t < m) {
            const double e = std::exp((t - m) / m);
            out[i] = m * e;
            dv[i] = e;
        } else if (t > hi) {
            const double e = std::exp(-(t - hi) / m);
            out[i] = 1.0 - m * e;
            dv[i] = e;
        } else {
            out[i] = t;
            dv[i] = 1.0;
        }
    }
    return x.tape().emit(Tensor(x.shape(), std::move(out)), {ix},
                         [ix, dv](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g * dv));
                         });
}

// ----------------------------------------------------------------- reductions

Var sum(const Var& x) {
    const int ix = x.id();
    const Index n = x.numel();
    return x.tape().emit(Tensor::scalar(x.data().sum()), {ix},
                         [ix, n](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd::Constant(n, g[0]));
                         });
}

Var mean(const Var& x) {
    const int ix = x.id();
    const Index n = x.numel();
    return x.tape().emit(Tensor::scalar(x.data().mean()), {ix},
                         [ix, n](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd::Constant(n, g[0] / static_cast<double>(n)));
                         });
}

Var dot(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "dot");
    check_same_shape(a.value(), b.value(), "dot");
    const int ia = a.id(), ib = b.id();
    return t.emit(Tensor::scalar((a.data() * b.data()).sum()), {ia, ib},
                  [ia, ib, va = ArrayXd(a.data()), vb = ArrayXd(b.data())](const ArrayXd& g,
                                                                           Gradients& s) {
                      s.add(ia, ArrayXd(g[0] * vb));
                      s.add(ib, ArrayXd(g[0] * va));
                  });
}

Var l1_norm(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    return x.tape().emit(Tensor::scalar(v.abs().sum()), {ix},
                         [ix, v](const ArrayXd& g, Gradients& s) {
                             s.add(ix, ArrayXd(g[0] * v.sign()));
                         });
}

Var l2_norm(const Var& x) {
    const int ix = x.id();
    const ArrayXd& v = x.data();
    const double nrm = std::sqrt(v.square().sum());
    return x.tape().emit(Tensor::scalar(nrm), {ix},
                         [ix, v, nrm](const ArrayXd& g, Gradients& s) {
                             if (nrm == 0.0) {
                                 s.add(ix, ArrayXd::Zero(v.size()));
                             } else {
                                 s.add(ix, ArrayXd(g[0] * v / nrm));
                             }
                         });
}

// ------------------------------------------------------------- shape plumbing

Var reshape(const Var& x, Shape s) {
    require(shape_numel(s) == x.numel(), "reshape: ", shape_str(x.shape()), " -> ", shape_str(s),
            " changes element count");
    const int ix = x.id();
    return x.tape().emit(Tensor(std::move(s), x.data()), {ix},
                         [ix](const ArrayXd& g, Gradients& s2) { s2.add(ix, g); });
}

Var slice_flat(const Var& x, Index offset, Index len) {
    require(offset >= 0 && len >= 0 && offset + len <= x.numel(), "slice_flat: range [", offset,
            ",", offset + len, ") out of bounds for ", x.numel(), " elements");
    const int ix = x.id();
    const Index n = x.numel();
    return x.tape().emit(Tensor({len}, x.data().segment(offset, len)), {ix},
                         [ix, offset, len, n](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx = ArrayXd::Zero(n);
                             gx.segment(offset, len) = g;
                             s.add(ix, gx);
                         });
}

Var concat(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat: empty input");
    Tape& t = parts[0].tape();
    Index total = 0;
    std::vector<int> ids;
    std::vector<Index> lens;
    for (const Var& p : parts) {
        require(&p.tape() == &t, "concat: operands live on different tapes");
        total += p.numel();
        ids.push_back(p.id());
        lens.push_back(p.numel());
    }
    ArrayXd out(total);
    Index off = 0;
    for (const Var& p : parts) {
        out.segment(off, p.numel()) = p.data();
        off += p.numel();
    }
    return t.emit(Tensor({total}, std::move(out)), ids,
                  [ids, lens](const ArrayXd& g, Gradients& s) {
                      Index o = 0;
                      for (std::size_t i = 0; i < ids.size(); ++i) {
                          s.add(ids[i], ArrayXd(g.segment(o, lens[i])));
                          o += lens[i];
                      }
                  });
}

Var concat_channels(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "concat_channels");
    require(a.shape().size() == 3 && b.shape().size() == 3 && a.shape()[0] == b.shape()[0] &&
                a.shape()[1] == b.shape()[1],
            "concat_channels: incompatible shapes ", shape_str(a.shape()), " vs ",
            shape_str(b.shape()));
    const Index h = a.shape()[0], w = a.shape()[1];
    const Index ca = a.shape()[2], cb = b.shape()[2];
    const Index hw = h * w;
    ArrayXd out(hw * (ca + cb));
    for (Index p = 0; p < hw; ++p) {
        out.segment(p * (ca + cb), ca) = a.data().segment(p * ca, ca);
        out.segment(p * (ca + cb) + ca, cb) = b.data().segment(p * cb, cb);
    }
    const int ia = a.id(), ib = b.id();
    return t.emit(Tensor({h, w, ca + cb}, std::move(out)), {ia, ib},
                  [ia, ib, hw, ca, cb](const ArrayXd& g, Gradients& s) {
                      ArrayXd ga(hw * ca), gb(hw * cb);
                      for (Index p = 0; p < hw; ++p) {
                          ga.segment(p * ca, ca) = g.segment(p * (ca + cb), ca);
                          gb.segment(p * cb, cb) = g.segment(p * (ca + cb) + ca, cb);
                      }
                      s.add(ia, ga);
                      s.add(ib, gb);
                  });
}

// ------------------------------------------------------------------ row ops

namespace {
void require_rank2(const Var& x, const char* op) {
    require(x.shape().size() == 2, op, ": expected rank-2 tensor, got ", shape_str(x.shape()));
}
} // namespace

Var col(const Var& x, Index j) {
    require_rank2(x, "col");
    const Index n = x.shape()[0], k = x.shape()[1];
    require(j >= 0 && j < k, "col: index ", j, " out of range for ", k, " columns");
    const int ix = x.id();
    ArrayXd out(n);
    for (Index i = 0; i < n; ++i) out[i] = x.data()[i * k + j];
    return x.tape().emit(Tensor({n}, std::move(out)), {ix},
                         [ix, n, k, j](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx = ArrayXd::Zero(n * k);
                             for (Index i = 0; i < n; ++i) gx[i * k + j] = g[i];
                             s.add(ix, gx);
                         });
}

Var row_sums(const Var& x) {
    require_rank2(x, "row_sums");
    const Index n = x.shape()[0], k = x.shape()[1];
    const int ix = x.id();
    ArrayXd out = x.value().mat(n, k).rowwise().sum().array();
    return x.tape().emit(Tensor({n}, std::move(out)), {ix},
                         [ix, n, k](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx(n * k);
                             for (Index i = 0; i < n; ++i) gx.segment(i * k, k).setConstant(g[i]);
                             s.add(ix, gx);
                         });
}

Var row_dots(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "row_dots");
    check_same_shape(a.value(), b.value(), "row_dots");
    require_rank2(a, "row_dots");
    const Index n = a.shape()[0], k = a.shape()[1];
    ArrayXd out(n);
    for (Index i = 0; i < n; ++i)
        out[i] = (a.data().segment(i * k, k) * b.data().segment(i * k, k)).sum();
    const int ia = a.id(), ib = b.id();
    return t.emit(Tensor({n}, std::move(out)), {ia, ib},
                  [ia, ib, n, k, va = ArrayXd(a.data()), vb = ArrayXd(b.data())](const ArrayXd& g,
                                                                                 Gradients& s) {
                      ArrayXd ga(n * k), gb(n * k);
                      for (Index i = 0; i < n; ++i) {
                          ga.segment(i * k, k) = g[i] * vb.segment(i * k, k);
                          gb.segment(i * k, k) = g[i] * va.segment(i * k, k);
                      }
                      s.add(ia, ga);
                      s.add(ib, gb);
                  });
}

Var scale_rows(const Var& x, const Var& sc) {
    Tape& t = same_tape(x, sc, "scale_rows");
    require_rank2(x, "scale_rows");
    const Index n = x.shape()[0], k = x.shape()[1];
    require(sc.numel() == n, "scale_rows: scale length ", sc.numel(), " != rows ", n);
    ArrayXd out(n * k);
    for (Index i = 0; i < n; ++i) out.segment(i * k, k) = x.data().segment(i * k, k) * sc.data()[i];
    const int ix = x.id(), is = sc.id();
    return t.emit(Tensor({n, k}, std::move(out)), {ix, is},
                  [ix, is, n, k, vx = ArrayXd(x.data()), vs = ArrayXd(sc.data())](const ArrayXd& g,
                                                                                  Gradients& s) {
                      ArrayXd gx(n * k), gs(n);
                      for (Index i = 0; i < n; ++i) {
                          gx.segment(i * k, k) = g.segment(i * k, k) * vs[i];
                          gs[i] = (g.segment(i * k, k) * vx.segment(i * k, k)).sum();
                      }
                      s.add(ix, gx);
                      s.add(is, gs);
                  });
}

Var add_rowvec(const Var& x, const Var& v) {
    Tape& t = same_tape(x, v, "add_rowvec");
    require_rank2(x, "add_rowvec");
    const Index n = x.shape()[0], k = x.shape()[1];
    require(v.numel() == k, "add_rowvec: vector length ", v.numel(), " != cols ", k);
    ArrayXd out(n * k);
    for (Index i = 0; i < n; ++i) out.segment(i * k, k) = x.data().segment(i * k, k) + v.data();
    const int ix = x.id(), iv = v.id();
    return t.emit(Tensor({n, k}, std::move(out)), {ix, iv},
                  [ix, iv, n, k](const ArrayXd& g, Gradients& s) {
                      ArrayXd gv = ArrayXd::Zero(k);
                      for (Index i = 0; i < n; ++i) gv += g.segment(i * k, k);
                      s.add(ix, g);
                      s.add(iv, gv);
                  });
}

Var outer(const Var& sc, const Var& v) {
    Tape& t = same_tape(sc, v, "outer");
    const Index n = sc.numel(), k = v.numel();
    ArrayXd out(n * k);
    for (Index i = 0; i < n; ++i) out.segment(i * k, k) = sc.data()[i] * v.data();
    const int is = sc.id(), iv = v.id();
    return t.emit(Tensor({n, k}, std::move(out)), {is, iv},
                  [is, iv, n, k, vs = ArrayXd(sc.data()), vv = ArrayXd(v.data())](const ArrayXd& g,
                                                                                  Gradients& s) {
                      ArrayXd gs(n);
                      ArrayXd gv = ArrayXd::Zero(k);
                      for (Index i = 0; i < n; ++i) {
                          gs[i] = (g.segment(i * k, k) * vv).sum();
                          gv += g.segment(i * k, k) * vs[i];
                      }
                      s.add(is, gs);
                      s.add(iv, gv);
                  });
}

Var cross_rows(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "cross_rows");
    check_same_shape(a.value(), b.value(), "cross_rows");
    require(a.shape().size() == 2 && a.shape()[1] == 3, "cross_rows: expected [N,3] tensors");
    const Index n = a.shape()[0];
    const ArrayXd& va = a.data();
    const ArrayXd& vb = b.data();
    ArrayXd out(n * 3);
    for (Index i = 0; i < n; ++i) {
        const Index o = i * 3;
        out[o + 0] = va[o + 1] * vb[o + 2] - va[o + 2] * vb[o + 1];
        out[o + 1] = va[o + 2] * vb[o + 0] - va[o + 0] * vb[o + 2];
        out[o + 2] = va[o + 0] * vb[o + 1] - va[o + 1] * vb[o + 0];
    }
    const int ia = a.id(), ib = b.id();
    return t.emit(Tensor({n, 3}, std::move(out)), {ia, ib},
                  [ia, ib, n, va = ArrayXd(va), vb = ArrayXd(vb)](const ArrayXd& g, Gradients& s) {
                      // For c = a x b: dL/da = b x g, dL/db = g x a (rowwise).
                      ArrayXd ga(n * 3), gb(n * 3);
                      for (Index i = 0; i < n; ++i) {
                          const Index o = i * 3;
                          ga[o + 0] = vb[o + 1] * g[o + 2] - vb[o + 2] * g[o + 1];
                          ga[o + 1] = vb[o + 2] * g[o + 0] - vb[o + 0] * g[o + 2];
                          ga[o + 2] = vb[o + 0] * g[o + 1] - vb[o + 1] * g[o + 0];
                          gb[o + 0] = g[o + 1] * va[o + 2] - g[o + 2] * va[o + 1];
                          gb[o + 1] = g[o + 2] * va[o + 0] - g[o + 0] * va[o + 2];
                          gb[o + 2] = g[o + 0] * va[o + 1] - g[o + 1] * va[o + 0];
                      }
                      s.add(ia, ga);
                      s.add(ib, gb);
                  });
}

Var normalize_rows(const Var& x, double eps) {
    Var inv = pow(row_dots(x, x) + eps, -0.5);
    return scale_rows(x, inv);
}

Var columns2(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "columns2");
    require(a.numel() == b.numel(), "columns2: length mismatch");
    const Index n = a.numel();
    ArrayXd out(n * 2);
    for (Index i = 0; i < n; ++i) {
        out[i * 2] = a.data()[i];
        out[i * 2 + 1] = b.data()[i];
    }
    const int ia = a.id(), ib = b.id();
    return t.emit(Tensor({n, 2}, std::move(out)), {ia, ib},
                  [ia, ib, n](const ArrayXd& g, Gradients& s) {
                      ArrayXd ga(n), gb(n);
                      for (Index i = 0; i < n; ++i) {
                          ga[i] = g[i * 2];
                          gb[i] = g[i * 2 + 1];
                      }
                      s.add(ia, ga);
                      s.add(ib, gb);
                  });
}

Var columns3(const Var& a, const Var& b, const Var& c) {
    Tape& t = same_tape(a, b, "columns3");
    require(&c.tape() == &t, "columns3: operands live on different tapes");
    require(a.numel() == b.numel() && b.numel() == c.numel(), "columns3: length mismatch");
    const Index n = a.numel();
    ArrayXd out(n * 3);
    for (Index i = 0; i < n; ++i) {
        out[i * 3] = a.data()[i];
        out[i * 3 + 1] = b.data()[i];
        out[i * 3 + 2] = c.data()[i];
    }
    const int ia = a.id(), ib = b.id(), ic = c.id();
    return t.emit(Tensor({n, 3}, std::move(out)), {ia, ib, ic},
                  [ia, ib, ic, n](const ArrayXd& g, Gradients& s) {
                      ArrayXd ga(n), gb(n), gc(n);
                      for (Index i = 0; i < n; ++i) {
                          ga[i] = g[i * 3];
                          gb[i] = g[i * 3 + 1];
                          gc[i] = g[i * 3 + 2];
                      }
                      s.add(ia, ga);
                      s.add(ib, gb);
                      s.add(ic, gc);
                  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b, "matmul");
    require(a.shape().size() == 2, "matmul: left operand must be rank-2, got ",
            shape_str(a.shape()));
    const Index m = a.shape()[0], k = a.shape()[1];
    const bool vec = b.shape().size() == 1;
    const Index k2 = vec ? b.shape()[0] : b.shape()[0];
    const Index n = vec ? 1 : b.shape()[1];
    require(k == k2, "matmul: inner dimensions differ, ", shape_str(a.shape()), " vs ",
            shape_str(b.shape()));
    const Tensor* ta = node_value(a);
    const Tensor* tb = node_value(b);
    ArrayXd out(m * n);
    RowMatrixMap(out.data(), m, n) = ta->mat(m, k) * tb->mat(k, n);
    const int ia = a.id(), ib = b.id();
    Shape out_shape = vec ? Shape{m} : Shape{m, n};
    return t.emit(Tensor(std::move(out_shape), std::move(out)), {ia, ib},
                  [ia, ib, ta, tb, m, k, n](const ArrayXd& g, Gradients& s) {
                      ConstRowMatrixMap gm(g.data(), m, n);
                      ArrayXd ga(m * k), gb(k * n);
                      RowMatrixMap(ga.data(), m, k) = gm * tb->mat(k, n).transpose();
                      RowMatrixMap(gb.data(), k, n) = ta->mat(m, k).transpose() * gm;
                      s.add(ia, ga);
                      s.add(ib, gb);
                  });
}

// ------------------------------------------------------------ gather/scatter

Var gather_rows(const Var& x, const std::vector<Index>& idx) {
    require_rank2(x, "gather_rows");
    const Index n = x.shape()[0], k = x.shape()[1];
    const Index m = static_cast<Index>(idx.size());
    ArrayXd out(m * k);
    for (Index i = 0; i < m; ++i) {
        require(idx[static_cast<std::size_t>(i)] >= 0 && idx[static_cast<std::size_t>(i)] < n,
                "gather_rows: index out of range");
        out.segment(i * k, k) = x.data().segment(idx[static_cast<std::size_t>(i)] * k, k);
    }
    const int ix = x.id();
    return x.tape().emit(Tensor({m, k}, std::move(out)), {ix},
                         [ix, idx, n, k, m](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx = ArrayXd::Zero(n * k);
                             for (Index i = 0; i < m; ++i)
                                 gx.segment(idx[static_cast<std::size_t>(i)] * k, k) +=
                                     g.segment(i * k, k);
                             s.add(ix, gx);
                         });
}

Var scatter_rows(const Var& x, const std::vector<Index>& idx, Index n_rows) {
    require_rank2(x, "scatter_rows");
    const Index m = x.shape()[0], k = x.shape()[1];
    require(static_cast<Index>(idx.size()) == m, "scatter_rows: index count ", idx.size(),
            " != rows ", m);
    ArrayXd out = ArrayXd::Zero(n_rows * k);
    for (Index i = 0; i < m; ++i) {
        require(idx[static_cast<std::size_t>(i)] >= 0 && idx[static_cast<std::size_t>(i)] < n_rows,
                "scatter_rows: index out of range");
        out.segment(idx[static_cast<std::size_t>(i)] * k, k) += x.data().segment(i * k, k);
    }
    const int ix = x.id();
    return x.tape().emit(Tensor({n_rows, k}, std::move(out)), {ix},
                         [ix, idx, k, m](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx(m * k);
                             for (Index i = 0; i < m; ++i)
                                 gx.segment(i * k, k) =
                                     g.segment(idx[static_cast<std::size_t>(i)] * k, k);
                             s.add(ix, gx);
                         });
}

// ------------------------------------------------------------------ image ops

Var conv2d(const Var& x, const Var& w, const Var& b) {
    Tape& t = same_tape(x, w, "conv2d");
    require(&b.tape() == &t, "conv2d: operands live on different tapes");
    require(x.shape().size() == 3, "conv2d: input must be [H,W,C], got ", shape_str(x.shape()));
    require(w.shape().size() == 4, "conv2d: weights must be [kh,kw,Cin,Cout], got ",
            shape_str(w.shape()));
    const Index h = x.shape()[0], wd = x.shape()[1], ci = x.shape()[2];
    const Index kh = w.shape()[0], kw = w.shape()[1];
    require(w.shape()[2] == ci, "conv2d: weight Cin ", w.shape()[2], " != input channels ", ci);
    const Index co = w.shape()[3];
    require(b.numel() == co, "conv2d: bias length ", b.numel(), " != Cout ", co);
    require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd");
    const Index ph = kh / 2, pw = kw / 2;
    const Index hw = h * wd, patch = kh * kw * ci;

    // im2col with zero padding; -1 marks padded entries.
    auto col_index = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(hw * kh * kw));
    {
        std::size_t c = 0;
        for (Index y = 0; y < h; ++y)
            for (Index xp = 0; xp < wd; ++xp)
                for (Index ky = 0; ky < kh; ++ky)
                    for (Index kx = 0; kx < kw; ++kx) {
                        const Index sy = y + ky - ph, sx = xp + kx - pw;
                        (*col_index)[c++] =
                            (sy >= 0 && sy < h && sx >= 0 && sx < wd) ? (sy * wd + sx) : -1;
                    }
    }
    auto xcol = std::make_shared<RowMatrix>(hw, patch);
    {
        const ArrayXd& vx = x.data();
        for (Index p = 0; p < hw; ++p) {
            double* row = xcol->data() + p * patch;
            for (Index kk = 0; kk < kh * kw; ++kk) {
                const Index src = (*col_index)[static_cast<std::size_t>(p * kh * kw + kk)];
                if (src < 0) {
                    std::fill(row + kk * ci, row + (kk + 1) * ci, 0.0);
                } else {
                    Eigen::Map<Eigen::ArrayXd>(row + kk * ci, ci) = vx.segment(src * ci, ci);
                }
            }
        }
    }
    const Tensor* tw = node_value(w);
    ArrayXd out(hw * co);
    RowMatrixMap(out.data(), hw, co) = (*xcol) * tw->mat(patch, co);
    for (Index p = 0; p < hw; ++p) out.segment(p * co, co) += b.data();

    const int ixid = x.id(), iwid = w.id(), ibid = b.id();
    return t.emit(Tensor({h, wd, co}, std::move(out)), {ixid, iwid, ibid},
                  [ixid, iwid, ibid, xcol, col_index, tw, hw, patch, co, ci, kh,
                   kw](const ArrayXd& g, Gradients& s) {
                      ConstRowMatrixMap gm(g.data(), hw, co);
                      // weights and bias
                      ArrayXd gw(patch * co);
                      RowMatrixMap(gw.data(), patch, co) = xcol->transpose() * gm;
                      s.add(iwid, gw);
                      ArrayXd gb = ArrayXd::Zero(co);
                      for (Index p = 0; p < hw; ++p) gb += g.segment(p * co, co);
                      s.add(ibid, gb);
                      // input via col2im
                      RowMatrix gcol = gm * tw->mat(patch, co).transpose();  // [hw, patch]
                      ArrayXd gx = ArrayXd::Zero(hw * ci);
                      for (Index p = 0; p < hw; ++p) {
                          const double* row = gcol.data() + p * patch;
                          for (Index kk = 0; kk < kh * kw; ++kk) {
                              const Index src =
                                  (*col_index)[static_cast<std::size_t>(p * kh * kw + kk)];
                              if (src >= 0) {
                                  gx.segment(src * ci, ci) +=
                                      Eigen::Map<const Eigen::ArrayXd>(row + kk * ci, ci);
                              }
                          }
                      }
                      s.add(ixid, gx);
                  });
}

Var avg_pool2(const Var& x) {
    require(x.shape().size() == 3, "avg_pool2: input must be [H,W,C]");
    const Index h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
    require(h % 2 == 0 && w % 2 == 0, "avg_pool2: dimensions must be even, got ",
            shape_str(x.shape()));
    const Index ho = h / 2, wo = w / 2;
    const ArrayXd& v = x.data();
    ArrayXd out(ho * wo * c);
    for (Index y = 0; y < ho; ++y)
        for (Index xp = 0; xp < wo; ++xp) {
            const Index i00 = ((2 * y) * w + 2 * xp) * c, i01 = i00 + c;
            const Index i10 = ((2 * y + 1) * w + 2 * xp) * c, i11 = i10 + c;
            out.segment((y * wo + xp) * c, c) = 0.25 * (v.segment(i00, c) + v.segment(i01, c) +
                                                        v.segment(i10, c) + v.segment(i11, c));
        }
    const int ix = x.id();
    return x.tape().emit(Tensor({ho, wo, c}, std::move(out)), {ix},
                         [ix, h, w, c, ho, wo](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx(h * w * c);
                             for (Index y = 0; y < ho; ++y)
                                 for (Index xp = 0; xp < wo; ++xp) {
                                     const auto gseg = 0.25 * g.segment((y * wo + xp) * c, c);
                                     gx.segment(((2 * y) * w + 2 * xp) * c, c) = gseg;
                                     gx.segment(((2 * y) * w + 2 * xp + 1) * c, c) = gseg;
                                     gx.segment(((2 * y + 1) * w + 2 * xp) * c, c) = gseg;
                                     gx.segment(((2 * y + 1) * w + 2 * xp + 1) * c, c) = gseg;
                                 }
                             s.add(ix, gx);
                         });
}

Var upsample_nearest2(const Var& x) {
    require(x.shape().size() == 3, "upsample_nearest2: input must be [H,W,C]");
    const Index h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
    const Index ho = 2 * h, wo = 2 * w;
    const ArrayXd& v = x.data();
    ArrayXd out(ho * wo * c);
    for (Index y = 0; y < ho; ++y)
        for (Index xp = 0; xp < wo; ++xp)
            out.segment((y * wo + xp) * c, c) = v.segment(((y / 2) * w + xp / 2) * c, c);
    const int ix = x.id();
    return x.tape().emit(Tensor({ho, wo, c}, std::move(out)), {ix},
                         [ix, h, w, c, ho, wo](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx = ArrayXd::Zero(h * w * c);
                             for (Index y = 0; y < ho; ++y)
                                 for (Index xp = 0; xp < wo; ++xp)
                                     gx.segment(((y / 2) * w + xp / 2) * c, c) +=
                                         g.segment((y * wo + xp) * c, c);
                             s.add(ix, gx);
                         });
}

namespace {
struct LinearTap {
    Index i0, i1;
    double w0, w1;
};

std::vector<LinearTap> resize_taps(Index n_in, Index n_out) {
    std::vector<LinearTap> taps(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (Index o = 0; o < n_out; ++o) {
        double srcv = (static_cast<double>(o) + 0.5) * scale - 0.5;
        srcv = std::min(std::max(srcv, 0.0), static_cast<double>(n_in - 1));
        Index lo = static_cast<Index>(std::floor(srcv));
        if (lo > n_in - 2) lo = std::max<Index>(n_in - 2, 0);
        const double f = srcv - static_cast<double>(lo);
        const Index hi = std::min(lo + 1, n_in - 1);
        taps[static_cast<std::size_t>(o)] = {lo, hi, 1.0 - f, f};
    }
    return taps;
}
} // namespace

Var resize_bilinear(const Var& x, Index h_out, Index w_out) {
    require(x.shape().size() == 3, "resize_bilinear: input must be [H,W,C]");
    require(h_out > 0 && w_out > 0, "resize_bilinear: output dims must be positive");
    const Index h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
    auto ty = std::make_shared<std::vector<LinearTap>>(resize_taps(h, h_out));
    auto tx = std::make_shared<std::vector<LinearTap>>(resize_taps(w, w_out));
    const ArrayXd& v = x.data();
    ArrayXd out(h_out * w_out * c);
    for (Index y = 0; y < h_out; ++y) {
        const LinearTap& ry = (*ty)[static_cast<std::size_t>(y)];
        for (Index xp = 0; xp < w_out; ++xp) {
            const LinearTap& rx = (*tx)[static_cast<std::size_t>(xp)];
            out.segment((y * w_out + xp) * c, c) =
                ry.w0 * (rx.w0 * v.segment((ry.i0 * w + rx.i0) * c, c) +
                         rx.w1 * v.segment((ry.i0 * w + rx.i1) * c, c)) +
                ry.w1 * (rx.w0 * v.segment((ry.i1 * w + rx.i0) * c, c) +
                         rx.w1 * v.segment((ry.i1 * w + rx.i1) * c, c));
        }
    }
    const int ix = x.id();
    return x.tape().emit(Tensor({h_out, w_out, c}, std::move(out)), {ix},
                         [ix, h, w, c, h_out, w_out, ty, tx](const ArrayXd& g, Gradients& s) {
                             ArrayXd gx = ArrayXd::Zero(h * w * c);
                             for (Index y = 0; y < h_out; ++y) {
                                 const LinearTap& ry = (*ty)[static_cast<std::size_t>(y)];
                                 for (Index xp = 0; xp < w_out; ++xp) {
                                     const LinearTap& rx = (*tx)[static_cast<std::size_t>(xp)];
                                     const auto gs = g.segment((y * w_out + xp) * c, c);
                                     gx.segment((ry.i0 * w + rx.i0) * c, c) += ry.w0 * rx.w0 * gs;
                                     gx.segment((ry.i0 * w + rx.i1) * c, c) += ry.w0 * rx.w1 * gs;
                                     gx.segment((ry.i1 * w + rx.i0) * c, c) += ry.w1 * rx.w0 * gs;
                                     gx.segment((ry.i1 * w + rx.i1) * c, c) += ry.w1 * rx.w1 * gs;
                                 }
                             }
                             s.add(ix, gx);
                         });
}

Var bilinear_sample(const Var& grid, const Var& coords) {
    Tape& t = same_tape(grid, coords, "bilinear_sample");
    require(grid.shape().size() == 3, "bilinear_sample: grid must be [H,W,C]");
    require(coords.shape().size() == 2 && coords.shape()[1] == 2,
            "bilinear_sample: coords must be [N,2]");
    const Index h = grid.shape()[0], w = grid.shape()[1], c = grid.shape()[2];
    const Index n = coords.shape()[0];
    const ArrayXd& vg = grid.data();
    const ArrayXd& vc = coords.data();

    struct SampleTap {
        Index x0, x1, y0, y1;
        double fx, fy;
        bool clamped_x, clamped_y;
    };
    auto taps = std::make_shared<std::vector<SampleTap>>(static_cast<std::size_t>(n));
    ArrayXd out(n * c);
    for (Index i = 0; i < n; ++i) {
        const double u = vc[i * 2], v = vc[i * 2 + 1];
        double xf = u * static_cast<double>(w) - 0.5;
        double yf = v * static_cast<double>(h) - 0.5;
        SampleTap tap{};
        tap.clamped_x = xf <= 0.0 || xf >= static_cast<double>(w - 1);
        tap.clamped_y = yf <= 0.0 || yf >= static_cast<double>(h - 1);
        xf = std::min(std::max(xf, 0.0), static_cast<double>(w - 1));
        yf = std::min(std::max(yf, 0.0), static_cast<double>(h - 1));
        tap.x0 = std::min(static_cast<Index>(std::floor(xf)), std::max<Index>(w - 2, 0));
        tap.y0 = std::min(static_cast<Index>(std::floor(yf)), std::max<Index>(h - 2, 0));
        tap.x1 = std::min(tap.x0 + 1, w - 1);
        tap.y1 = std::min(tap.y0 + 1, h - 1);
        tap.fx = xf - static_cast<double>(tap.x0);
        tap.fy = yf - static_cast<double>(tap.y0);
        (*taps)[static_cast<std::size_t>(i)] = tap;
        out.segment(i * c, c) =
            (1.0 - tap.fy) * ((1.0 - tap.fx) * vg.segment((tap.y0 * w + tap.x0) * c, c) +
                              tap.fx * vg.segment((tap.y0 * w + tap.x1) * c, c)) +
            tap.fy * ((1.0 - tap.fx) * vg.segment((tap.y1 * w + tap.x0) * c, c) +
                      tap.fx * vg.segment((tap.y1 * w + tap.x1) * c, c));
    }
    const int ig = grid.id(), ic = coords.id();
    const Tensor* tg = node_value(grid);
    return t.emit(
        Tensor({n, c}, std::move(out)), {ig, ic},
        [ig, ic, tg, taps, h, w, c, n](const ArrayXd& g, Gradients& s) {
            const ArrayXd& vg = tg->data;
            ArrayXd ggrid = ArrayXd::Zero(h * w * c);
            ArrayXd gcoords = ArrayXd::Zero(n * 2);
            for (Index i = 0; i < n; ++i) {
                const auto& tap = (*taps)[static_cast<std::size_t>(i)];
                const auto gs = g.segment(i * c, c);
                ggrid.segment((tap.y0 * w + tap.x0) * c, c) += (1.0 - tap.fy) * (1.0 - tap.fx) * gs;
                ggrid.segment((tap.y0 * w + tap.x1) * c, c) += (1.0 - tap.fy) * tap.fx * gs;
                ggrid.segment((tap.y1 * w + tap.x0) * c, c) += tap.fy * (1.0 - tap.fx) * gs;
                ggrid.segment((tap.y1 * w + tap.x1) * c, c) += tap.fy * tap.fx * gs;
                if (!tap.clamped_x) {
                    const ArrayXd ddx =
                        (1.0 - tap.fy) * (vg.segment((tap.y0 * w + tap.x1) * c, c) -
                                          vg.segment((tap.y0 * w + tap.x0) * c, c)) +
                        tap.fy * (vg.segment((tap.y1 * w + tap.x1) * c, c) -
                                  vg.segment((tap.y1 * w + tap.x0) * c, c));
                    gcoords[i * 2] = (ddx * gs).sum() * static_cast<double>(w);
                }
                if (!tap.clamped_y) {
                    const ArrayXd ddy =
                        (1.0 - tap.fx) * (vg.segment((tap.y1 * w + tap.x0) * c, c) -
                                          vg.segment((tap.y0 * w + tap.x0) * c, c)) +
                        tap.fx * (vg.segment((tap.y1 * w + tap.x1) * c, c) -
                                  vg.segment((tap.y0 * w + tap.x1) * c, c));
                    gcoords[i * 2 + 1] = (ddy * gs).sum() * static_cast<double>(h);
                }
            }
            s.add(ig, ggrid);
            s.add(ic, gcoords);
        });
}

Var logsumexp(const Var& x) {
    const double shift = x.data().maxCoeff();
    return log(sum(exp(x - shift))) + shift;
}

} // namespace facefit::ad
