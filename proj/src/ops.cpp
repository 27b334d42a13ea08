// Copyright 2026 The btap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "btap/ops.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace btap {
namespace {

using BackwardFn =
    std::function<void(const std::vector<double>&, GradMap&)>;

Tensor make_op(const char* name, Shape shape, std::vector<double> value,
               std::vector<NodePtr> parents, BackwardFn bw) {
  check_finite(value, name);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op_name = name;
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  if (rg) {
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Tensor(node);
}

// Trailing-axis broadcast plan: out strides per operand (0 on broadcast
// axes) so each output element maps to an operand element.
struct BroadcastPlan {
  Shape out;
  std::vector<int64_t> stride_a;
  std::vector<int64_t> stride_b;
  int64_t numel;
  bool same_shape;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  size_t r = std::max(a.size(), b.size());
  BroadcastPlan p;
  p.out.resize(r);
  std::vector<int64_t> da(r, 1), db(r, 1);
  for (size_t i = 0; i < a.size(); ++i) da[r - a.size() + i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) db[r - b.size() + i] = b[i];
  for (size_t i = 0; i < r; ++i) {
    if (da[i] == db[i]) {
      p.out[i] = da[i];
    } else if (da[i] == 1 || db[i] == 1) {
      p.out[i] = std::max(da[i], db[i]);
    } else {
      fail(std::string(op) + ": shapes " + shape_str(a) + " and " +
           shape_str(b) + " are not broadcast-compatible");
    }
  }
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  int64_t sa = 1, sb = 1;
  for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
    p.stride_a[i] = (da[i] == 1) ? 0 : sa;
    p.stride_b[i] = (db[i] == 1) ? 0 : sb;
    sa *= da[i];
    sb *= db[i];
  }
  p.numel = shape_numel(p.out);
  p.same_shape = (a == b);
  return p;
}

// Applies fn(ia, ib, iout) over the full broadcast index space.
template <typename F>
void for_broadcast(const BroadcastPlan& p, F&& fn) {
  size_t r = p.out.size();
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t io = 0; io < p.numel; ++io) {
    fn(ia, ib, io);
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      idx[i]++;
      ia += p.stride_a[i];
      ib += p.stride_b[i];
      if (idx[i] < p.out[i]) break;
      ia -= p.stride_a[i] * p.out[i];
      ib -= p.stride_b[i] * p.out[i];
      idx[i] = 0;
    }
  }
}

template <typename FwdF, typename BwdAF, typename BwdBF>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b,
                 FwdF fwd, BwdAF dfda, BwdBF dfdb) {
  BroadcastPlan p = plan_broadcast(a.shape(), b.shape(), name);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(p.numel);
  if (p.same_shape) {
    for (int64_t i = 0; i < p.numel; ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for_broadcast(p, [&](int64_t ia, int64_t ib, int64_t io) {
      out[io] = fwd(av[ia], bv[ib]);
    });
  }
  NodePtr an = a.node(), bn = b.node();
  return make_op(
      name, p.out, std::move(out), {an, bn},
      [an, bn, p, dfda, dfdb](const std::vector<double>& g, GradMap& sink) {
        const auto& av = an->value;
        const auto& bv = bn->value;
        std::vector<double>* ga =
            an->requires_grad ? &sink.slot(an.get(), an->numel()) : nullptr;
        std::vector<double>* gb =
            bn->requires_grad ? &sink.slot(bn.get(), bn->numel()) : nullptr;
        if (p.same_shape) {
          for (int64_t i = 0; i < p.numel; ++i) {
            if (ga) (*ga)[i] += g[i] * dfda(av[i], bv[i]);
            if (gb) (*gb)[i] += g[i] * dfdb(av[i], bv[i]);
          }
        } else {
          for_broadcast(p, [&](int64_t ia, int64_t ib, int64_t io) {
            if (ga) (*ga)[ia] += g[io] * dfda(av[ia], bv[ib]);
            if (gb) (*gb)[ib] += g[io] * dfdb(av[ia], bv[ib]);
          });
        }
      });
}

template <typename FwdF, typename DerivF>
Tensor unary_op(const char* name, const Tensor& a, FwdF fwd, DerivF deriv) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  NodePtr an = a.node();
  return make_op(name, a.shape(), std::move(out), {an},
                 [an, deriv](const std::vector<double>& g, GradMap& sink) {
                   auto& ga = sink.slot(an.get(), an->numel());
                   const auto& av = an->value;
                   for (size_t i = 0; i < av.size(); ++i) {
                     ga[i] += g[i] * deriv(av[i]);
                   }
                 });
}

double sigmoid_v(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

double softplus_v(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; }, [](double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return sigmoid_v(x); },
      [](double x) {
        double s = sigmoid_v(x);
        return s * (1.0 - s);
      });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a, [](double x) { return softplus_v(x); },
      [](double x) { return sigmoid_v(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary_op(
      "clamp", a,
      [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor scale(const Tensor& a, double s) {
  return unary_op(
      "scale", a, [s](double x) { return s * x; },
      [s](double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      "add_scalar", a, [s](double x) { return x + s; },
      [](double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  NodePtr an = a.node();
  return make_op("sum", {1}, {acc}, {an},
                 [an](const std::vector<double>& g, GradMap& sink) {
                   auto& ga = sink.slot(an.get(), an->numel());
                   for (auto& v : ga) v += g[0];
                 });
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  NodePtr an = a.node();
  return make_op("mean", {1}, {acc * inv}, {an},
                 [an, inv](const std::vector<double>& g, GradMap& sink) {
                   auto& ga = sink.slot(an.get(), an->numel());
                   for (auto& v : ga) v += g[0] * inv;
                 });
}

Tensor max_all(const Tensor& a) {
  const auto& av = a.data();
  int64_t arg = 0;
  for (int64_t i = 1; i < a.numel(); ++i) {
    if (av[i] > av[arg]) arg = i;
  }
  NodePtr an = a.node();
  return make_op("max_all", {1}, {av[arg]}, {an},
                 [an, arg](const std::vector<double>& g, GradMap& sink) {
                   sink.slot(an.get(), an->numel())[arg] += g[0];
                 });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      double x = av[i * k + p];
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (int64_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  }
  NodePtr an = a.node(), bn = b.node();
  return make_op(
      "matmul", {m, n}, std::move(out), {an, bn},
      [an, bn, m, k, n](const std::vector<double>& g, GradMap& sink) {
        const auto& av = an->value;
        const auto& bv = bn->value;
        if (an->requires_grad) {
          auto& ga = sink.slot(an.get(), an->numel());
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (int64_t j = 0; j < n; ++j) {
                acc += g[i * n + j] * bv[p * n + j];
              }
              ga[i * k + p] += acc;
            }
          }
        }
        if (bn->requires_grad) {
          auto& gb = sink.slot(bn.get(), bn->numel());
          for (int64_t p = 0; p < k; ++p) {
            for (int64_t i = 0; i < m; ++i) {
              double x = av[i * k + p];
              for (int64_t j = 0; j < n; ++j) {
                gb[p * n + j] += x * g[i * n + j];
              }
            }
          }
        }
      });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require(a.rank() == 2 && x.rank() == 1 && a.dim(1) == x.dim(0),
          "matvec: incompatible shapes");
  int64_t m = a.dim(0), k = a.dim(1);
  const auto& av = a.data();
  const auto& xv = x.data();
  std::vector<double> out(m, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* arow = &av[i * k];
    for (int64_t p = 0; p < k; ++p) acc += arow[p] * xv[p];
    out[i] = acc;
  }
  NodePtr an = a.node(), xn = x.node();
  return make_op(
      "matvec", {m}, std::move(out), {an, xn},
      [an, xn, m, k](const std::vector<double>& g, GradMap& sink) {
        const auto& av = an->value;
        const auto& xv = xn->value;
        if (an->requires_grad) {
          auto& ga = sink.slot(an.get(), an->numel());
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t p = 0; p < k; ++p) ga[i * k + p] += g[i] * xv[p];
          }
        }
        if (xn->requires_grad) {
          auto& gx = sink.slot(xn.get(), xn->numel());
          for (int64_t i = 0; i < m; ++i) {
            const double* arow = &av[i * k];
            for (int64_t p = 0; p < k; ++p) gx[p] += g[i] * arow[p];
          }
        }
      });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
              shape_str(shape));
  NodePtr an = a.node();
  return make_op("reshape", shape, a.data(), {an},
                 [an](const std::vector<double>& g, GradMap& sink) {
                   sink.accumulate(an.get(), g);
                 });
}

Tensor row(const Tensor& a, int64_t i) {
  require(a.rank() == 2 && i >= 0 && i < a.dim(0), "row: index out of range");
  int64_t c = a.dim(1);
  std::vector<double> out(a.data().begin() + i * c,
                          a.data().begin() + (i + 1) * c);
  NodePtr an = a.node();
  return make_op("row", {c}, std::move(out), {an},
                 [an, i, c](const std::vector<double>& g, GradMap& sink) {
                   auto& ga = sink.slot(an.get(), an->numel());
                   for (int64_t j = 0; j < c; ++j) ga[i * c + j] += g[j];
                 });
}

Tensor cols(const Tensor& a, int64_t start, int64_t n) {
  require(a.rank() == 2 && start >= 0 && n >= 1 && start + n <= a.dim(1),
          "cols: slice out of range");
  int64_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(r * n));
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < n; ++j) out[i * n + j] = a.at(i * c + start + j);
  }
  NodePtr an = a.node();
  return make_op("cols", {r, n}, std::move(out), {an},
                 [an, start, n, r, c](const std::vector<double>& g,
                                      GradMap& sink) {
                   auto& ga = sink.slot(an.get(), an->numel());
                   for (int64_t i = 0; i < r; ++i) {
                     for (int64_t j = 0; j < n; ++j) {
                       ga[i * c + start + j] += g[i * n + j];
                     }
                   }
                 });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  require(!rows.empty(), "stack_rows: empty input");
  int64_t c = rows[0].numel();
  int64_t n = static_cast<int64_t>(rows.size());
  std::vector<double> out;
  out.reserve(n * c);
  std::vector<NodePtr> parents;
  parents.reserve(rows.size());
  for (const auto& r : rows) {
    require(r.rank() == 1 && r.numel() == c, "stack_rows: ragged rows");
    out.insert(out.end(), r.data().begin(), r.data().end());
    parents.push_back(r.node());
  }
  auto ps = parents;
  return make_op("stack_rows", {n, c}, std::move(out), std::move(parents),
                 [ps, c](const std::vector<double>& g, GradMap& sink) {
                   for (size_t i = 0; i < ps.size(); ++i) {
                     if (!ps[i]->requires_grad) continue;
                     auto& gp = sink.slot(ps[i].get(), c);
                     for (int64_t j = 0; j < c; ++j) gp[j] += g[i * c + j];
                   }
                 });
}

Tensor concat_cols(const std::vector<Tensor>& mats) {
  require(!mats.empty(), "concat_cols: empty input");
  int64_t n = mats[0].dim(0);
  int64_t ctot = 0;
  std::vector<NodePtr> parents;
  std::vector<int64_t> widths;
  for (const auto& m : mats) {
    require(m.rank() == 2 && m.dim(0) == n, "concat_cols: row count mismatch");
    ctot += m.dim(1);
    widths.push_back(m.dim(1));
    parents.push_back(m.node());
  }
  std::vector<double> out(n * ctot);
  int64_t off = 0;
  for (size_t mi = 0; mi < mats.size(); ++mi) {
    const auto& mv = mats[mi].data();
    int64_t w = widths[mi];
    for (int64_t i = 0; i < n; ++i) {
      std::memcpy(&out[i * ctot + off], &mv[i * w], w * sizeof(double));
    }
    off += w;
  }
  auto ps = parents;
  return make_op(
      "concat_cols", {n, ctot}, std::move(out), std::move(parents),
      [ps, widths, n, ctot](const std::vector<double>& g, GradMap& sink) {
        int64_t off = 0;
        for (size_t mi = 0; mi < ps.size(); ++mi) {
          int64_t w = widths[mi];
          if (ps[mi]->requires_grad) {
            auto& gp = sink.slot(ps[mi].get(), n * w);
            for (int64_t i = 0; i < n; ++i) {
              for (int64_t j = 0; j < w; ++j) {
                gp[i * w + j] += g[i * ctot + off + j];
              }
            }
          }
          off += w;
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride) {
  require(input.rank() == 3 && kernel.rank() == 4, "conv2d: bad ranks");
  int64_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  int64_t kh = kernel.dim(0), kw = kernel.dim(1);
  require(kh == kw && kh % 2 == 1, "conv2d: kernel must be square and odd");
  require(kernel.dim(2) == Ci, "conv2d: channel mismatch (kernel Cin=" +
                                   std::to_string(kernel.dim(2)) +
                                   ", input Cin=" + std::to_string(Ci) + ")");
  require(stride >= 1, "conv2d: stride must be >= 1");
  int64_t Co = kernel.dim(3);
  int64_t pad = (kh - 1) / 2;
  int64_t Ho = (H + stride - 1) / stride;
  int64_t Wo = (W + stride - 1) / stride;
  const auto& in = input.data();
  const auto& kv = kernel.data();
  std::vector<double> out(Ho * Wo * Co, 0.0);
  for (int64_t oy = 0; oy < Ho; ++oy) {
    for (int64_t ox = 0; ox < Wo; ++ox) {
      double* orow = &out[(oy * Wo + ox) * Co];
      for (int64_t ky = 0; ky < kh; ++ky) {
        int64_t iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= H) continue;
        for (int64_t kx = 0; kx < kw; ++kx) {
          int64_t ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= W) continue;
          const double* irow = &in[(iy * W + ix) * Ci];
          const double* krow = &kv[((ky * kw + kx) * Ci) * Co];
          for (int64_t ci = 0; ci < Ci; ++ci) {
            double x = irow[ci];
            const double* kc = &krow[ci * Co];
            for (int64_t co = 0; co < Co; ++co) orow[co] += x * kc[co];
          }
        }
      }
    }
  }
  NodePtr inode = input.node(), knode = kernel.node();
  return make_op(
      "conv2d", {Ho, Wo, Co}, std::move(out), {inode, knode},
      [inode, knode, H, W, Ci, kh, kw, Co, pad, stride, Ho,
       Wo](const std::vector<double>& g, GradMap& sink) {
        const auto& in = inode->value;
        const auto& kv = knode->value;
        std::vector<double>* gi =
            inode->requires_grad ? &sink.slot(inode.get(), inode->numel())
                                 : nullptr;
        std::vector<double>* gk =
            knode->requires_grad ? &sink.slot(knode.get(), knode->numel())
                                 : nullptr;
        for (int64_t oy = 0; oy < Ho; ++oy) {
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const double* grow = &g[(oy * Wo + ox) * Co];
            for (int64_t ky = 0; ky < kh; ++ky) {
              int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              for (int64_t kx = 0; kx < kw; ++kx) {
                int64_t ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                int64_t ibase = (iy * W + ix) * Ci;
                int64_t kbase = (ky * kw + kx) * Ci * Co;
                for (int64_t ci = 0; ci < Ci; ++ci) {
                  const double* kc = &kv[kbase + ci * Co];
                  if (gi) {
                    double acc = 0.0;
                    for (int64_t co = 0; co < Co; ++co) {
                      acc += grow[co] * kc[co];
                    }
                    (*gi)[ibase + ci] += acc;
                  }
                  if (gk) {
                    double x = in[ibase + ci];
                    double* gkc = &(*gk)[kbase + ci * Co];
                    for (int64_t co = 0; co < Co; ++co) {
                      gkc[co] += x * grow[co];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Tensor conv1d_edge(const Tensor& input, const Tensor& kernel) {
  require(input.rank() == 2 && kernel.rank() == 3, "conv1d_edge: bad ranks");
  int64_t T = input.dim(0), Ci = input.dim(1);
  int64_t k = kernel.dim(0);
  require(k % 2 == 1, "conv1d_edge: kernel length must be odd");
  require(kernel.dim(1) == Ci, "conv1d_edge: channel mismatch");
  int64_t Co = kernel.dim(2);
  int64_t pad = (k - 1) / 2;
  const auto& in = input.data();
  const auto& kv = kernel.data();
  std::vector<double> out(T * Co, 0.0);
  auto clamp_t = [T](int64_t t) { return std::min(std::max(t, int64_t{0}), T - 1); };
  for (int64_t t = 0; t < T; ++t) {
    double* orow = &out[t * Co];
    for (int64_t kk = 0; kk < k; ++kk) {
      int64_t it = clamp_t(t + kk - pad);
      const double* irow = &in[it * Ci];
      const double* kbase = &kv[kk * Ci * Co];
      for (int64_t ci = 0; ci < Ci; ++ci) {
        double x = irow[ci];
        const double* kc = &kbase[ci * Co];
        for (int64_t co = 0; co < Co; ++co) orow[co] += x * kc[co];
      }
    }
  }
  NodePtr inode = input.node(), knode = kernel.node();
  return make_op(
      "conv1d_edge", {T, Co}, std::move(out), {inode, knode},
      [inode, knode, T, Ci, k, Co, pad](const std::vector<double>& g,
                                        GradMap& sink) {
        const auto& in = inode->value;
        const auto& kv = knode->value;
        std::vector<double>* gi =
            inode->requires_grad ? &sink.slot(inode.get(), inode->numel())
                                 : nullptr;
        std::vector<double>* gk =
            knode->requires_grad ? &sink.slot(knode.get(), knode->numel())
                                 : nullptr;
        auto clamp_t = [T](int64_t t) {
          return std::min(std::max(t, int64_t{0}), T - 1);
        };
        for (int64_t t = 0; t < T; ++t) {
          const double* grow = &g[t * Co];
          for (int64_t kk = 0; kk < k; ++kk) {
            int64_t it = clamp_t(t + kk - pad);
            int64_t kbase = kk * Ci * Co;
            for (int64_t ci = 0; ci < Ci; ++ci) {
              const double* kc = &kv[kbase + ci * Co];
              if (gi) {
                double acc = 0.0;
                for (int64_t co = 0; co < Co; ++co) acc += grow[co] * kc[co];
                (*gi)[it * Ci + ci] += acc;
              }
              if (gk) {
                double x = in[it * Ci + ci];
                double* gkc = &(*gk)[kbase + ci * Co];
                for (int64_t co = 0; co < Co; ++co) gkc[co] += x * grow[co];
              }
            }
          }
        }
      });
}

Tensor softmax2d(const Tensor& logits) {
  require(logits.rank() == 2, "softmax2d: expects [H,W]");
  const auto& lv = logits.data();
  double mx = lv[0];
  for (double x : lv) mx = std::max(mx, x);
  std::vector<double> out(lv.size());
  double z = 0.0;
  for (size_t i = 0; i < lv.size(); ++i) {
    out[i] = std::exp(lv[i] - mx);
    z += out[i];
  }
  double inv = 1.0 / z;
  for (auto& v : out) v *= inv;
  NodePtr ln = logits.node();
  auto saved = out;
  return make_op("softmax2d", logits.shape(), std::move(out), {ln},
                 [ln, saved](const std::vector<double>& g, GradMap& sink) {
                   auto& gl = sink.slot(ln.get(), ln->numel());
                   double dot = 0.0;
                   for (size_t i = 0; i < saved.size(); ++i) {
                     dot += g[i] * saved[i];
                   }
                   for (size_t i = 0; i < saved.size(); ++i) {
                     gl[i] += saved[i] * (g[i] - dot);
                   }
                 });
}

Tensor bilinear_sample(const Tensor& field, const Tensor& xy) {
  require(field.rank() == 3, "bilinear_sample: field must be [H,W,C]");
  require(xy.rank() == 2 && xy.dim(1) == 2,
          "bilinear_sample: xy must be [N,2]");
  int64_t H = field.dim(0), W = field.dim(1), C = field.dim(2);
  int64_t N = xy.dim(0);
  const auto& fv = field.data();
  const auto& pv = xy.data();
  auto fetch = [&](int64_t y, int64_t x, int64_t c) -> double {
    if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
    return fv[(y * W + x) * C + c];
  };
  std::vector<double> out(N * C, 0.0);
  for (int64_t n = 0; n < N; ++n) {
    double x = pv[2 * n], y = pv[2 * n + 1];
    int64_t x0 = static_cast<int64_t>(std::floor(x));
    int64_t y0 = static_cast<int64_t>(std::floor(y));
    double fx = x - x0, fy = y - y0;
    for (int64_t c = 0; c < C; ++c) {
      double v00 = fetch(y0, x0, c), v01 = fetch(y0, x0 + 1, c);
      double v10 = fetch(y0 + 1, x0, c), v11 = fetch(y0 + 1, x0 + 1, c);
      out[n * C + c] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                       fy * ((1 - fx) * v10 + fx * v11);
    }
  }
  NodePtr fn = field.node(), pn = xy.node();
  return make_op(
      "bilinear_sample", {N, C}, std::move(out), {fn, pn},
      [fn, pn, H, W, C, N](const std::vector<double>& g, GradMap& sink) {
        const auto& fv = fn->value;
        const auto& pv = pn->value;
        auto fetch = [&](int64_t y, int64_t x, int64_t c) -> double {
          if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
          return fv[(y * W + x) * C + c];
        };
        std::vector<double>* gf =
            fn->requires_grad ? &sink.slot(fn.get(), fn->numel()) : nullptr;
        std::vector<double>* gp =
            pn->requires_grad ? &sink.slot(pn.get(), pn->numel()) : nullptr;
        auto scatter = [&](int64_t y, int64_t x, int64_t c, double v) {
          if (y < 0 || y >= H || x < 0 || x >= W) return;
          (*gf)[(y * W + x) * C + c] += v;
        };
        for (int64_t n = 0; n < N; ++n) {
          double x = pv[2 * n], y = pv[2 * n + 1];
          int64_t x0 = static_cast<int64_t>(std::floor(x));
          int64_t y0 = static_cast<int64_t>(std::floor(y));
          double fx = x - x0, fy = y - y0;
          double dx = 0.0, dy = 0.0;
          for (int64_t c = 0; c < C; ++c) {
            double go = g[n * C + c];
            double v00 = fetch(y0, x0, c), v01 = fetch(y0, x0 + 1, c);
            double v10 = fetch(y0 + 1, x0, c), v11 = fetch(y0 + 1, x0 + 1, c);
            if (gf) {
              scatter(y0, x0, c, go * (1 - fy) * (1 - fx));
              scatter(y0, x0 + 1, c, go * (1 - fy) * fx);
              scatter(y0 + 1, x0, c, go * fy * (1 - fx));
              scatter(y0 + 1, x0 + 1, c, go * fy * fx);
            }
            dx += go * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
            dy += go * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
          }
          if (gp) {
            (*gp)[2 * n] += dx;
            (*gp)[2 * n + 1] += dy;
          }
        }
      });
}

Tensor stop_gradient(const Tensor& a) {
  auto node = std::make_shared<Node>();
  node->shape = a.shape();
  node->value = a.data();
  node->requires_grad = false;
  node->op_name = "stop_gradient";
  return Tensor(node);
}

Tensor bce_logits(const Tensor& logits, const Tensor& targets) {
  return binary_op(
      "bce_logits", logits, targets,
      [](double l, double t) { return softplus_v(l) - l * t; },
      [](double l, double t) { return sigmoid_v(l) - t; },
      [](double l, double) { return -l; });
}

Tensor huber_l2(const Tensor& pred, const Tensor& target, double knee) {
  require(pred.rank() == 2 && pred.dim(1) == 2, "huber_l2: pred must be [n,2]");
  require(pred.shape() == target.shape(), "huber_l2: shape mismatch");
  require(knee > 0.0, "huber_l2: knee must be positive");
  int64_t n = pred.dim(0);
  const auto& p = pred.data();
  const auto& t = target.data();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) {
    double dx = p[2 * i] - t[2 * i], dy = p[2 * i + 1] - t[2 * i + 1];
    double d = std::sqrt(dx * dx + dy * dy);
    out[i] = d <= knee ? 0.5 * d * d : knee * (d - 0.5 * knee);
  }
  NodePtr pn = pred.node(), tn = target.node();
  return make_op(
      "huber_l2", {n}, std::move(out), {pn, tn},
      [pn, tn, knee, n](const std::vector<double>& g, GradMap& sink) {
        const auto& p = pn->value;
        const auto& t = tn->value;
        std::vector<double>* gp =
            pn->requires_grad ? &sink.slot(pn.get(), pn->numel()) : nullptr;
        std::vector<double>* gt =
            tn->requires_grad ? &sink.slot(tn.get(), tn->numel()) : nullptr;
        for (int64_t i = 0; i < n; ++i) {
          double dx = p[2 * i] - t[2 * i], dy = p[2 * i + 1] - t[2 * i + 1];
          double d = std::sqrt(dx * dx + dy * dy);
          double gx, gy;
          if (d <= knee) {
            gx = dx;
            gy = dy;
          } else {
            gx = knee * dx / d;
            gy = knee * dy / d;
          }
          if (gp) {
            (*gp)[2 * i] += g[i] * gx;
            (*gp)[2 * i + 1] += g[i] * gy;
          }
          if (gt) {
            (*gt)[2 * i] -= g[i] * gx;
            (*gt)[2 * i + 1] -= g[i] * gy;
          }
        }
      });
}

}  // namespace btap
