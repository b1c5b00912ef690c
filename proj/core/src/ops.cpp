#include "loren/ops.hpp"

#include <algorithm>
#include <cmath>

#include "loren/errors.hpp"

namespace loren::ops {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

// -log(1e-12): the ceiling one clamped term can contribute to the BCE sum.
constexpr double kBceCap = 27.631021115928547;

double softplus(double t) {
  // log(1 + exp(t)) without overflow.
  return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.rank() == 3, "conv2d: x must be [T,F,Cin]");
  require(w.rank() == 4, "conv2d: w must be [k,k,Cin,Cout]");
  const int64_t T = x.dim(0), F = x.dim(1), Cin = x.dim(2);
  const int64_t k = w.dim(0), Cout = w.dim(3);
  require(w.dim(1) == k, "conv2d: kernel must be square");
  require(k % 2 == 1, "conv2d: kernel size must be odd");
  require(w.dim(2) == Cin, "conv2d: kernel Cin mismatch");
  require(b.numel() == Cout, "conv2d: bias length mismatch");
  const int64_t p = k / 2;

  Tensor out({T, F, Cout});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.data();
  double* od = out.data();

  for (int64_t t = 0; t < T; ++t) {
    for (int64_t f = 0; f < F; ++f) {
      double* orow = od + (t * F + f) * Cout;
      for (int64_t co = 0; co < Cout; ++co) orow[co] = bd[co];
      const int64_t dt0 = std::max<int64_t>(0, p - t), dt1 = std::min(k, T + p - t);
      const int64_t df0 = std::max<int64_t>(0, p - f), df1 = std::min(k, F + p - f);
      for (int64_t dt = dt0; dt < dt1; ++dt) {
        const int64_t ti = t + dt - p;
        for (int64_t df = df0; df < df1; ++df) {
          const int64_t fi = f + df - p;
          const double* xrow = xd + (ti * F + fi) * Cin;
          const double* wrow = wd + (dt * k + df) * Cin * Cout;
          for (int64_t ci = 0; ci < Cin; ++ci) {
            const double xv = xrow[ci];
            const double* wcol = wrow + ci * Cout;
            for (int64_t co = 0; co < Cout; ++co) orow[co] += xv * wcol[co];
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dout,
                     Tensor* dx, Tensor* dw, Tensor* db) {
  const int64_t T = x.dim(0), F = x.dim(1), Cin = x.dim(2);
  const int64_t k = w.dim(0), Cout = w.dim(3);
  require(dout.rank() == 3 && dout.dim(0) == T && dout.dim(1) == F && dout.dim(2) == Cout,
          "conv2d_backward: dout shape mismatch");
  if (dx) require(dx->same_shape(x), "conv2d_backward: dx shape mismatch");
  if (dw) require(dw->same_shape(w), "conv2d_backward: dw shape mismatch");
  if (db) require(db->numel() == Cout, "conv2d_backward: db shape mismatch");
  const int64_t p = k / 2;

  const double* xd = x.data();
  const double* wd = w.data();
  const double* gd = dout.data();

  if (db) {
    double* dbd = db->data();
    for (int64_t i = 0; i < T * F; ++i) {
      const double* grow = gd + i * Cout;
      for (int64_t co = 0; co < Cout; ++co) dbd[co] += grow[co];
    }
  }

  if (dw) {
    double* dwd = dw->data();
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t f = 0; f < F; ++f) {
        const double* grow = gd + (t * F + f) * Cout;
        const int64_t dt0 = std::max<int64_t>(0, p - t), dt1 = std::min(k, T + p - t);
        const int64_t df0 = std::max<int64_t>(0, p - f), df1 = std::min(k, F + p - f);
        for (int64_t dt = dt0; dt < dt1; ++dt) {
          const int64_t ti = t + dt - p;
          for (int64_t df = df0; df < df1; ++df) {
            const int64_t fi = f + df - p;
            const double* xrow = xd + (ti * F + fi) * Cin;
            double* dwrow = dwd + (dt * k + df) * Cin * Cout;
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const double xv = xrow[ci];
              double* dwcol = dwrow + ci * Cout;
              for (int64_t co = 0; co < Cout; ++co) dwcol[co] += xv * grow[co];
            }
          }
        }
      }
    }
  }

  if (dx) {
    double* dxd = dx->data();
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t f = 0; f < F; ++f) {
        const double* grow = gd + (t * F + f) * Cout;
        const int64_t dt0 = std::max<int64_t>(0, p - t), dt1 = std::min(k, T + p - t);
        const int64_t df0 = std::max<int64_t>(0, p - f), df1 = std::min(k, F + p - f);
        for (int64_t dt = dt0; dt < dt1; ++dt) {
          const int64_t ti = t + dt - p;
          for (int64_t df = df0; df < df1; ++df) {
            const int64_t fi = f + df - p;
            double* dxrow = dxd + (ti * F + fi) * Cin;
            const double* wrow = wd + (dt * k + df) * Cin * Cout;
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const double* wcol = wrow + ci * Cout;
              double acc = 0.0;
              for (int64_t co = 0; co < Cout; ++co) acc += wcol[co] * grow[co];
              dxrow[ci] += acc;
            }
          }
        }
      }
    }
  }
}

Tensor conv1x1(const Tensor& x, const Tensor& m) {
  require(x.rank() == 3, "conv1x1: x must be [T,F,Cin]");
  require(m.rank() == 2, "conv1x1: m must be [Cin,Cout]");
  const int64_t TF = x.dim(0) * x.dim(1), Cin = x.dim(2), Cout = m.dim(1);
  require(m.dim(0) == Cin, "conv1x1: Cin mismatch");

  Tensor out({x.dim(0), x.dim(1), Cout});
  const double* xd = x.data();
  const double* md = m.data();
  double* od = out.data();
  for (int64_t i = 0; i < TF; ++i) {
    const double* xrow = xd + i * Cin;
    double* orow = od + i * Cout;
    for (int64_t ci = 0; ci < Cin; ++ci) {
      const double xv = xrow[ci];
      const double* mrow = md + ci * Cout;
      for (int64_t co = 0; co < Cout; ++co) orow[co] += xv * mrow[co];
    }
  }
  return out;
}

void conv1x1_backward(const Tensor& x, const Tensor& m, const Tensor& dout,
                      Tensor* dx, Tensor* dm) {
  const int64_t TF = x.dim(0) * x.dim(1), Cin = x.dim(2), Cout = m.dim(1);
  require(dout.rank() == 3 && dout.dim(2) == Cout &&
              dout.dim(0) == x.dim(0) && dout.dim(1) == x.dim(1),
          "conv1x1_backward: dout shape mismatch");
  if (dx) require(dx->same_shape(x), "conv1x1_backward: dx shape mismatch");
  if (dm) require(dm->same_shape(m), "conv1x1_backward: dm shape mismatch");

  const double* xd = x.data();
  const double* md = m.data();
  const double* gd = dout.data();
  for (int64_t i = 0; i < TF; ++i) {
    const double* xrow = xd + i * Cin;
    const double* grow = gd + i * Cout;
    if (dm) {
      double* dmd = dm->data();
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const double xv = xrow[ci];
        double* dmrow = dmd + ci * Cout;
        for (int64_t co = 0; co < Cout; ++co) dmrow[co] += xv * grow[co];
      }
    }
    if (dx) {
      double* dxrow = dx->data() + i * Cin;
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const double* mrow = md + ci * Cout;
        double acc = 0.0;
        for (int64_t co = 0; co < Cout; ++co) acc += mrow[co] * grow[co];
        dxrow[ci] += acc;
      }
    }
  }
}

namespace {

// Iteration helper shared by layer_norm forward and backward: for every flat
// index of x, yields the normalization group id and the broadcast flat index
// into gamma/beta.
struct NormIndexer {
  std::vector<int64_t> xdims, xstrides;
  std::vector<char> is_axis;
  std::vector<int64_t> gdims;       // group (complement) dims in axis order
  std::vector<int64_t> pdims;       // gamma dims right-aligned onto x
  int rank = 0;
  int64_t num_groups = 1, group_size = 1;

  NormIndexer(const Tensor& x, const Tensor& param, const std::vector<int>& axes) {
    rank = x.rank();
    xdims = x.shape();
    xstrides.assign(rank, 1);
    for (int d = rank - 2; d >= 0; --d) xstrides[d] = xstrides[d + 1] * xdims[d + 1];
    is_axis.assign(rank, 0);
    for (int a : axes) {
      require(a >= 0 && a < rank, "layer_norm: axis out of range");
      require(!is_axis[a], "layer_norm: duplicate axis");
      is_axis[a] = 1;
    }
    require(!axes.empty(), "layer_norm: empty axis list");
    for (int d = 0; d < rank; ++d) {
      if (is_axis[d]) group_size *= xdims[d];
      else { gdims.push_back(xdims[d]); num_groups *= xdims[d]; }
    }
    const int prank = param.rank();
    require(prank <= rank, "layer_norm: gamma rank exceeds x rank");
    pdims.assign(rank, 1);
    for (int d = 0; d < prank; ++d) {
      const int64_t pd = param.shape()[static_cast<size_t>(d)];
      const int64_t xd = xdims[static_cast<size_t>(rank - prank + d)];
      require(pd == 1 || pd == xd, "layer_norm: gamma dim incompatible with x");
      pdims[static_cast<size_t>(rank - prank + d)] = pd;
    }
  }

  void locate(int64_t flat, int64_t* group, int64_t* pidx) const {
    int64_t g = 0, pi = 0;
    for (int d = 0; d < rank; ++d) {
      const int64_t q = (flat / xstrides[d]) % xdims[d];
      if (!is_axis[d]) g = g * xdims[d] + q;
      pi = pi * pdims[d] + (pdims[d] == 1 ? 0 : q);
    }
    *group = g;
    *pidx = pi;
  }
};

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const std::vector<int>& axes, double eps, LayerNormStats* stats) {
  require(gamma.same_shape(beta), "layer_norm: gamma and beta must share a shape");
  NormIndexer ix(x, gamma, axes);
  const int64_t n = x.numel();

  std::vector<double> sum(static_cast<size_t>(ix.num_groups), 0.0);
  std::vector<double> sumsq(static_cast<size_t>(ix.num_groups), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    int64_t g, pi;
    ix.locate(i, &g, &pi);
    sum[static_cast<size_t>(g)] += x[i];
    sumsq[static_cast<size_t>(g)] += x[i] * x[i];
  }

  std::vector<double> mean(static_cast<size_t>(ix.num_groups));
  std::vector<double> invstd(static_cast<size_t>(ix.num_groups));
  const double inv_n = 1.0 / static_cast<double>(ix.group_size);
  for (int64_t g = 0; g < ix.num_groups; ++g) {
    const double mu = sum[static_cast<size_t>(g)] * inv_n;
    const double var = sumsq[static_cast<size_t>(g)] * inv_n - mu * mu;
    mean[static_cast<size_t>(g)] = mu;
    invstd[static_cast<size_t>(g)] = 1.0 / std::sqrt(std::max(var, 0.0) + eps);
  }

  Tensor out(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    int64_t g, pi;
    ix.locate(i, &g, &pi);
    const double xhat = (x[i] - mean[static_cast<size_t>(g)]) * invstd[static_cast<size_t>(g)];
    out[i] = xhat * gamma[pi] + beta[pi];
  }

  if (stats) {
    stats->mean = std::move(mean);
    stats->invstd = std::move(invstd);
    stats->group_size = ix.group_size;
  }
  return out;
}

void layer_norm_backward(const Tensor& x, const Tensor& gamma,
                         const std::vector<int>& axes, const LayerNormStats& stats,
                         const Tensor& dout, Tensor* dx, Tensor* dgamma,
                         Tensor* dbeta) {
  NormIndexer ix(x, gamma, axes);
  require(dout.same_shape(x), "layer_norm_backward: dout shape mismatch");
  require(static_cast<int64_t>(stats.mean.size()) == ix.num_groups,
          "layer_norm_backward: stats mismatch");
  const int64_t n = x.numel();
  const double inv_n = 1.0 / static_cast<double>(ix.group_size);

  // s1 = sum of dxhat, s2 = sum of dxhat * xhat, per group.
  std::vector<double> s1(static_cast<size_t>(ix.num_groups), 0.0);
  std::vector<double> s2(static_cast<size_t>(ix.num_groups), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    int64_t g, pi;
    ix.locate(i, &g, &pi);
    const double xhat = (x[i] - stats.mean[static_cast<size_t>(g)]) *
                        stats.invstd[static_cast<size_t>(g)];
    const double dxhat = dout[i] * gamma[pi];
    s1[static_cast<size_t>(g)] += dxhat;
    s2[static_cast<size_t>(g)] += dxhat * xhat;
    if (dgamma) (*dgamma)[pi] += dout[i] * xhat;
    if (dbeta) (*dbeta)[pi] += dout[i];
  }

  if (dx) {
    require(dx->same_shape(x), "layer_norm_backward: dx shape mismatch");
    for (int64_t i = 0; i < n; ++i) {
      int64_t g, pi;
      ix.locate(i, &g, &pi);
      const size_t gs = static_cast<size_t>(g);
      const double xhat = (x[i] - stats.mean[gs]) * stats.invstd[gs];
      const double dxhat = dout[i] * gamma[pi];
      (*dx)[i] += stats.invstd[gs] * (dxhat - inv_n * s1[gs] - xhat * inv_n * s2[gs]);
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

void relu_backward(const Tensor& x, const Tensor& dout, Tensor* dx) {
  require(dout.same_shape(x) && dx && dx->same_shape(x), "relu_backward: shape mismatch");
  for (int64_t i = 0; i < x.numel(); ++i)
    if (x[i] > 0.0) (*dx)[i] += dout[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = sigmoid_scalar(x[i]);
  return out;
}

void sigmoid_backward(const Tensor& y, const Tensor& dout, Tensor* dx) {
  require(dout.same_shape(y) && dx && dx->same_shape(y), "sigmoid_backward: shape mismatch");
  for (int64_t i = 0; i < y.numel(); ++i) (*dx)[i] += dout[i] * y[i] * (1.0 - y[i]);
}

Tensor scale(const Tensor& x, double s) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] * s;
  return out;
}

Tensor gather_tf(const Tensor& x, const std::vector<int32_t>& flat_tf) {
  require(x.rank() == 3, "gather_tf: x must be [T,F,C]");
  const int64_t TF = x.dim(0) * x.dim(1), C = x.dim(2);
  Tensor out({static_cast<int64_t>(flat_tf.size()), C});
  for (size_t i = 0; i < flat_tf.size(); ++i) {
    const int64_t r = flat_tf[i];
    require(r >= 0 && r < TF, "gather_tf: index out of range");
    for (int64_t c = 0; c < C; ++c) out[static_cast<int64_t>(i) * C + c] = x[r * C + c];
  }
  return out;
}

void gather_tf_backward(const std::vector<int32_t>& flat_tf, const Tensor& dout,
                        Tensor* dx) {
  require(dx && dx->rank() == 3, "gather_tf_backward: dx must be [T,F,C]");
  const int64_t C = dx->dim(2);
  require(dout.rank() == 2 && dout.dim(0) == static_cast<int64_t>(flat_tf.size()) &&
              dout.dim(1) == C,
          "gather_tf_backward: dout shape mismatch");
  for (size_t i = 0; i < flat_tf.size(); ++i) {
    const int64_t r = flat_tf[i];
    for (int64_t c = 0; c < C; ++c)
      (*dx)[r * C + c] += dout[static_cast<int64_t>(i) * C + c];
  }
}

double bce_with_llr(const Tensor& llrs, const std::vector<uint8_t>& bits) {
  require(llrs.numel() == static_cast<int64_t>(bits.size()),
          "bce_with_llr: bit count mismatch");
  require(!bits.empty(), "bce_with_llr: empty input");
  double total = 0.0;
  for (int64_t i = 0; i < llrs.numel(); ++i) {
    const double s = bits[static_cast<size_t>(i)] ? 1.0 : -1.0;
    total += std::min(softplus(s * llrs[i]), kBceCap);
  }
  return total / static_cast<double>(llrs.numel());
}

void bce_with_llr_backward(const Tensor& llrs, const std::vector<uint8_t>& bits,
                           double dloss, Tensor* dllr) {
  require(dllr && dllr->same_shape(llrs), "bce_with_llr_backward: shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(llrs.numel());
  for (int64_t i = 0; i < llrs.numel(); ++i) {
    const double s = bits[static_cast<size_t>(i)] ? 1.0 : -1.0;
    if (softplus(s * llrs[i]) >= kBceCap) continue;  // clamped, flat region
    (*dllr)[i] += dloss * inv_n * s * sigmoid_scalar(s * llrs[i]);
  }
}

}  // namespace loren::ops
