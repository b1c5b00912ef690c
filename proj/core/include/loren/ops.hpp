#pragma once

#include <cstdint>
#include <vector>

#include "loren/tensor.hpp"

namespace loren::ops {

// 2-d convolution over [T, F, Cin] with kernel [k, k, Cin, Cout] and bias
// [Cout]; zero padding, stride 1, output [T, F, Cout]. k must be odd.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);
// Accumulates into whichever of dx/dw/db is non-null.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dout,
                     Tensor* dx, Tensor* dw, Tensor* db);

// Per-position channel mix: [T, F, Cin] x [Cin, Cout] -> [T, F, Cout].
Tensor conv1x1(const Tensor& x, const Tensor& m);
void conv1x1_backward(const Tensor& x, const Tensor& m, const Tensor& dout,
                      Tensor* dx, Tensor* dm);

struct LayerNormStats {
  std::vector<double> mean;
  std::vector<double> invstd;
  int64_t group_size = 0;
};

// Normalizes over `axes` (each group = one slice across those axes) with
// biased variance, then applies gamma and beta broadcast right-aligned
// against x (each of their dims must equal x's dim or be 1).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const std::vector<int>& axes, double eps,
                  LayerNormStats* stats = nullptr);
void layer_norm_backward(const Tensor& x, const Tensor& gamma,
                         const std::vector<int>& axes, const LayerNormStats& stats,
                         const Tensor& dout, Tensor* dx, Tensor* dgamma,
                         Tensor* dbeta);

Tensor relu(const Tensor& x);
void relu_backward(const Tensor& x, const Tensor& dout, Tensor* dx);

Tensor add(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
// y is the forward output.
void sigmoid_backward(const Tensor& y, const Tensor& dout, Tensor* dx);

Tensor scale(const Tensor& x, double s);

// Row gather on [T, F, C]: flat t*F+f indices -> [N, C].
Tensor gather_tf(const Tensor& x, const std::vector<int32_t>& flat_tf);
void gather_tf_backward(const std::vector<int32_t>& flat_tf, const Tensor& dout,
                        Tensor* dx);

// Mean binary cross-entropy of LLRs against coded bits under the convention
// that positive LLR means bit 0. Probabilities are clamped at 1e-12 before
// the log, so a fully confident wrong bit contributes -log(1e-12).
double bce_with_llr(const Tensor& llrs, const std::vector<uint8_t>& bits);
void bce_with_llr_backward(const Tensor& llrs, const std::vector<uint8_t>& bits,
                           double dloss, Tensor* dllr);

}  // namespace loren::ops
