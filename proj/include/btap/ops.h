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

#ifndef BTAP_OPS_H_
#define BTAP_OPS_H_

#include <vector>

#include "btap/tensor.h"

namespace btap {

// Binary elementwise ops with trailing-axis broadcasting: shapes are
// aligned from the last axis; each pair of extents must match or one of
// them must be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Unary elementwise.
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// Reductions (to scalar).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor max_all(const Tensor& a);  // gradient routes to the first argmax

// Linear algebra on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor matvec(const Tensor& a, const Tensor& x);  // [m,k] x [k]   -> [m]

// Shape plumbing.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor row(const Tensor& a, int64_t i);               // [n,c] -> [c]
Tensor cols(const Tensor& a, int64_t start, int64_t n);  // [r,c] -> [r,n]
Tensor stack_rows(const std::vector<Tensor>& rows);   // n x [c] -> [n,c]
Tensor concat_cols(const std::vector<Tensor>& mats);  // [n,ci] -> [n,sum ci]

// 2D convolution, zero "same" padding: input [H,W,Cin], kernel
// [k,k,Cin,Cout] with k odd, output [ceil(H/s), ceil(W/s), Cout].
// Output cell (oy,ox) is centered on input pixel (oy*s, ox*s).
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride);

// 1D temporal convolution with EDGE-replicate padding (so constant
// inputs stay exactly constant across time): input [T,Cin], kernel
// [k,Cin,Cout] with k odd, output [T,Cout].
Tensor conv1d_edge(const Tensor& input, const Tensor& kernel);

// Numerically stabilized spatial softmax over the whole [H,W] map.
Tensor softmax2d(const Tensor& logits);

// Bilinear sampling of field [H,W,C] at points xy [N,2] (x,y order,
// pixel-center convention: (0,0) is the center of field[0][0]).
// Out-of-bounds corners read as 0 (black background), not clamped.
// Differentiable w.r.t. both field and xy.
Tensor bilinear_sample(const Tensor& field, const Tensor& xy);

// Value copy that blocks gradient flow.
Tensor stop_gradient(const Tensor& a);

// Sigmoid binary cross-entropy, elementwise on matching shapes:
// softplus(l) - l*t.  Gradient flows to both logits and targets (the
// latter only matters when targets are live predictions).
Tensor bce_logits(const Tensor& logits, const Tensor& targets);

// Rowwise Huber of the L2 distance between pred [n,2] and target
// [n,2]: 0.5*d^2 for d <= knee, knee*(d - 0.5*knee) otherwise.
// Continuous value and gradient at the knee.  Output [n].
Tensor huber_l2(const Tensor& pred, const Tensor& target, double knee);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace btap

#endif  // BTAP_OPS_H_
