#pragma once

#include <vector>

#include "slotvid/core/tensor.hpp"

namespace slotvid {

// Broadcasting binary elementwise ops (trailing-dimension rules: shapes are
// right-aligned, each pair of dims must match or one of them must be 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

// Unary elementwise.
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

// y = mul_c * x + add_c with scalar constants.
Tensor affine(const Tensor& a, Real mul_c, Real add_c);
inline Tensor scale(const Tensor& a, Real c) { return affine(a, c, 0.0); }

// Contraction over the trailing pair of axes; leading axes broadcast.
// [..,m,k] x [..,k,n] -> [..,m,n]. Both operands need dim >= 2.
Tensor matmul(const Tensor& a, const Tensor& b);

// Swap the last two axes.
Tensor transpose(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);

// Insert a new axis at `axis` holding the parts (all of identical shape).
Tensor stack(const std::vector<Tensor>& parts, int64_t axis);

// Select rows along axis 0.
Tensor index_select(const Tensor& a, const std::vector<int64_t>& indices);

// Reductions.
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int64_t axis, bool keepdim);

// Numerically stabilized softmax along `axis`.
Tensor softmax(const Tensor& a, int64_t axis);

// Normalize along `axis` to zero mean / unit variance (eps 1e-5), then apply
// gain and bias (both of length size(axis)).
Tensor layer_norm(const Tensor& a, int64_t axis, const Tensor& gain,
                  const Tensor& bias);

struct GruParams {
  Tensor wr, ur, br;  // reset gate
  Tensor wz, uz, bz;  // update gate
  Tensor wn, un, bn;  // candidate
};

// Gated recurrent update over [B, D] input/hidden. Update gate at 1 yields
// the candidate, at 0 the previous hidden state.
Tensor gru_cell(const Tensor& input, const Tensor& hidden, const GruParams& p);

// Cosine similarity over the last axis; norms carry a 1e-12 epsilon so zero
// vectors stay finite. Inputs must share one shape; result drops the last
// axis (scalars come back as shape [1]).
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Rows scaled to unit L2 norm over the last axis (same epsilon as above).
Tensor l2_normalize(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, Real c) { return scale(a, c); }
inline Tensor operator*(Real c, const Tensor& a) { return scale(a, c); }
inline Tensor operator+(const Tensor& a, Real c) { return affine(a, 1.0, c); }

}  // namespace slotvid
