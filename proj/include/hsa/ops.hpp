#pragma once

// Differentiable tensor operations. Each op records itself on the active tape
// when any input requires a gradient; otherwise it is a plain computation.

#include <cstddef>
#include <vector>

#include "hsa/tensor.hpp"

namespace hsa {

using RowMask = std::vector<bool>;  // empty = every row/column present

// Elementwise; shapes must match or one side must hold a single value.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
/// log(1 + e^x), evaluated without overflow for large |x|.
Tensor softplus(const Tensor& a);

/// Scalar-valued helpers shared with the kernels and tests.
double softplus_value(double x);
double sigmoid_value(double x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// x[m×n] + bias[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Row i of x[m×n] multiplied by s[i].
Tensor scale_rows(const Tensor& x, const Tensor& s);

/// Row softmax with max subtraction. Columns cleared in `column_mask` get
/// exactly zero weight. Throws NaNInput or EmptyMask.
Tensor softmax_rows(const Tensor& x, const RowMask& column_mask = {});
/// Per-row normalisation (epsilon 1e-5) followed by gain and bias.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias);
/// Per-row normalisation without affine parameters.
Tensor layernorm(const Tensor& x);
inline constexpr double kLayerNormEps = 1e-5;

/// Mean of the rows kept by `mask`; returns a vector of length n. Throws EmptyMask.
Tensor mean_pool(const Tensor& x, const RowMask& mask = {});
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
/// Rows of x selected (with repetition allowed) by index.
Tensor gather_rows(const Tensor& x, const std::vector<int>& index);
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  return gather_rows(table, ids);
}
/// out[index[i]] += x[i]; out has `rows` rows.
Tensor scatter_add_rows(const Tensor& x, const std::vector<int>& index, std::size_t rows);
/// Elements x[rows[i], cols[i]] as a vector.
Tensor pick(const Tensor& x, const std::vector<int>& rows, const std::vector<int>& cols);
/// Output row k is the mean of x's rows listed in segments[k].
Tensor segment_mean(const Tensor& x, const std::vector<std::vector<int>>& segments);

/// Copy that blocks gradient flow (routes through StopGradientReplay).
Tensor detach(const Tensor& a);

/// Σ (or mean) over each node's neighbours, h[n×d] -> [n×d].
Tensor aggregate_neighbors(const Tensor& h, const std::vector<std::vector<int>>& neighbors, bool mean);

/// Diagonal selective scan (see kernels::selective_scan):
/// x, delta [n×d]; b, c [n×s]; a [d×s]; skip [d]; gamma has n constants.
Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& b, const Tensor& c,
                      const Tensor& a, const Tensor& skip, const std::vector<double>& gamma);

/// Elementwise smooth-L1 (Huber with threshold beta) between pred and a constant target.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta = 1.0);
/// Elementwise logistic cross-entropy of logits against constant {0,1} targets.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace hsa
