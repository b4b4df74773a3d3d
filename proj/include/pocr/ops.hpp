#pragma once

#include "pocr/tensor.hpp"
#include "pocr/types.hpp"

namespace pocr {

// Per-position loss weighting; pad positions contribute exactly zero.
struct LossConfig {
  std::vector<double> token_weights;  // empty means all 1.0
  TokenId pad_token_id = 0;
};

// All ops allocate a fresh output, verify it is finite, and (when a tape is
// active and any input requires grad) record the reverse rule.

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n] → [m×n]
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);               // same shape
Tensor add_row_broadcast(const Tensor& a, const Tensor& b);  // [m×n] + [n]
Tensor mul(const Tensor& a, const Tensor& b);               // elementwise
Tensor scale(const Tensor& a, double c);

Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, Index begin, Index end);
Tensor slice_cols(const Tensor& a, Index begin, Index end);

Tensor gelu(const Tensor& a);  // exact erf form

// Row-wise softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& logits);

// y = gain ⊙ (x − μ)/√(σ² + 1e-5) + bias, per last-axis slice.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Row i of the result is table[ids[i]]; backward scatters additively.
Tensor embedding_lookup(const Tensor& table, const TokenSequence& ids);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// −(Σᵢ wᵢ·log softmax(logitsᵢ)[targetᵢ]) / (Σ non-pad wᵢ). Log-softmax is
// computed directly; pad positions are excluded from both sums.
Tensor cross_entropy_loss(const Tensor& logits, const TokenSequence& targets,
                          const LossConfig& cfg);

// Unnormalized pieces for batch-level aggregation: returns the weighted
// negative log-likelihood sum as a tensor and the non-pad weight as a plain
// double. cross_entropy_loss == scale(sum, 1/weight).
struct LossParts {
  Tensor weighted_nll_sum;
  double weight_total = 0.0;
  Index position_count = 0;  // non-pad positions
};
LossParts cross_entropy_parts(const Tensor& logits, const TokenSequence& targets,
                              const LossConfig& cfg);

constexpr double kLayerNormEpsilon = 1e-5;

}  // namespace pocr
