#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kdqa/rng.hpp"
#include "kdqa/tensor.hpp"

namespace kdqa {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);

// Row broadcasting: a is [n, m] (or [m]), row is [m].
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);

// Matrix products on rank-2 operands.
Tensor matmul(const Tensor& a, const Tensor& b);     // [n,k] x [k,m]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [n,k] x [m,k]^T
Tensor matvec(const Tensor& a, const Tensor& v);     // [n,k] x [k] -> [n]

Tensor reshape(const Tensor& a, Shape shape);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);

/// Per-row normalization followed by an affine map; gamma, beta are [m].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Inverted dropout. Identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_rows(const Tensor& x);  // [n, m] -> [m]
Tensor dot(const Tensor& a, const Tensor& b);

/// Row-wise softmax of logits / tau, max-subtracted. Rank 1 or 2.
Tensor softmax_temp(const Tensor& logits, double tau);

/// Mean over rows of sum_i p_i ln(p_i / q_i). Both arguments are clamped
/// below at kProbFloor inside the log; terms with p_i == 0 vanish.
Tensor kl_div(const Tensor& p, const Tensor& q);
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kRowSumTolerance = 1e-6;

/// Mean over rows of -log_softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
Tensor cross_entropy(const Tensor& logits, std::size_t target);

}  // namespace kdqa
