#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tbiformer/ops.hpp"

namespace tbif {

// Per-head attention probabilities captured during a forward pass.
struct AttentionTrace {
  std::vector<Tensor> probs;  // heads x [rows x cols]

  // Head-averaged probabilities.
  Tensor mean_over_heads() const {
    if (probs.empty()) return {};
    Tensor out = Tensor::zeros_like(probs.front());
    for (const Tensor& p : probs) out += p;
    for (double& v : out.values()) v /= static_cast<double>(probs.size());
    return out;
  }
};

struct AttentionOptions {
  // Relative-position bias: score(i, j) += q_i . table[index(i, j)].
  std::optional<Var> bias_table;
  IndexMatrix bias_index;
  // When both are non-empty, query i may only attend key j with
  // query_groups[i] == key_groups[j].
  std::vector<int> query_groups;
  std::vector<int> key_groups;
  AttentionTrace* trace = nullptr;
};

// Scaled dot-product attention over `heads` column blocks of Q[M x D],
// K[N x D], V[N x D]:
//   A_ij = (q_i . k_j + b_ij) / sqrt(d_z),  out = softmax(A) V
// with d_z = D / heads. Heads are concatenated in the output [M x D]; the
// bias table, if any, is shared by all heads.
inline Var multi_head_attention(Var q, Var k, Var v, std::size_t heads, const AttentionOptions& opt = {}) {
  using detail::RowMat;
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  detail::require_rank(qv, 2, "attention");
  detail::require_rank(kv, 2, "attention");
  detail::require_rank(vv, 2, "attention");
  const std::size_t M = qv.dim(0), N = kv.dim(0), D = qv.dim(1);
  if (kv.dim(1) != D || vv.dim(1) != D || vv.dim(0) != N)
    throw DimensionError("attention: Q " + shape_str(qv.shape()) + ", K " + shape_str(kv.shape()) + ", V " +
                         shape_str(vv.shape()));
  if (heads == 0 || D % heads != 0)
    throw ConfigError("attention: width " + std::to_string(D) + " not divisible by " + std::to_string(heads) + " heads");
  const std::size_t dz = D / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dz));

  const bool biased = opt.bias_table.has_value();
  std::size_t n_table = 0;
  if (biased) {
    const Tensor& tv = opt.bias_table->value();
    if (tv.rank() != 2 || tv.dim(1) != dz)
      throw DimensionError("attention: bias table " + shape_str(tv.shape()) + " must have width " + std::to_string(dz));
    if (!opt.bias_index || opt.bias_index->size() != M * N)
      throw DimensionError("attention: bias index must be " + std::to_string(M) + "x" + std::to_string(N));
    n_table = tv.dim(0);
    for (int idx : *opt.bias_index)
      if (idx < 0 || static_cast<std::size_t>(idx) >= n_table)
        throw DimensionError("attention: bias index " + std::to_string(idx) + " outside table " + shape_str(tv.shape()));
  }
  const bool masked = !opt.query_groups.empty() && !opt.key_groups.empty();
  if (masked && (opt.query_groups.size() != M || opt.key_groups.size() != N))
    throw DimensionError("attention: group vectors must match query/key counts");

  auto Q = detail::as_mat(qv, M, D);
  auto K = detail::as_mat(kv, N, D);
  auto V = detail::as_mat(vv, N, D);

  std::vector<Tensor> probs;
  probs.reserve(heads);
  Tensor out({M, D});
  auto O = detail::as_mat(out, M, D);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h * dz);
    const auto w = static_cast<Eigen::Index>(dz);
    Tensor p({M, N});
    auto S = detail::as_mat(p, M, N);
    S.noalias() = Q.middleCols(c0, w) * K.middleCols(c0, w).transpose();
    if (biased) {
      const Tensor& tv = opt.bias_table->value();
      RowMat R = Q.middleCols(c0, w) * detail::as_mat(tv, n_table, dz).transpose();
      const std::vector<int>& idx = *opt.bias_index;
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) p(i, j) += R(i, idx[i * N + j]);
    }
    S *= inv_sqrt;
    if (masked)
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j)
          if (opt.query_groups[i] != opt.key_groups[j]) p(i, j) = -std::numeric_limits<double>::infinity();
    p = softmax_rows_value(p);
    O.middleCols(c0, w).noalias() = detail::as_mat(p, M, N) * V.middleCols(c0, w);
    probs.push_back(std::move(p));
  }
  if (opt.trace) opt.trace->probs = probs;

  std::vector<Var> inputs{q, k, v};
  std::optional<Var> table = opt.bias_table;
  IndexMatrix index = opt.bias_index;
  if (table) inputs.push_back(*table);
  return q.tape->record(
      std::move(out), inputs,
      [q, k, v, table, index, heads, M, N, D, dz, n_table, inv_sqrt, probs = std::move(probs)](
          Tape& t, const Tensor& g, const Tensor&) {
        auto Q = detail::as_mat(t.value(q), M, D);
        auto K = detail::as_mat(t.value(k), N, D);
        auto V = detail::as_mat(t.value(v), N, D);
        auto G = detail::as_mat(g, M, D);
        const bool gq = t.needs_grad(q), gk = t.needs_grad(k), gv = t.needs_grad(v);
        const bool gt = table && t.needs_grad(*table);
        for (std::size_t h = 0; h < heads; ++h) {
          const auto c0 = static_cast<Eigen::Index>(h * dz);
          const auto w = static_cast<Eigen::Index>(dz);
          auto P = detail::as_mat(probs[h], M, N);
          if (gv) detail::as_mat(t.grad_of(v), N, D).middleCols(c0, w).noalias() += P.transpose() * G.middleCols(c0, w);
          if (!gq && !gk && !gt) continue;
          RowMat dA = G.middleCols(c0, w) * V.middleCols(c0, w).transpose();
          for (Eigen::Index i = 0; i < dA.rows(); ++i) {
            const double dot = dA.row(i).dot(P.row(i));
            dA.row(i) = (P.row(i).array() * (dA.row(i).array() - dot)).matrix() * inv_sqrt;
          }
          if (gq) detail::as_mat(t.grad_of(q), M, D).middleCols(c0, w).noalias() += dA * K.middleCols(c0, w);
          if (gk) detail::as_mat(t.grad_of(k), N, D).middleCols(c0, w).noalias() += dA.transpose() * Q.middleCols(c0, w);
          if (table) {
            RowMat F = RowMat::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n_table));
            const std::vector<int>& idx = *index;
            for (std::size_t i = 0; i < M; ++i)
              for (std::size_t j = 0; j < N; ++j) F(i, idx[i * N + j]) += dA(i, j);
            if (gq)
              detail::as_mat(t.grad_of(q), M, D).middleCols(c0, w).noalias() +=
                  F * detail::as_mat(t.value(*table), n_table, dz);
            if (gt) detail::as_mat(t.grad_of(*table), n_table, dz).noalias() += F.transpose() * Q.middleCols(c0, w);
          }
        }
      });
}

}  // namespace tbif
