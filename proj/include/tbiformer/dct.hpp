#pragma once

#include <cmath>
#include <numbers>

#include "tbiformer/ops.hpp"

namespace tbif {

// Orthonormal DCT-II matrix, row k = k-th basis vector of length n.
inline Tensor dct_matrix(std::size_t n) {
  if (n == 0) throw ConfigError("dct_matrix: length must be positive");
  Tensor d({n, n});
  const double c0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ck = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      d(k, i) = (k == 0 ? c0 : ck) *
                std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(k) /
                         (2.0 * static_cast<double>(n)));
  return d;
}

// Rows [0, keep) of the DCT matrix: keep x n.
inline Tensor dct_basis(std::size_t n, std::size_t keep) {
  if (keep == 0 || keep > n)
    throw ConfigError("dct: keep " + std::to_string(keep) + " outside 1.." + std::to_string(n));
  Tensor full = dct_matrix(n);
  Tensor out({keep, n});
  std::copy(full.data(), full.data() + keep * n, out.data());
  return out;
}

// Transposed truncated basis, n x keep: maps keep coefficients back to time.
inline Tensor idct_basis(std::size_t n, std::size_t keep) {
  Tensor b = dct_basis(n, keep);
  Tensor out({n, keep});
  detail::as_mat(out, n, keep) = detail::as_mat(b, keep, n).transpose();
  return out;
}

namespace detail {
inline std::size_t trailing_size(const Tensor& x) { return x.size() / x.dim(0); }

inline Shape with_leading(const Tensor& x, std::size_t lead) {
  Shape s = x.shape();
  s[0] = lead;
  return s;
}
}  // namespace detail

// First `keep` DCT coefficients along the leading (time) axis of X[n x ...].
inline Tensor dct_time(const Tensor& x, std::size_t keep) {
  const std::size_t n = x.dim(0), f = detail::trailing_size(x);
  if (keep == 0 || keep > n)
    throw ConfigError("dct_time: K=" + std::to_string(keep) + " outside 1.." + std::to_string(n));
  Tensor basis = dct_basis(n, keep);
  Tensor out(detail::with_leading(x, keep));
  detail::as_mat(out, keep, f).noalias() = detail::as_mat(basis, keep, n) * detail::as_mat(x, n, f);
  return out;
}

// Zero-pads coefficients C[keep x ...] to n and applies the inverse transform.
inline Tensor idct_time(const Tensor& coeffs, std::size_t n) {
  const std::size_t keep = coeffs.dim(0), f = detail::trailing_size(coeffs);
  if (keep > n) throw ConfigError("idct_time: K=" + std::to_string(keep) + " exceeds N=" + std::to_string(n));
  Tensor basis = idct_basis(n, keep);
  Tensor out(detail::with_leading(coeffs, n));
  detail::as_mat(out, n, f).noalias() = detail::as_mat(basis, n, keep) * detail::as_mat(coeffs, keep, f);
  return out;
}

// Projection of Y[T x ...] onto the first K temporal DCT basis vectors.
inline Tensor lowpass_smooth(const Tensor& y, std::size_t keep) {
  return idct_time(dct_time(y, keep), y.dim(0));
}

// Differentiable inverse transform of coefficient rows C[keep x f] to n steps.
inline Var idct_time(Var coeffs, std::size_t n) {
  Var basis = coeffs.tape->constant(idct_basis(n, coeffs.dim(0)));
  return matmul(basis, coeffs);
}

}  // namespace tbif
