#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "tbiformer/tape.hpp"

namespace tbif {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline CMapMat as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline MapMat as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
}

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Size of the trailing axis and the number of slices along it.
inline std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t) {
  std::size_t cols = t.shape().back();
  return {t.size() / cols, cols};
}

}  // namespace detail

// ---- elementwise ----------------------------------------------------------

inline Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same(x, y, "add");
  Tensor out = x;
  out += y;
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (t.needs_grad(a)) t.grad_of(a) += g;
    if (t.needs_grad(b)) t.grad_of(b) += g;
  });
}

inline Var sub(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (t.needs_grad(a)) t.grad_of(a) += g;
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(b);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

inline Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

inline Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

// Adds bias[n] to every slice along the trailing axis of X[..., n].
inline Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  auto [rows, cols] = detail::rows_cols(xv);
  if (bv.size() != cols)
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " does not match trailing axis of " +
                         shape_str(xv.shape()));
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return x.tape->record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape& t, const Tensor& g, const Tensor&) {
    if (t.needs_grad(x)) t.grad_of(x) += g;
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad_of(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
    }
  });
}

// Inverted dropout. Identity when !train or rate == 0; the mask is drawn from
// rng so runs are reproducible given the generator state.
inline Var dropout(Var x, double rate, bool train, std::mt19937_64& rng) {
  if (!train || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = keep(rng) ? s : 0.0;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return x.tape->record(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

// ---- reductions -------------------------------------------------------------

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape->record(Tensor({1}, {s}), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gx = t.grad_of(x);
    for (double& v : gx.values()) v += g[0];
  });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// Mean over trailing-axis slices of sqrt(|slice|^2 + eps) - sqrt(eps): smooth
// at zero and exactly zero when every slice is zero.
inline Var mean_row_norm(Var x, double eps) {
  const Tensor& xv = x.value();
  auto [rows, cols] = detail::rows_cols(xv);
  std::vector<double> norms(rows);
  const double floor = std::sqrt(eps);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = eps;
    for (std::size_t c = 0; c < cols; ++c) s += xv[r * cols + c] * xv[r * cols + c];
    norms[r] = std::sqrt(s);
    total += norms[r] - floor;
  }
  return x.tape->record(Tensor({1}, {total / static_cast<double>(rows)}), {x},
                        [x, rows, cols, norms = std::move(norms)](Tape& t, const Tensor& g, const Tensor&) {
                          const Tensor& xv = t.value(x);
                          Tensor& gx = t.grad_of(x);
                          const double w = g[0] / static_cast<double>(rows);
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                              gx[r * cols + c] += w * xv[r * cols + c] / norms[r];
                        });
}

// ---- linear algebra ---------------------------------------------------------

inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  detail::as_mat(out, m, n).noalias() = detail::as_mat(av, m, k) * detail::as_mat(bv, k, n);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g, const Tensor&) {
    auto G = detail::as_mat(g, m, n);
    if (t.needs_grad(a))
      detail::as_mat(t.grad_of(a), m, k).noalias() += G * detail::as_mat(t.value(b), k, n).transpose();
    if (t.needs_grad(b))
      detail::as_mat(t.grad_of(b), k, n).noalias() += detail::as_mat(t.value(a), m, k).transpose() * G;
  });
}

inline Var transpose(Var a) {
  const Tensor& av = a.value();
  detail::require_rank(av, 2, "transpose");
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  detail::as_mat(out, n, m) = detail::as_mat(av, m, n).transpose();
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g, const Tensor&) {
    detail::as_mat(t.grad_of(a), m, n) += detail::as_mat(g, n, m).transpose();
  });
}

// Row-wise softmax over the trailing axis, max-subtracted.
inline Tensor softmax_rows_value(const Tensor& x) {
  auto [rows, cols] = detail::rows_cols(x);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = *std::max_element(in, in + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (o[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= s;
  }
  return out;
}

inline Var softmax_rows(Var x) {
  Tensor out = softmax_rows_value(x.value());
  auto [rows, cols] = detail::rows_cols(out);
  return x.tape->record(std::move(out), {x}, [x, rows, cols](Tape& t, const Tensor& g, const Tensor& p) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * p[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += p[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

// Per trailing-axis slice: (x - mean) / sqrt(var + eps) * gain + shift.
inline Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5) {
  const Tensor& xv = x.value();
  auto [rows, d] = detail::rows_cols(xv);
  if (gain.value().size() != d || shift.value().size() != d)
    throw DimensionError("layer_norm: gain/shift width must equal trailing axis of " + shape_str(xv.shape()));
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += in[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) xhat[r * d + c] = (in[c] - mu) * inv_std[r];
  }
  const Tensor& gv = gain.value();
  const Tensor& sv = shift.value();
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = xhat[r * d + c] * gv[c] + sv[c];
  return x.tape->record(
      std::move(out), {x, gain, shift},
      [x, gain, shift, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& gv = t.value(gain);
        if (t.needs_grad(gain)) {
          Tensor& gg = t.grad_of(gain);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gg[c] += g[r * d + c] * xhat[r * d + c];
        }
        if (t.needs_grad(shift)) {
          Tensor& gs = t.grad_of(shift);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gs[c] += g[r * d + c];
        }
        if (t.needs_grad(x)) {
          Tensor& gx = t.grad_of(x);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              double gh = g[r * d + c] * gv[c];
              s1 += gh;
              s2 += gh * xhat[r * d + c];
            }
            for (std::size_t c = 0; c < d; ++c) {
              double gh = g[r * d + c] * gv[c];
              gx[r * d + c] += inv_std[r] * (gh - inv_d * s1 - xhat[r * d + c] * inv_d * s2);
            }
          }
        }
      });
}

// ---- structural -------------------------------------------------------------

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Rows [start, start + count) of a rank-2 tensor.
inline Var slice_rows(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  detail::require_rank(xv, 2, "slice_rows");
  const std::size_t cols = xv.dim(1);
  if (start + count > xv.dim(0) || count == 0)
    throw DimensionError("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_str(xv.shape()));
  Tensor out({count, cols});
  std::copy(xv.data() + start * cols, xv.data() + (start + count) * cols, out.data());
  return x.tape->record(std::move(out), {x}, [x, start, cols](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[start * cols + i] += g[i];
  });
}

// Columns [start, start + count) of a rank-2 tensor.
inline Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  detail::require_rank(xv, 2, "slice_cols");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (start + count > cols || count == 0)
    throw DimensionError("slice_cols: range outside " + shape_str(xv.shape()));
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, start + c);
  return x.tape->record(std::move(out), {x}, [x, start, rows, cols, count](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + start + c] += g[r * count + c];
  });
}

// Stacks rank-2 tensors with equal column counts.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape* tape = parts.front().tape;
  const std::size_t cols = parts.front().value().dim(1);
  std::size_t rows = 0;
  for (const Var& p : parts) {
    detail::require_rank(p.value(), 2, "concat_rows");
    if (p.value().dim(1) != cols)
      throw DimensionError("concat_rows: ragged inputs " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    rows += p.value().dim(0);
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  bool any = false;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
    any = any || tape->needs_grad(p);
  }
  if (!any) return tape->constant(std::move(out));
  return tape->record(std::move(out), parts, [parts](Tape& t, const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t n = t.value(p).size();
      if (t.needs_grad(p)) {
        Tensor& gp = t.grad_of(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      }
      off += n;
    }
  });
}

// Side-by-side concatenation of rank-2 tensors with equal row counts.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  std::vector<Var> transposed;
  transposed.reserve(parts.size());
  for (const Var& p : parts) transposed.push_back(transpose(p));
  return transpose(concat_rows(transposed));
}

// out[i] = table[indices[i]] for a rank-2 table.
inline Var gather_rows(Var table, std::vector<std::size_t> indices) {
  const Tensor& tv = table.value();
  detail::require_rank(tv, 2, "gather_rows");
  const std::size_t cols = tv.dim(1);
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tv.dim(0))
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " outside table " +
                           shape_str(tv.shape()));
    std::copy(tv.data() + indices[i] * cols, tv.data() + (indices[i] + 1) * cols, out.data() + i * cols);
  }
  return table.tape->record(std::move(out), {table}, [table, cols, idx = std::move(indices)](Tape& t, const Tensor& g, const Tensor&) {
    Tensor& gt = t.grad_of(table);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gt[idx[i] * cols + c] += g[i * cols + c];
  });
}

// out[i][j] = dot(q[i], table[index[i][j]]) with q[M x d], table[K x d] and an
// M x N integer index matrix (row-major).
using IndexMatrix = std::shared_ptr<const std::vector<int>>;

inline Var indexed_dot(Var q, Var table, IndexMatrix index_ptr, std::size_t n_cols) {
  const std::vector<int>& index = *index_ptr;
  const Tensor& qv = q.value();
  const Tensor& tv = table.value();
  detail::require_rank(qv, 2, "indexed_dot");
  detail::require_rank(tv, 2, "indexed_dot");
  const std::size_t m = qv.dim(0), d = qv.dim(1), k = tv.dim(0);
  if (tv.dim(1) != d)
    throw DimensionError("indexed_dot: query " + shape_str(qv.shape()) + " vs table " + shape_str(tv.shape()));
  if (index.size() != m * n_cols) throw DimensionError("indexed_dot: index matrix size mismatch");
  for (int v : index)
    if (v < 0 || static_cast<std::size_t>(v) >= k)
      throw DimensionError("indexed_dot: index " + std::to_string(v) + " outside table " + shape_str(tv.shape()));
  // Each (i, j) reads a column of q * table^T.
  Tensor proj({m, k});
  detail::as_mat(proj, m, k).noalias() = detail::as_mat(qv, m, d) * detail::as_mat(tv, k, d).transpose();
  Tensor out({m, n_cols});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n_cols; ++j) out(i, j) = proj(i, static_cast<std::size_t>(index[i * n_cols + j]));
  return q.tape->record(std::move(out), {q, table}, [q, table, m, d, k, n_cols, index_ptr](Tape& t, const Tensor& g, const Tensor&) {
    const std::vector<int>& index = *index_ptr;
    Tensor folded({m, k});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n_cols; ++j) folded(i, static_cast<std::size_t>(index[i * n_cols + j])) += g(i, j);
    auto F = detail::as_mat(folded, m, k);
    if (t.needs_grad(q)) detail::as_mat(t.grad_of(q), m, d).noalias() += F * detail::as_mat(t.value(table), k, d);
    if (t.needs_grad(table))
      detail::as_mat(t.grad_of(table), k, d).noalias() += F.transpose() * detail::as_mat(t.value(q), m, d);
  });
}

// Convolution over the time axis of X[T x B x C] with a W[l x 1 x C x D]
// kernel, no padding. The part axis B is never mixed. Output [L x B x D] with
// L = floor((T - l + 1) / stride).
inline std::size_t conv_output_length(std::size_t frames, std::size_t kernel, std::size_t stride) {
  if (stride == 0) throw ConfigError("stride must be >= 1");
  if (frames < kernel)
    throw ValidationError("sequence too short: " + std::to_string(frames) + " frames < kernel " +
                          std::to_string(kernel));
  return (frames - kernel + 1) / stride;
}

inline Var conv_time_part(Var x, Var w, Var bias, std::size_t stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  detail::require_rank(xv, 3, "conv_time_part");
  detail::require_rank(wv, 4, "conv_time_part");
  const std::size_t T = xv.dim(0), B = xv.dim(1), C = xv.dim(2);
  const std::size_t l = wv.dim(0), D = wv.dim(3);
  if (wv.dim(1) != 1 || wv.dim(2) != C || bias.value().size() != D)
    throw DimensionError("conv_time_part: kernel " + shape_str(wv.shape()) + " incompatible with input " +
                         shape_str(xv.shape()));
  const std::size_t L = conv_output_length(T, l, stride);
  if (L == 0) throw ValidationError("sequence too short for stride " + std::to_string(stride));
  // Window rows (w, b) gather l*C inputs; the kernel flattens to (l*C) x D.
  const std::size_t K = l * C;
  Tensor cols({L * B, K});
  for (std::size_t win = 0; win < L; ++win)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < l; ++t)
        for (std::size_t c = 0; c < C; ++c) cols((win * B + b), t * C + c) = xv(win * stride + t, b, c);
  Tensor out({L, B, D});
  auto O = detail::as_mat(out, L * B, D);
  O.noalias() = detail::as_mat(cols, L * B, K) * detail::as_mat(wv, K, D);
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < L * B; ++r)
    for (std::size_t d = 0; d < D; ++d) out[r * D + d] += bv[d];
  return x.tape->record(
      std::move(out), {x, w, bias},
      [x, w, bias, B, C, l, D, L, K, stride, cols = std::move(cols)](Tape& t, const Tensor& g, const Tensor&) {
        auto G = detail::as_mat(g, L * B, D);
        if (t.needs_grad(w)) detail::as_mat(t.grad_of(w), K, D).noalias() += detail::as_mat(cols, L * B, K).transpose() * G;
        if (t.needs_grad(bias)) {
          Tensor& gb = t.grad_of(bias);
          for (std::size_t r = 0; r < L * B; ++r)
            for (std::size_t d = 0; d < D; ++d) gb[d] += g[r * D + d];
        }
        if (t.needs_grad(x)) {
          Tensor gcols({L * B, K});
          detail::as_mat(gcols, L * B, K).noalias() = G * detail::as_mat(t.value(w), K, D).transpose();
          Tensor& gx = t.grad_of(x);
          for (std::size_t win = 0; win < L; ++win)
            for (std::size_t b = 0; b < B; ++b)
              for (std::size_t tt = 0; tt < l; ++tt)
                for (std::size_t c = 0; c < C; ++c)
                  gx[((win * stride + tt) * B + b) * C + c] += gcols((win * B + b), tt * C + c);
        }
      });
}

}  // namespace tbif
