#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "tbiformer/ops.hpp"
#include "tbiformer/tbpm.hpp"

namespace tbif {

// ---- temporal positional and identity encodings -----------------------------

// Sinusoidal encoding of the window index, repeated for each of the B parts
// of a window and identical across persons. Returns M x d.
inline Tensor temporal_positional_encoding(const MpbpLayout& layout, std::size_t d) {
  if (d == 0 || d % 2 != 0) throw ConfigError("temporal encoding width must be even, got " + std::to_string(d));
  Tensor window_code({layout.windows, d});
  for (std::size_t w = 0; w < layout.windows; ++w)
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      window_code(w, 2 * i) = std::sin(static_cast<double>(w) * freq);
      window_code(w, 2 * i + 1) = std::cos(static_cast<double>(w) * freq);
    }
  Tensor out({layout.rows(), d});
  for (std::size_t r = 0; r < layout.rows(); ++r) {
    const std::size_t w = layout.entry(r).window;
    std::copy(window_code.data() + w * d, window_code.data() + (w + 1) * d, out.data() + r * d);
  }
  return out;
}

// Row m of the learnable identity table for every token of person m.
inline Var identity_encoding(Var table, const MpbpLayout& layout) {
  if (table.value().rank() != 2 || table.dim(0) < layout.persons)
    throw ConfigError("identity table " + shape_str(table.shape()) + " has fewer rows than " +
                      std::to_string(layout.persons) + " persons");
  std::vector<std::size_t> idx(layout.rows());
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = layout.entry(r).person;
  return gather_rows(table, std::move(idx));
}

// ---- trajectory similarity ----------------------------------------------------

inline double squared_distance(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.dim(1); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

// Dynamic time warping cost between point sequences S1[n x c] and S2[k x c]
// with squared Euclidean point cost:
//   D(i, j) = min{D(i, j-1), D(i-1, j), D(i-1, j-1)} + cost(i, j).
// For gamma > 0 the min is the soft-min -gamma * log(sum exp(-x / gamma)).
inline double soft_dtw(const Tensor& s1, const Tensor& s2, double gamma = 0.0) {
  if (s1.rank() != 2 || s2.rank() != 2 || s1.dim(1) != s2.dim(1))
    throw DimensionError("soft_dtw: sequences " + shape_str(s1.shape()) + " and " + shape_str(s2.shape()));
  if (gamma < 0.0) throw ConfigError("soft_dtw: gamma must be >= 0");
  const std::size_t n = s1.dim(0), k = s2.dim(0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(k + 1, inf), cur(k + 1, inf);
  prev[0] = 0.0;
  auto softmin = [gamma, inf](double a, double b, double c) {
    const double m = std::min({a, b, c});
    if (gamma == 0.0 || m == inf) return m;
    double s = 0.0;
    for (double x : {a, b, c})
      if (x != inf) s += std::exp(-(x - m) / gamma);
    return m - gamma * std::log(s);
  };
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= k; ++j)
      cur[j] = softmin(cur[j - 1], prev[j], prev[j - 1]) + squared_distance(s1, i - 1, s2, j - 1);
    std::swap(prev, cur);
  }
  return prev[k];
}

// Lock-step counterpart of soft_dtw: sum of point costs along the diagonal.
inline double euclidean_window_cost(const Tensor& s1, const Tensor& s2) {
  if (s1.shape() != s2.shape()) throw DimensionError("euclidean_window_cost: unequal windows");
  double s = 0.0;
  for (std::size_t i = 0; i < s1.dim(0); ++i) s += squared_distance(s1, i, s2, i);
  return s;
}

inline Tensor window_slice(const Tensor& traj, std::size_t start, std::size_t len) {
  Tensor out({len, traj.dim(1)});
  std::copy(traj.data() + start * traj.dim(1), traj.data() + (start + len) * traj.dim(1), out.data());
  return out;
}

enum class TrajectoryMetric { Dtw, Euclidean };

// Shifted local DTW: one cost per window [w*stride, w*stride + l) of two root
// trajectories of equal length T. Returns L = floor((T - l + 1) / stride) costs.
inline std::vector<double> sl_dtw(const Tensor& root_m, const Tensor& root_n, std::size_t l, std::size_t stride,
                                  double gamma = 0.0, TrajectoryMetric metric = TrajectoryMetric::Dtw) {
  if (root_m.shape() != root_n.shape())
    throw DimensionError("sl_dtw: trajectories " + shape_str(root_m.shape()) + " and " + shape_str(root_n.shape()));
  const std::size_t L = conv_output_length(root_m.dim(0), l, stride);
  std::vector<double> out(L);
  for (std::size_t w = 0; w < L; ++w) {
    Tensor a = window_slice(root_m, w * stride, l);
    Tensor b = window_slice(root_n, w * stride, l);
    out[w] = metric == TrajectoryMetric::Dtw ? soft_dtw(a, b, gamma) : euclidean_window_cost(a, b);
  }
  return out;
}

// Pairwise per-window trajectory costs, P x P x L; symmetric with zero
// diagonal.
struct TrajectorySimilarity {
  std::size_t persons = 0;
  std::size_t windows = 0;
  std::vector<double> values;

  double operator()(std::size_t m, std::size_t n, std::size_t w) const { return values[(m * persons + n) * windows + w]; }
  double& operator()(std::size_t m, std::size_t n, std::size_t w) { return values[(m * persons + n) * windows + w]; }
};

// roots: per person T x 3 root trajectory.
inline TrajectorySimilarity trajectory_similarity(const std::vector<Tensor>& roots, std::size_t l, std::size_t stride,
                                                  double gamma = 0.0, TrajectoryMetric metric = TrajectoryMetric::Dtw) {
  if (roots.empty()) throw ValidationError("trajectory_similarity: no persons");
  TrajectorySimilarity sim;
  sim.persons = roots.size();
  sim.windows = conv_output_length(roots.front().dim(0), l, stride);
  sim.values.assign(sim.persons * sim.persons * sim.windows, 0.0);
  for (std::size_t m = 0; m < sim.persons; ++m)
    for (std::size_t n = m + 1; n < sim.persons; ++n) {
      std::vector<double> d = sl_dtw(roots[m], roots[n], l, stride, gamma, metric);
      for (std::size_t w = 0; w < sim.windows; ++w) sim(m, n, w) = sim(n, m, w) = d[w];
    }
  return sim;
}

// ---- piecewise index and index matrix ----------------------------------------

struct TrpeIndexParams {
  int alpha = 1;
  int beta = 9;
  double gamma = 2000.0;
  double eta = 2000.0;
  double scale = 1.0;  // multiplies trajectory costs before indexing
};

inline long round_half_away(double x) { return std::lround(x); }

// Identity up to alpha, logarithmic growth beyond, saturating at beta; odd.
inline int g_index(double e, int alpha, int beta, double gamma) {
  if (!(alpha > 0) || !(gamma > alpha) || !(beta > alpha))
    throw ConfigError("g_index: requires gamma > alpha > 0 and beta > alpha");
  const double a = std::abs(e);
  if (a <= alpha) return static_cast<int>(round_half_away(e));
  const double sign = e > 0 ? 1.0 : -1.0;
  const double grown = alpha + std::log(a / alpha) / std::log(gamma / alpha) * (beta - alpha);
  return static_cast<int>(sign * std::min<double>(beta, static_cast<double>(round_half_away(grown))));
}

// M x M symmetric matrix of embedding indices in [0, beta].
struct TrpeIndexMatrix {
  std::size_t size = 0;
  IndexMatrix psi;

  int operator()(std::size_t i, std::size_t j) const { return (*psi)[i * size + j]; }
};

// Same person -> g(0); different persons, same window -> g(cost);
// different persons and windows -> g(eta). Part indices never matter.
inline TrpeIndexMatrix build_psi(const TrajectorySimilarity& sim, const MpbpLayout& layout, const TrpeIndexParams& p) {
  if (sim.persons != layout.persons || sim.windows != layout.windows)
    throw DimensionError("build_psi: similarity is " + std::to_string(sim.persons) + "x" + std::to_string(sim.windows) +
                         " but layout has " + std::to_string(layout.persons) + " persons, " +
                         std::to_string(layout.windows) + " windows");
  const std::size_t M = layout.rows();
  const int same = g_index(0.0, p.alpha, p.beta, p.gamma);
  const int far = g_index(p.eta, p.alpha, p.beta, p.gamma);
  // Per (m, n, window) index, computed once.
  std::vector<int> cross(sim.values.size());
  for (std::size_t i = 0; i < cross.size(); ++i)
    cross[i] = g_index(std::max(0.0, sim.values[i] * p.scale), p.alpha, p.beta, p.gamma);
  auto psi = std::make_shared<std::vector<int>>(M * M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto ei = layout.entry(i);
    for (std::size_t j = 0; j < M; ++j) {
      const auto ej = layout.entry(j);
      int v;
      if (ei.person == ej.person) v = same;
      else if (ei.window == ej.window) v = cross[(ei.person * sim.persons + ej.person) * sim.windows + ei.window];
      else v = far;
      (*psi)[i * M + j] = v;
    }
  }
  return {M, std::move(psi)};
}

// bias[i][j] = Q[i] . table[psi(i, j)].
inline Var trpe_bias(Var q, const TrpeIndexMatrix& psi, Var table) {
  if (q.dim(0) != psi.size) throw DimensionError("trpe_bias: query rows do not match index matrix");
  return indexed_dot(q, table, psi.psi, psi.size);
}

}  // namespace tbif
