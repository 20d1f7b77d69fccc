#pragma once

#include <vector>

#include "tbiformer/motion.hpp"
#include "tbiformer/ops.hpp"

namespace tbif {

// Row layout of a multi-person body-part sequence: person-major, then
// window, then part.
struct MpbpLayout {
  std::size_t persons = 0;
  std::size_t windows = 0;
  std::size_t parts = 0;

  std::size_t per_person() const { return windows * parts; }
  std::size_t rows() const { return persons * windows * parts; }
  std::size_t row(std::size_t person, std::size_t window, std::size_t part) const {
    return (person * windows + window) * parts + part;
  }

  struct Entry {
    std::size_t person, window, part;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  Entry entry(std::size_t r) const { return {r / per_person(), (r / parts) % windows, r % parts}; }

  // Person index of every row.
  std::vector<int> person_of_rows() const {
    std::vector<int> g(rows());
    for (std::size_t r = 0; r < g.size(); ++r) g[r] = static_cast<int>(r / per_person());
    return g;
  }

  friend bool operator==(const MpbpLayout&, const MpbpLayout&) = default;
};

struct MpbpSequence {
  Var features;  // M x D
  MpbpLayout layout;
  std::vector<MpbpLayout::Entry> index_map;
};

// Mean displacement of each body part per frame: Y[T x J x 3] -> [T x 5 x 3].
inline Tensor partition_pool(const Tensor& y, const Skeleton& skeleton) {
  if (y.rank() != 3 || y.dim(2) != 3 || y.dim(1) != skeleton.num_joints())
    throw DimensionError("partition_pool: input " + shape_str(y.shape()) + " does not match skeleton with " +
                         std::to_string(skeleton.num_joints()) + " joints");
  if (skeleton.part_map.size() != skeleton.num_joints())
    throw ConfigError("partition_pool: part_map does not cover all joints");
  std::vector<std::size_t> count(kNumParts, 0);
  for (int p : skeleton.part_map) {
    if (p < 0 || p >= static_cast<int>(kNumParts)) throw ConfigError("partition_pool: invalid part index");
    ++count[static_cast<std::size_t>(p)];
  }
  for (std::size_t b = 0; b < kNumParts; ++b)
    if (count[b] == 0) throw ConfigError("partition_pool: body part " + std::to_string(b) + " is empty");
  const std::size_t T = y.dim(0), J = y.dim(1);
  Tensor out({T, kNumParts, 3});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < J; ++j) {
      const auto b = static_cast<std::size_t>(skeleton.part_map[j]);
      for (std::size_t c = 0; c < 3; ++c) out(t, b, c) += y(t, j, c);
    }
    for (std::size_t b = 0; b < kNumParts; ++b)
      for (std::size_t c = 0; c < 3; ++c) out(t, b, c) /= static_cast<double>(count[b]);
  }
  return out;
}

// Temporal projection of one person's pooled sequence to L x B x D.
inline Var project(Var pooled, Var kernel, Var bias, std::size_t stride) {
  return conv_time_part(pooled, kernel, bias, stride);
}

// Concatenates per-person L x B x D features into the M x D token stream.
inline MpbpSequence concat_mpbp(const std::vector<Var>& projected) {
  if (projected.empty()) throw DimensionError("concat_mpbp: no persons");
  const Shape& s0 = projected.front().shape();
  if (s0.size() != 3) throw DimensionError("concat_mpbp: expected L x B x D, got " + shape_str(s0));
  std::vector<Var> rows;
  for (const Var& v : projected) {
    if (v.shape() != s0)
      throw DimensionError("concat_mpbp: ragged inputs " + shape_str(s0) + " vs " + shape_str(v.shape()));
    rows.push_back(reshape(v, {s0[0] * s0[1], s0[2]}));
  }
  MpbpSequence seq;
  seq.layout = {projected.size(), s0[0], s0[1]};
  seq.features = concat_rows(rows);
  seq.index_map.reserve(seq.layout.rows());
  for (std::size_t r = 0; r < seq.layout.rows(); ++r) seq.index_map.push_back(seq.layout.entry(r));
  return seq;
}

}  // namespace tbif
