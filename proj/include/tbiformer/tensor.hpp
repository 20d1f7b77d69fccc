#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tbiformer/error.hpp"

namespace tbif {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_, 0.0); }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
  }

  template <class Rng>
  static Tensor normal(Shape shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data_) v = dist(rng);
    return t;
  }

  template <class Rng>
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data_) v = dist(rng);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() & { return data_; }
  std::span<const double> values() const& { return data_; }
  // Temporaries hand their storage over.
  std::vector<double> values() && { return std::move(data_); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on = true) {
    requires_grad_ = on;
    return *this;
  }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  void require_same_shape(const Tensor& other, const char* what) const {
    if (shape_ != other.shape_)
      throw DimensionError(std::string(what) + ": shape " + shape_str(shape_) + " vs " +
                           shape_str(other.shape_));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    for (std::size_t d : shape_)
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace tbif
