#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tbiformer/tensor.hpp"

namespace tbif {

// A learnable array together with its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

// Ordered, name-unique collection of parameters. Insertion order is the
// serialization order.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& other) { *this = other; }
  ParamSet& operator=(const ParamSet& other) {
    if (this == &other) return *this;
    params_.clear();
    index_.clear();
    for (const auto& p : other.params_) add(p->name, p->value).grad = p->grad;
    return *this;
  }
  ParamSet(ParamSet&&) noexcept = default;
  ParamSet& operator=(ParamSet&&) noexcept = default;

  Param& add(const std::string& name, Tensor value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    params_.push_back(std::make_unique<Param>(name, std::move(value)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return *params_[it->second];
  }
  const Param& at(const std::string& name) const { return const_cast<ParamSet*>(this)->at(name); }

  Param* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Param* find(const std::string& name) const { return const_cast<ParamSet*>(this)->find(name); }

  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
};

// Linear record of differentiable operations. Values live until the tape is
// destroyed; backward() walks the record in reverse.
class Tape {
 public:
  // Called during backward with the gradient and value of the node's output.
  // Adds the contributions for each input through grad_of().
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that participates in differentiation only if t.requires_grad().
  Var leaf(Tensor t) {
    bool g = t.requires_grad();
    return push(std::move(t), g, nullptr, {});
  }

  Var constant(Tensor t) { return push(std::move(t), false, nullptr, {}); }

  // Leaf whose gradient is added into p.grad by backward().
  Var param(Param& p) { return push(p.value, true, &p, {}); }

  // Records the result of an operation. needs_grad is derived from inputs.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool g = false;
    for (const Var& v : inputs) g = g || needs_grad(v);
    return push(std::move(value), g, nullptr, g ? std::move(fn) : BackwardFn{});
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Mutable gradient buffer of v, zero-allocated on first use.
  Tensor& grad_of(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
    return n.grad;
  }

  // Gradient of the last backward() target with respect to v (zeros if v did
  // not influence it).
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
  }

  // Reverse sweep from a scalar root. Node gradients are recomputed from
  // scratch; parameter gradients are accumulated, never overwritten.
  void backward(Var root) {
    if (value(root).size() != 1)
      throw DimensionError("backward root must be scalar, got " + shape_str(value(root).shape()));
    for (Node& n : nodes_) n.grad = Tensor();
    grad_of(root)[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad, n.value);
      if (n.param) n.param->grad += n.grad;
      if (i != root.id && !n.param && n.backward) n.grad = Tensor();
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Param* param = nullptr;
    BackwardFn backward;
  };

  Var push(Tensor value, bool needs, Param* p, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Tensor(), needs, p, std::move(fn)});
    return Var{this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace tbif
