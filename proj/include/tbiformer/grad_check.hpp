#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "tbiformer/tape.hpp"

namespace tbif {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  // Coordinate with the largest relative error.
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

namespace detail {

inline double eval_scalar(Tape& tape, Var out) {
  const Tensor& v = tape.value(out);
  if (v.size() != 1) throw DimensionError("grad_check: function must return a scalar, got " + shape_str(v.shape()));
  if (!std::isfinite(v[0])) throw EvaluationError("grad_check: function value is not finite");
  return v[0];
}

inline void compare(GradCheckReport& rep, double analytic, double numeric) {
  const double abs_err = std::abs(analytic - numeric);
  const double rel_err = abs_err / std::max(std::abs(analytic), 1e-8);
  rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
  if (rel_err > rep.max_rel_error || rep.coordinates == 0) {
    rep.max_rel_error = rel_err;
    rep.worst_analytic = analytic;
    rep.worst_numeric = numeric;
  }
  ++rep.coordinates;
}

}  // namespace detail

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares tape gradients of f with respect to every input coordinate against
// central differences (f(x + d) - f(x - d)) / 2d. Relative error uses
// max(|analytic|, 1e-8) as denominator.
inline GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> inputs, double delta = 1e-5) {
  auto run = [&](Tape& tape, std::vector<Var>& vars) {
    vars.clear();
    for (const Tensor& x : inputs) {
      Tensor copy = x;
      copy.set_requires_grad(true);
      vars.push_back(tape.leaf(std::move(copy)));
    }
    return f(tape, vars);
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    Var out = run(tape, vars);
    detail::eval_scalar(tape, out);
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckReport rep;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      const double x0 = inputs[a][i];
      double fp, fm;
      {
        inputs[a][i] = x0 + delta;
        Tape tape;
        std::vector<Var> vars;
        fp = detail::eval_scalar(tape, run(tape, vars));
      }
      {
        inputs[a][i] = x0 - delta;
        Tape tape;
        std::vector<Var> vars;
        fm = detail::eval_scalar(tape, run(tape, vars));
      }
      inputs[a][i] = x0;
      detail::compare(rep, analytic[a][i], (fp - fm) / (2.0 * delta));
    }
  }
  return rep;
}

// Same check over every coordinate of every parameter in `params`. f must bind
// parameters through Tape::param so their gradients land in Param::grad.
// Parameter values and gradients are restored on return.
inline GradCheckReport grad_check_params(const std::function<Var(Tape&)>& f, ParamSet& params,
                                         double delta = 1e-5) {
  std::vector<Tensor> saved;
  for (auto& p : params) {
    saved.push_back(p->grad);
    p->zero_grad();
  }
  {
    Tape tape;
    Var out = f(tape);
    detail::eval_scalar(tape, out);
    tape.backward(out);
  }
  std::vector<Tensor> analytic;
  for (auto& p : params) analytic.push_back(p->grad);

  auto value_at = [&]() {
    Tape tape;
    return detail::eval_scalar(tape, f(tape));
  };

  GradCheckReport rep;
  std::size_t k = 0;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double x0 = p->value[i];
      p->value[i] = x0 + delta;
      const double fp = value_at();
      p->value[i] = x0 - delta;
      const double fm = value_at();
      p->value[i] = x0;
      detail::compare(rep, analytic[k][i], (fp - fm) / (2.0 * delta));
    }
    ++k;
  }
  k = 0;
  for (auto& p : params) p->grad = saved[k++];
  return rep;
}

}  // namespace tbif
