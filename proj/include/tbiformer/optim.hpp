#pragma once

#include <cmath>
#include <map>
#include <string>

#include "tbiformer/tape.hpp"

namespace tbif {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Single Adam update at explicit step index t >= 1 with caller-owned moments.
inline void adam_step(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v, const AdamConfig& cfg, long t) {
  if (t < 1) throw ConfigError("adam step index must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    value[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
  }
}

// Adam with bias-corrected moments. Moment buffers are keyed by parameter
// name; gradients are left untouched (the caller zeroes them).
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  void step(ParamSet& params) {
    ++t_;
    for (auto& p : params) {
      auto [it, fresh] = moments_.try_emplace(p->name);
      Moments& mo = it->second;
      if (fresh) {
        mo.m = Tensor::zeros_like(p->value);
        mo.v = Tensor::zeros_like(p->value);
      }
      adam_step(p->value, p->grad, mo.m, mo.v, cfg_, t_);
    }
  }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace tbif
