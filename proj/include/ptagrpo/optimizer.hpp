#pragma once

#include <cmath>
#include <string>

#include "policy.hpp"

namespace ptagrpo {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;  // decoupled; touches only rows present in the update
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Applies ascent directions to a policy. Adam is lazy: moment estimates and
// updates exist only for rows that have appeared in some direction.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg.learning_rate >= 0)) throw ConfigError("learning rate must be nonnegative");
    if (cfg.momentum < 0 || cfg.momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
    if (cfg.weight_decay < 0) throw ConfigError("weight decay must be nonnegative");
  }

  const OptimizerConfig& config() const { return cfg_; }

  // Moves the policy along +direction (ascent).
  void ascend(PolicyTable& policy, const SparseGrad& direction) {
    ++steps_;
    for (const auto& [key, g] : direction) {
      auto& row = policy.row_mut(key);
      if (cfg_.weight_decay > 0)
        for (double& w : row) w -= cfg_.learning_rate * cfg_.weight_decay * w;
      if (cfg_.kind == OptimizerKind::sgd) {
        if (cfg_.momentum == 0) {
          for (std::size_t i = 0; i < g.size(); ++i) row[i] += cfg_.learning_rate * g[i];
          continue;
        }
        auto& v = state(first_, key, g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          v[i] = cfg_.momentum * v[i] + g[i];
          row[i] += cfg_.learning_rate * v[i];
        }
      } else {
        auto& m = state(first_, key, g.size());
        auto& s = state(second_, key, g.size());
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
        for (std::size_t i = 0; i < g.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g[i];
          s[i] = cfg_.beta2 * s[i] + (1 - cfg_.beta2) * g[i] * g[i];
          row[i] += cfg_.learning_rate * (m[i] / c1) / (std::sqrt(s[i] / c2) + cfg_.adam_eps);
        }
      }
    }
    // Momentum keeps moving rows that are absent from this step's direction.
    if (cfg_.kind == OptimizerKind::sgd && cfg_.momentum > 0) {
      for (auto& [key, v] : first_) {
        if (direction.contains(key)) continue;
        auto& row = policy.row_mut(key);
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] *= cfg_.momentum;
          row[i] += cfg_.learning_rate * v[i];
        }
      }
    }
  }

  void descend(PolicyTable& policy, const SparseGrad& gradient) {
    SparseGrad neg = gradient;
    for (auto& [k, r] : neg)
      for (double& x : r) x = -x;
    ascend(policy, neg);
  }

 private:
  static std::vector<double>& state(SparseGrad& s, ContextKey key, std::size_t n) {
    auto& v = s[key];
    if (v.empty()) v.assign(n, 0.0);
    return v;
  }

  OptimizerConfig cfg_;
  long long steps_ = 0;
  SparseGrad first_;
  SparseGrad second_;
};

}  // namespace ptagrpo
