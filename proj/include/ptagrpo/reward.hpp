#pragma once

#include <optional>

#include "rollout.hpp"

namespace ptagrpo {

struct RewardConfig {
  double alpha = 0.2;            // length-reward scale
  double outcome_weight = 1.0;   // weight on the outcome indicator
  double structure_bonus = 0.2;  // reward for a template-conforming response
  int t_max = 75;                // exceeds the longest possible response (8 + 64 + 2 tags)
  bool softmax_enabled = true;   // softmax over plan accuracies; raw accuracies otherwise
  bool disable_analytic = false;
  bool disable_format = false;   // zeroes structure and length terms

  void validate() const {
    if (!(alpha >= 0)) throw ConfigError("reward.alpha must be nonnegative");
    if (!(outcome_weight >= 0)) throw ConfigError("reward.outcome_weight must be nonnegative");
    if (t_max < 1) throw ConfigError("reward.t_max must be positive");
  }
};

struct RewardBreakdown {
  double analytic = 0;
  double outcome = 0;
  double structure = 0;
  double length = 0;
  double total = 0;
};

inline nlohmann::json breakdown_json(const RewardBreakdown& b) {
  return {{"analytic", b.analytic},
          {"outcome", b.outcome},
          {"structure", b.structure},
          {"length", b.length},
          {"total", b.total}};
}

// Fraction of each plan's z continuations that verify.
inline std::vector<double> plan_accuracies(const RolloutGroup& g) {
  std::vector<double> acc(static_cast<std::size_t>(g.m), 0.0);
  for (int i = 0; i < g.m; ++i) {
    int correct = 0;
    for (int k = 0; k < g.z; ++k) correct += verify(g.task, g.at(i, k).response) ? 1 : 0;
    acc[static_cast<std::size_t>(i)] = static_cast<double>(correct) / g.z;
  }
  return acc;
}

// Softmax across the group's plans of their accuracies.
inline std::vector<double> analytic_reward(std::span<const double> accuracies) {
  if (accuracies.empty()) throw Error("analytic_reward needs at least one plan");
  return softmax(accuracies, 1.0);
}

inline double outcome_reward(const Task& task, const TaggedResponse& r) {
  return verify(task, r) ? 1.0 : 0.0;
}

inline double structure_reward(const TaggedResponse& r, double bonus = 0.2) {
  return r.well_formed ? bonus : 0.0;
}

// Shortest tagged length among correct responses; none when nothing verifies.
inline std::optional<int> reference_length(const RolloutGroup& g) {
  std::optional<int> best;
  for (int i = 0; i < g.m; ++i)
    for (int k = 0; k < g.z; ++k) {
      const auto& c = g.at(i, k);
      if (verify(g.task, c.response) && (!best || c.length() < *best)) best = c.length();
    }
  return best;
}

inline double length_reward(int length, std::optional<int> reference, const RewardConfig& cfg) {
  if (!reference) return 0.0;
  if (cfg.t_max <= *reference)
    throw ConfigError("t_max (" + std::to_string(cfg.t_max) + ") must exceed the reference length (" +
                      std::to_string(*reference) + ")");
  const double gap = std::abs(static_cast<double>(length - *reference));
  return cfg.alpha * std::exp(-gap / static_cast<double>(cfg.t_max - *reference));
}

// Breakdown for every response, stored at i * z + k.
inline std::vector<RewardBreakdown> total_reward(const RolloutGroup& g, const RewardConfig& cfg) {
  cfg.validate();
  const auto acc = plan_accuracies(g);
  const auto analytic = cfg.softmax_enabled ? analytic_reward(acc) : acc;
  const auto ref = reference_length(g);
  std::vector<RewardBreakdown> out;
  out.reserve(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.m; ++i)
    for (int k = 0; k < g.z; ++k) {
      const auto& c = g.at(i, k);
      RewardBreakdown b;
      b.analytic = cfg.disable_analytic ? 0.0 : analytic[static_cast<std::size_t>(i)];
      b.outcome = outcome_reward(g.task, c.response);
      if (!cfg.disable_format) {
        b.structure = structure_reward(c.response, cfg.structure_bonus);
        b.length = length_reward(c.length(), ref, cfg);
      }
      b.total = b.analytic + cfg.outcome_weight * b.outcome + b.structure + b.length;
      out.push_back(b);
    }
  return out;
}

}  // namespace ptagrpo
