#pragma once

#include <functional>
#include <ostream>
#include <set>

#include "optimizer.hpp"
#include "reward.hpp"

namespace ptagrpo {

enum class TokenNorm { per_response_mean, raw_sum };

inline TokenNorm token_norm_from_string(const std::string& s) {
  if (s == "per_response_mean") return TokenNorm::per_response_mean;
  if (s == "raw_sum") return TokenNorm::raw_sum;
  throw ConfigError("unknown token_norm '" + s + "'");
}

inline std::string to_string(TokenNorm n) {
  return n == TokenNorm::per_response_mean ? "per_response_mean" : "raw_sum";
}

struct RlConfig {
  double clip_eps = 0.2;
  double kl_coeff = 0.0;
  OptimizerConfig optimizer{OptimizerKind::adam, 0.1};
  int steps = 200;
  int groups_per_step = 128;
  TokenNorm token_norm = TokenNorm::per_response_mean;
  bool include_plan_tokens = true;
  int inner_updates = 1;  // surrogate ascents per rollout batch, old policy fixed
  int m = 3;
  int z = 3;
  RolloutLimits limits;
  SamplingParams rollout{1.0, 1.0};
  int checkpoint_every = 0;

  void validate() const {
    if (!(clip_eps > 0 && clip_eps < 1)) throw ConfigError("rl.clip_eps must lie in (0, 1)");
    if (!(kl_coeff >= 0)) throw ConfigError("rl.kl_coeff must be nonnegative");
    if (!(optimizer.learning_rate > 0)) throw ConfigError("rl.learning_rate must be positive");
    if (steps < 0) throw ConfigError("rl.steps must be nonnegative");
    if (groups_per_step < 1 || inner_updates < 1 || m < 1 || z < 1)
      throw ConfigError("rl counts must be positive");
    if (limits.max_plan_len < 1 || limits.max_len < 1) throw ConfigError("rollout limits must be positive");
    if (rollout.top_p != 1.0) throw ConfigError("training rollouts require top_p = 1");
  }
};

// ---------------------------------------------------------------------------
// Advantages

struct AdvantageSet {
  std::vector<double> values;
  double mean = 0;
  double std = 0;
};

// (r - mean) / std over the whole group with the population std; a group with
// no spread gets all-zero advantages.
inline AdvantageSet advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw Error("advantages need at least one reward");
  AdvantageSet a;
  const double n = static_cast<double>(rewards.size());
  double s = 0, mx = 0;
  for (double r : rewards) {
    s += r;
    mx = std::max(mx, std::abs(r));
  }
  a.mean = s / n;
  double ss = 0;
  for (double r : rewards) ss += (r - a.mean) * (r - a.mean);
  a.std = std::sqrt(ss / n);
  a.values.assign(rewards.size(), 0.0);
  const bool flat = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (flat || a.std <= 1e-12 * mx) {
    a.std = 0;
    return a;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) a.values[i] = (rewards[i] - a.mean) / a.std;
  return a;
}

inline AdvantageSet advantages(std::span<const RewardBreakdown> breakdowns) {
  std::vector<double> totals;
  totals.reserve(breakdowns.size());
  for (const auto& b : breakdowns) totals.push_back(b.total);
  return advantages(totals);
}

// ---------------------------------------------------------------------------
// Surrogate pieces

inline double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

inline double clipped_term(double ratio, double advantage, double eps) {
  if (!(ratio > 0)) throw Error("probability ratio must be positive");
  return std::min(ratio * advantage, clip(ratio, 1 - eps, 1 + eps) * advantage);
}

// True when the min picks the clipped branch strictly, which zeroes the gradient.
inline bool clip_active(double ratio, double advantage, double eps) {
  return clip(ratio, 1 - eps, 1 + eps) * advantage < ratio * advantage;
}

// rho - log rho - 1 with log rho = log_ref - log_theta.
inline double kl_token(double log_theta, double log_ref) {
  const double x = log_ref - log_theta;
  return std::max(0.0, std::expm1(x) - x);
}

// A response as the optimizer sees it: the visited contexts, the realized
// tokens, their log-probabilities under the sampling snapshot, and the
// response-level advantage.
struct Trajectory {
  std::vector<ContextKey> contexts;
  TokenSeq tokens;
  std::vector<double> old_log_probs;
  double advantage = 0;

  std::size_t size() const { return tokens.size(); }
};

inline double kl_penalty(const PolicyTable& policy, const PolicyTable& reference,
                         const Trajectory& tr, const SamplingParams& sp = {}) {
  if (tr.size() == 0) return 0.0;
  double s = 0;
  for (std::size_t t = 0; t < tr.size(); ++t)
    s += kl_token(log_prob(policy, tr.contexts[t], tr.tokens[t], sp),
                  log_prob(reference, tr.contexts[t], tr.tokens[t], sp));
  return s / static_cast<double>(tr.size());
}

// Convenience form over a raw token sequence (contexts from prefix replay).
inline double kl_penalty(const PolicyTable& policy, const PolicyTable& reference,
                         std::span<const Token> prefix, std::span<const Token> sequence) {
  Trajectory tr;
  TokenSeq ctx(prefix.begin(), prefix.end());
  for (Token t : sequence) {
    tr.contexts.push_back(policy.key(ctx));
    tr.tokens.push_back(t);
    ctx.push_back(t);
  }
  return kl_penalty(policy, reference, tr, {policy.temperature(), 1.0});
}

inline std::vector<Trajectory> trajectories_from_group(const RolloutGroup& g,
                                                       const AdvantageSet& adv,
                                                       bool include_plan_tokens) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.m; ++i)
    for (int k = 0; k < g.z; ++k) {
      Trajectory tr;
      if (include_plan_tokens) {
        const auto& p = g.plans[static_cast<std::size_t>(i)];
        tr.contexts = p.contexts;
        tr.tokens = p.sampled;
        tr.old_log_probs = p.log_probs;
      }
      const auto& c = g.at(i, k);
      tr.contexts.insert(tr.contexts.end(), c.contexts.begin(), c.contexts.end());
      tr.tokens.insert(tr.tokens.end(), c.sampled.begin(), c.sampled.end());
      tr.old_log_probs.insert(tr.old_log_probs.end(), c.log_probs.begin(), c.log_probs.end());
      tr.advantage = adv.values[static_cast<std::size_t>(i * g.z + k)];
      out.push_back(std::move(tr));
    }
  return out;
}

struct SurrogateEval {
  double objective = 0;
  SparseGrad gradient;
  double clip_fraction = 0;
  double mean_kl = 0;
  long long tokens = 0;
};

// J = mean over responses of [ norm(sum_t min(r_t A, clip(r_t) A)) - kl_coeff * mean_t k3_t ]
// together with dJ/dlogits.
inline SurrogateEval surrogate(const PolicyTable& policy, const PolicyTable* reference,
                               std::span<const Trajectory> trajectories, double clip_eps,
                               double kl_coeff, TokenNorm norm, const SamplingParams& sp) {
  SurrogateEval ev;
  if (trajectories.empty()) return ev;
  const double inv_n = 1.0 / static_cast<double>(trajectories.size());
  long long clipped = 0;
  double kl_sum = 0;
  for (const auto& tr : trajectories) {
    const std::size_t len = tr.size();
    if (len == 0) continue;
    const double scale = norm == TokenNorm::per_response_mean ? 1.0 / static_cast<double>(len) : 1.0;
    const double inv_len = 1.0 / static_cast<double>(len);
    double surr = 0, kl = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const auto row = policy.row(tr.contexts[t]);
      const double lp = row_log_prob(row, tr.tokens[t], sp);
      const double ratio = std::exp(lp - tr.old_log_probs[t]);
      surr += clipped_term(ratio, tr.advantage, clip_eps);
      double coeff = 0;
      if (clip_active(ratio, tr.advantage, clip_eps)) ++clipped;
      else coeff += inv_n * scale * tr.advantage * ratio;
      if (reference && kl_coeff > 0) {
        const double lr = log_prob(*reference, tr.contexts[t], tr.tokens[t], sp);
        kl += kl_token(lp, lr);
        coeff -= inv_n * kl_coeff * inv_len * (1.0 - std::exp(lr - lp));
      } else if (reference) {
        kl += kl_token(lp, log_prob(*reference, tr.contexts[t], tr.tokens[t], sp));
      }
      if (coeff != 0) {
        const auto g = row_grad_log_prob(row, tr.tokens[t], sp.temperature);
        auto& d = ev.gradient[tr.contexts[t]];
        if (d.empty()) d.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += coeff * g[i];
      }
    }
    ev.objective += inv_n * (scale * surr - kl_coeff * inv_len * kl);
    kl_sum += inv_len * kl;
    ev.tokens += static_cast<long long>(len);
  }
  ev.clip_fraction = ev.tokens ? static_cast<double>(clipped) / static_cast<double>(ev.tokens) : 0.0;
  ev.mean_kl = kl_sum * inv_n;
  return ev;
}

struct StepStats {
  double objective = 0;
  double clip_fraction = 0;
  double mean_kl = 0;
};

// One optimization step on a rollout batch: `inner_updates` ascents of the
// clipped surrogate with the old-policy log-probs held fixed.
inline StepStats policy_gradient_step(PolicyTable& policy, Optimizer& opt,
                                      std::span<const Trajectory> trajectories,
                                      const RlConfig& cfg, const PolicyTable* reference) {
  StepStats st;
  for (int u = 0; u < cfg.inner_updates; ++u) {
    auto ev = surrogate(policy, reference, trajectories, cfg.clip_eps, cfg.kl_coeff, cfg.token_norm,
                        cfg.rollout);
    for (const auto& [k, r] : ev.gradient)
      for (double x : r)
        if (!std::isfinite(x))
          throw Error("policy_gradient_step: non-finite gradient at context " + hex64(k) +
                      " (inner update " + std::to_string(u) + ")");
    if (u == 0) {
      st.objective = ev.objective;
      st.mean_kl = ev.mean_kl;
    }
    st.clip_fraction += ev.clip_fraction / cfg.inner_updates;
    opt.ascend(policy, ev.gradient);
  }
  if (!policy.all_finite()) throw Error("policy_gradient_step: parameters became non-finite");
  return st;
}

// Group-level form: advantages are already computed per group.
inline StepStats policy_gradient_step(PolicyTable& policy, Optimizer& opt,
                                      std::span<const RolloutGroup> groups,
                                      std::span<const AdvantageSet> advs, const RlConfig& cfg,
                                      const PolicyTable* reference) {
  if (groups.size() != advs.size()) throw Error("one advantage set per group required");
  std::vector<Trajectory> all;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto t = trajectories_from_group(groups[g], advs[g], cfg.include_plan_tokens);
    all.insert(all.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return policy_gradient_step(policy, opt, all, cfg, reference);
}

// ---------------------------------------------------------------------------
// Training loop

// Deterministic task source; optionally skips questions in an exclusion set.
class TaskStream {
 public:
  TaskStream(std::uint64_t seed, DifficultyMix mix, int modulus = 10,
             const std::set<TokenSeq>* exclude = nullptr)
      : seed_(seed), mix_(std::move(mix)), modulus_(modulus), exclude_(exclude) {
    check_mix(mix_);
  }

  Task next() {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Rng rng = Rng::derive(seed_, 0x57EA, counter_++);
      const int d = sample_difficulty(mix_, rng);
      Task t = generate_task(rng.next(), d, modulus_);
      if (!exclude_ || !exclude_->contains(t.question)) return t;
    }
    throw Error("task stream: exclusion set covers the whole task space");
  }

 private:
  std::uint64_t seed_;
  DifficultyMix mix_;
  int modulus_;
  const std::set<TokenSeq>* exclude_;
  std::uint64_t counter_ = 0;
};

struct MetricsRow {
  int step = 0;
  double mean_total_reward = 0;
  double mean_outcome = 0;
  double mean_analytic = 0;
  double mean_length = 0;
  double policy_entropy = 0;
  double clip_fraction = 0;
  double mean_kl = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,mean_total_reward,mean_outcome,mean_analytic,mean_length,policy_entropy,clip_fraction,mean_kl";

inline void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step,
                r.mean_total_reward, r.mean_outcome, r.mean_analytic, r.mean_length, r.policy_entropy,
                r.clip_fraction, r.mean_kl);
  os << buf << '\n';
}

inline void write_metrics_csv(std::ostream& os, std::span<const MetricsRow> rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) write_metrics_row(os, r);
}

struct RlResult {
  std::vector<MetricsRow> metrics;
};

struct RlHooks {
  // Called after each step's update with the 1-based step index.
  std::function<void(int, const PolicyTable&)> after_step;
  // Called with every scored group (for trace streaming).
  std::function<void(int, int, const RolloutGroup&, std::span<const RewardBreakdown>)> on_group;
};

inline RlResult rl_train(PolicyTable& policy, TaskStream& tasks, const RewardConfig& reward_cfg,
                         const RlConfig& cfg, std::uint64_t seed, const RlHooks& hooks = {}) {
  cfg.validate();
  reward_cfg.validate();
  const auto reference = PolicySnapshot::take(policy, SnapshotRole::reference);
  Optimizer opt(cfg.optimizer);
  RlResult res;
  for (int step = 1; step <= cfg.steps; ++step) {
    const auto old = PolicySnapshot::take(policy, SnapshotRole::old_policy);
    std::vector<RolloutGroup> groups;
    std::vector<AdvantageSet> advs;
    MetricsRow row;
    row.step = step;
    double entropy_sum = 0;
    long long entropy_n = 0, responses = 0;
    for (int gi = 0; gi < cfg.groups_per_step; ++gi) {
      Rng rng = Rng::derive(seed, 0x6B0, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(gi));
      auto group = build_group(*old, tasks.next(), cfg.m, cfg.z, cfg.limits, rng, cfg.rollout);
      const auto rewards = total_reward(group, reward_cfg);
      for (int i = 0; i < group.m; ++i)
        for (int k = 0; k < group.z; ++k) {
          const auto& b = rewards[static_cast<std::size_t>(i * group.z + k)];
          row.mean_total_reward += b.total;
          row.mean_outcome += b.outcome;
          row.mean_analytic += b.analytic;
          row.mean_length += group.at(i, k).length();
          ++responses;
        }
      for (const auto& p : group.plans)
        for (ContextKey k : p.contexts) {
          entropy_sum += row_entropy(*old, k, cfg.rollout.temperature);
          ++entropy_n;
        }
      for (const auto& c : group.continuations)
        for (ContextKey k : c.contexts) {
          entropy_sum += row_entropy(*old, k, cfg.rollout.temperature);
          ++entropy_n;
        }
      if (hooks.on_group) hooks.on_group(step, gi, group, rewards);
      advs.push_back(advantages(rewards));
      groups.push_back(std::move(group));
    }
    const auto st = policy_gradient_step(policy, opt, groups, advs, cfg, reference.table.get());
    const double inv = 1.0 / static_cast<double>(responses);
    row.mean_total_reward *= inv;
    row.mean_outcome *= inv;
    row.mean_analytic *= inv;
    row.mean_length *= inv;
    row.policy_entropy = entropy_n ? entropy_sum / static_cast<double>(entropy_n) : 0.0;
    row.clip_fraction = st.clip_fraction;
    row.mean_kl = st.mean_kl;
    res.metrics.push_back(row);
    if (hooks.after_step) hooks.after_step(step, policy);
  }
  return res;
}

}  // namespace ptagrpo
