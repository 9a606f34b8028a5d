#pragma once

#include "policy.hpp"

namespace ptagrpo {

struct RolloutLimits {
  int max_plan_len = 8;
  int max_len = 64;
};

struct PlanSample {
  TokenSeq span;      // plan tokens between the plan tags
  TokenSeq sampled;   // tokens actually drawn (span plus </plan> when emitted)
  std::vector<double> log_probs;
  std::vector<ContextKey> contexts;
  bool closed = false;
};

struct Continuation {
  TaggedResponse response;  // full tagged response: plan part plus continuation
  TokenSeq sampled;         // tokens drawn after </plan>, including <eos> when emitted
  std::vector<double> log_probs;
  std::vector<ContextKey> contexts;
  bool stopped = false;

  // Tagged length |t ++ c| used by the length reward.
  int length() const { return static_cast<int>(response.raw.size()); }
};

// m plans, each with z continuations stored at index i * z + k.
struct RolloutGroup {
  Task task;
  int m = 0;
  int z = 0;
  std::vector<PlanSample> plans;
  std::vector<Continuation> continuations;

  const Continuation& at(int i, int k) const {
    return continuations[static_cast<std::size_t>(i * z + k)];
  }
  int size() const { return m * z; }
};

inline TokenSeq plan_prefix(const Task& task) {
  TokenSeq p = task.question;
  p.push_back(tok::plan_open);
  return p;
}

inline TokenSeq continuation_prefix(const Task& task, std::span<const Token> plan) {
  TokenSeq p = plan_prefix(task);
  p.insert(p.end(), plan.begin(), plan.end());
  p.push_back(tok::plan_close);
  return p;
}

inline PlanSample sample_plan(const PolicyTable& policy, const Task& task, int max_plan_len,
                              Rng& rng, const SamplingParams& sp) {
  const auto prefix = plan_prefix(task);
  auto s = sample_sequence(policy, prefix, {tok::plan_close}, max_plan_len, rng, sp);
  PlanSample p;
  p.closed = s.stopped;
  p.sampled = std::move(s.tokens);
  p.log_probs = std::move(s.log_probs);
  p.contexts = std::move(s.contexts);
  p.span.assign(p.sampled.begin(), p.sampled.end() - (p.closed ? 1 : 0));
  return p;
}

inline std::vector<PlanSample> sample_plans(const PolicyTable& policy, const Task& task, int m,
                                            int max_plan_len, Rng& rng,
                                            const SamplingParams& sp = {}) {
  if (m < 1) throw ConfigError("m must be at least 1");
  std::vector<PlanSample> out;
  for (int i = 0; i < m; ++i) out.push_back(sample_plan(policy, task, max_plan_len, rng, sp));
  return out;
}

inline Continuation sample_continuation(const PolicyTable& policy, const Task& task,
                                        std::span<const Token> plan, int max_len, Rng& rng,
                                        const SamplingParams& sp) {
  const auto prefix = continuation_prefix(task, plan);
  auto s = sample_sequence(policy, prefix, {tok::eos}, max_len, rng, sp);
  Continuation c;
  c.stopped = s.stopped;
  TokenSeq raw(prefix.begin() + static_cast<std::ptrdiff_t>(task.question.size()), prefix.end());
  raw.insert(raw.end(), s.tokens.begin(), s.tokens.end() - (s.stopped ? 1 : 0));
  c.response = parse_tagged(raw);
  c.sampled = std::move(s.tokens);
  c.log_probs = std::move(s.log_probs);
  c.contexts = std::move(s.contexts);
  return c;
}

inline std::vector<Continuation> sample_continuations(const PolicyTable& policy, const Task& task,
                                                      std::span<const Token> plan, int z,
                                                      int max_len, Rng& rng,
                                                      const SamplingParams& sp = {}) {
  if (z < 1) throw ConfigError("z must be at least 1");
  std::vector<Continuation> out;
  for (int k = 0; k < z; ++k) out.push_back(sample_continuation(policy, task, plan, max_len, rng, sp));
  return out;
}

// Each plan and each continuation draws from its own stream derived from one
// value of `rng`, so the (i, k) samples are independent of scheduling order.
inline RolloutGroup build_group(const PolicyTable& policy, const Task& task, int m, int z,
                                const RolloutLimits& limits, Rng& rng,
                                const SamplingParams& sp = {}) {
  if (m < 1 || z < 1) throw ConfigError("m and z must be at least 1");
  RolloutGroup g;
  g.task = task;
  g.m = m;
  g.z = z;
  const std::uint64_t base = rng.next();
  for (int i = 0; i < m; ++i) {
    Rng r = Rng::derive(base, 1, static_cast<std::uint64_t>(i));
    g.plans.push_back(sample_plan(policy, task, limits.max_plan_len, r, sp));
  }
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < z; ++k) {
      Rng r = Rng::derive(base, 2, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
      g.continuations.push_back(
          sample_continuation(policy, task, g.plans[static_cast<std::size_t>(i)].span, limits.max_len, r, sp));
    }
  return g;
}

inline nlohmann::json continuation_json(const RolloutGroup& g, int question_id, int i, int k) {
  const auto& plan = g.plans[static_cast<std::size_t>(i)];
  const auto& c = g.at(i, k);
  nlohmann::json answer = nullptr;
  if (c.response.prediction) answer = *c.response.prediction;
  return {{"question_id", question_id},
          {"plan_index", i},
          {"continuation_index", k},
          {"question", g.task.question},
          {"truth", g.task.truth},
          {"difficulty", g.task.difficulty},
          {"tokens", c.response.raw},
          {"plan", plan.span},
          {"plan_log_probs", plan.log_probs},
          {"log_probs", c.log_probs},
          {"well_formed", c.response.well_formed},
          {"answer", answer},
          {"correct", verify(g.task, c.response)}};
}

}  // namespace ptagrpo
