#pragma once

#include <functional>

#include "rollout.hpp"
#include "theory.hpp"

namespace ptagrpo {

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

// Unbiased pass@k from n samples with c correct: 1 - C(n-c, k) / C(n, k).
// Exact integer binomials up to n = 60, product form beyond.
inline double pass_at_k(int n, int c, int k) {
  if (k < 1 || n < 1) throw Error("pass@k needs n >= 1 and k >= 1");
  if (k > n) throw Error("pass@k: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  if (c < 0 || c > n) throw Error("pass@k: correct count outside [0, n]");
  if (n - c < k) return 1.0;
  if (n <= 60) {
    const auto all = binomial(n, k);
    return static_cast<double>(all - binomial(n - c, k)) / static_cast<double>(all);
  }
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

struct EvalSpec {
  int n_samples = 16;
  std::vector<int> k_list{1, 2, 4, 8, 16};
  SamplingParams sampling{0.6, 0.95};
  RolloutLimits limits;
  std::uint64_t seed = 0;
  int ablation_samples = 4;  // draws per task in the plan-conditioning comparison

  void validate() const {
    if (n_samples < 1) throw ConfigError("eval.n_samples must be positive");
    for (int k : k_list) {
      if (k < 1) throw ConfigError("eval.k_list entries must be positive");
      if (k > n_samples)
        throw ConfigError("eval: k = " + std::to_string(k) + " exceeds n_samples = " +
                          std::to_string(n_samples));
    }
    if (ablation_samples < 1) throw ConfigError("eval.ablation_samples must be positive");
  }
};

struct PlanAblation {
  double no_plan = 0;
  double self_plan = 0;
  double oracle_plan = 0;
};

struct EvalReport {
  int tasks = 0;
  int n_samples = 0;
  double accuracy = 0;
  std::map<int, double> pass_at_k;
  double mean_length = 0;
  std::map<int, double> accuracy_by_difficulty;
  std::optional<PlanAblation> plan_modes;
  JointCounts counts;  // (question, plan, prediction, truth) over every sample

  bool pass_at_k_monotone() const {
    double prev = -1;
    for (const auto& [k, v] : pass_at_k) {
      if (v < prev) return false;
      prev = v;
    }
    return true;
  }
};

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json pk = nlohmann::json::object(), bd = nlohmann::json::object();
  for (const auto& [k, v] : r.pass_at_k) pk[std::to_string(k)] = v;
  for (const auto& [d, v] : r.accuracy_by_difficulty) bd[std::to_string(d)] = v;
  nlohmann::json j = {{"tasks", r.tasks},
                      {"n_samples", r.n_samples},
                      {"accuracy", r.accuracy},
                      {"pass_at_k", pk},
                      {"mean_length", r.mean_length},
                      {"accuracy_by_difficulty", bd}};
  if (r.plan_modes)
    j["plan_conditioning"] = {{"no_plan", r.plan_modes->no_plan},
                              {"self_plan", r.plan_modes->self_plan},
                              {"oracle_plan", r.plan_modes->oracle_plan}};
  return j;
}

struct EvalSample {
  int task_index;
  int sample_index;
  const Task* task;
  const PlanSample* plan;
  const Continuation* continuation;
};

// Same line layout as a training rollout trace.
inline nlohmann::json sample_json(const EvalSample& e) {
  nlohmann::json answer = nullptr;
  if (e.continuation->response.prediction) answer = *e.continuation->response.prediction;
  return {{"question_id", e.task_index},
          {"plan_index", e.sample_index},
          {"continuation_index", 0},
          {"question", e.task->question},
          {"truth", e.task->truth},
          {"difficulty", e.task->difficulty},
          {"tokens", e.continuation->response.raw},
          {"plan", e.plan->span},
          {"plan_log_probs", e.plan->log_probs},
          {"log_probs", e.continuation->log_probs},
          {"well_formed", e.continuation->response.well_formed},
          {"answer", answer},
          {"correct", verify(*e.task, e.continuation->response)}};
}

// Draws n_samples plan-then-reason responses per task. Accuracy scores the
// first sample only; pass@k uses all of them.
inline EvalReport evaluate(const PolicyTable& policy, std::span<const Task> tasks, const EvalSpec& spec,
                           const std::function<void(const EvalSample&)>& on_sample = {}) {
  spec.validate();
  if (tasks.empty()) throw Error("evaluate needs at least one task");
  EvalReport rep;
  rep.tasks = static_cast<int>(tasks.size());
  rep.n_samples = spec.n_samples;
  std::map<int, std::pair<int, int>> by_diff;
  double length_sum = 0;
  int first_correct = 0;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Task& task = tasks[ti];
    int correct = 0;
    for (int s = 0; s < spec.n_samples; ++s) {
      Rng rng = Rng::derive(spec.seed, 0xE7A1, ti, static_cast<std::uint64_t>(s));
      const auto plan = sample_plan(policy, task, spec.limits.max_plan_len, rng, spec.sampling);
      const auto cont = sample_continuation(policy, task, plan.span, spec.limits.max_len, rng, spec.sampling);
      const bool ok = verify(task, cont.response);
      correct += ok ? 1 : 0;
      length_sum += cont.length();
      rep.counts.add(task.question, plan.span, cont.response.prediction, task.truth);
      if (s == 0) {
        first_correct += ok ? 1 : 0;
        auto& d = by_diff[task.difficulty];
        d.first += ok ? 1 : 0;
        d.second += 1;
      }
      if (on_sample) on_sample({static_cast<int>(ti), s, &task, &plan, &cont});
    }
    for (int k : spec.k_list) rep.pass_at_k[k] += pass_at_k(spec.n_samples, correct, k);
  }
  const double nt = static_cast<double>(tasks.size());
  rep.accuracy = first_correct / nt;
  for (auto& [k, v] : rep.pass_at_k) v /= nt;
  rep.mean_length = length_sum / (nt * spec.n_samples);
  for (const auto& [d, c] : by_diff) rep.accuracy_by_difficulty[d] = static_cast<double>(c.first) / c.second;
  return rep;
}

// Same tasks and continuation streams under three conditioning modes: an
// empty plan span, a plan sampled by the policy, and the oracle planner's
// plan. The self plan draws from a stream of its own, so a self plan equal to
// the oracle plan yields the same continuation.
inline PlanAblation plan_ablation_eval(const PolicyTable& policy, std::span<const Task> tasks,
                                       const EvalSpec& spec, int modulus = 10) {
  spec.validate();
  if (tasks.empty()) throw Error("plan_ablation_eval needs at least one task");
  PlanAblation out;
  long long n = 0, no_plan = 0, self_plan = 0, oracle_plan = 0;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Task& task = tasks[ti];
    const auto oracle = oracle_plan_and_cot(task, modulus).plan;
    for (int s = 0; s < spec.ablation_samples; ++s) {
      {
        Rng rng = Rng::derive(spec.seed, 0xAB1A, ti, static_cast<std::uint64_t>(s));
        no_plan += verify(task, sample_continuation(policy, task, {}, spec.limits.max_len, rng,
                                                    spec.sampling).response);
      }
      {
        Rng plan_rng = Rng::derive(spec.seed, 0xAB1B, ti, static_cast<std::uint64_t>(s));
        const auto plan = sample_plan(policy, task, spec.limits.max_plan_len, plan_rng, spec.sampling);
        Rng rng = Rng::derive(spec.seed, 0xAB1A, ti, static_cast<std::uint64_t>(s));
        self_plan += verify(task, sample_continuation(policy, task, plan.span, spec.limits.max_len, rng,
                                                      spec.sampling).response);
      }
      {
        Rng rng = Rng::derive(spec.seed, 0xAB1A, ti, static_cast<std::uint64_t>(s));
        oracle_plan += verify(task, sample_continuation(policy, task, oracle, spec.limits.max_len, rng,
                                                        spec.sampling).response);
      }
      ++n;
    }
  }
  out.no_plan = static_cast<double>(no_plan) / static_cast<double>(n);
  out.self_plan = static_cast<double>(self_plan) / static_cast<double>(n);
  out.oracle_plan = static_cast<double>(oracle_plan) / static_cast<double>(n);
  return out;
}

}  // namespace ptagrpo
