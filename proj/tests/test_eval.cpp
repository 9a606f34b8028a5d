#include <gtest/gtest.h>

#include "ptagrpo/cold_start.hpp"
#include "ptagrpo/eval.hpp"
#include "ptagrpo/grpo.hpp"

using namespace ptagrpo;

namespace {
// Fraction of k-subsets of n samples (the first c correct) holding a correct one.
double enumerate_pass(int n, int c, int k) {
  long long hit = 0, all = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    ++all;
    hit += (mask & ((1u << c) - 1)) != 0;
  }
  return static_cast<double>(hit) / static_cast<double>(all);
}

std::vector<Task> tasks(int n, std::uint64_t seed) {
  std::vector<Task> out;
  TaskStream s(seed, {{2, 0.5}, {3, 0.5}});
  for (int i = 0; i < n; ++i) out.push_back(s.next());
  return out;
}

EvalSpec small_spec() {
  EvalSpec s;
  s.n_samples = 4;
  s.k_list = {1, 2, 4};
  s.seed = 5;
  return s;
}
}  // namespace

TEST(PassAtK, Examples) {
  for (int k : {1, 2, 4, 8, 16}) {
    EXPECT_EQ(pass_at_k(16, 16, k), 1.0);
    EXPECT_EQ(pass_at_k(16, 0, k), 0.0);
  }
  EXPECT_DOUBLE_EQ(pass_at_k(4, 1, 2), 0.5);
}

TEST(PassAtK, MatchesSubsetEnumeration) {
  for (int n = 1; n <= 8; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) EXPECT_EQ(pass_at_k(n, c, k), enumerate_pass(n, c, k)) << n << ' ' << c << ' ' << k;
}

TEST(PassAtK, MonotoneInK) {
  for (int n : {8, 16, 64, 100})
    for (int c = 0; c <= n; ++c)
      for (int k = 2; k <= n; ++k) ASSERT_GE(pass_at_k(n, c, k), pass_at_k(n, c, k - 1));
}

TEST(PassAtK, LargeNMatchesIntegerForm) {
  for (int c = 0; c <= 60; c += 7)
    for (int k : {1, 5, 20}) {
      double miss = 1.0;
      for (int i = 0; i < k; ++i) miss *= static_cast<double>(60 - c - i) / (60 - i);
      EXPECT_NEAR(pass_at_k(60, c, k), 1.0 - std::max(0.0, miss), 1e-12);
    }
}

TEST(PassAtK, Rejections) {
  EXPECT_THROW(pass_at_k(4, 1, 5), Error);
  EXPECT_THROW(pass_at_k(4, 5, 1), Error);
  EXPECT_THROW(pass_at_k(4, 1, 0), Error);
  EvalSpec s;
  s.n_samples = 8;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Evaluate, ReportShapeAndRanges) {
  PolicyTable p;
  const auto ts = tasks(20, 1);
  const auto r = evaluate(p, ts, small_spec());
  EXPECT_EQ(r.tasks, 20);
  EXPECT_EQ(r.counts.total(), 80);
  EXPECT_TRUE(r.pass_at_k_monotone());
  for (const auto& [k, v] : r.pass_at_k) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GE(r.accuracy, 0.0);
  EXPECT_LE(r.accuracy, 1.0);
  EXPECT_GT(r.mean_length, 0.0);
}

TEST(Evaluate, AccuracyIsFirstSample) {
  const auto data = build_dataset(2, 100, {{2, 1.0}});
  PolicyTable p;
  SftConfig cfg;
  cfg.epochs = 30;
  sft_train(p, data, cfg);
  const auto ts = tasks(30, 3);
  std::vector<int> first(30, 0);
  const auto r = evaluate(p, ts, small_spec(), [&](const EvalSample& e) {
    if (e.sample_index == 0) first[static_cast<std::size_t>(e.task_index)] = verify(*e.task, e.continuation->response);
  });
  double acc = 0;
  for (int x : first) acc += x;
  EXPECT_DOUBLE_EQ(r.accuracy, acc / 30);
}

TEST(Evaluate, Deterministic) {
  PolicyTable p;
  const auto ts = tasks(10, 4);
  const auto a = evaluate(p, ts, small_spec()), b = evaluate(p, ts, small_spec());
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.pass_at_k, b.pass_at_k);
  EXPECT_EQ(a.mean_length, b.mean_length);
}

TEST(Evaluate, RejectsEmptyTaskSet) {
  PolicyTable p;
  EXPECT_THROW(evaluate(p, std::vector<Task>{}, small_spec()), Error);
}

TEST(Evaluate, SampleJsonFields) {
  PolicyTable p;
  const auto ts = tasks(2, 6);
  std::vector<nlohmann::json> lines;
  evaluate(p, ts, small_spec(), [&](const EvalSample& e) { lines.push_back(sample_json(e)); });
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines[5].at("question_id"), 1);
  EXPECT_EQ(lines[5].at("plan_index"), 1);
  EXPECT_EQ(lines[5].at("question").get<TokenSeq>(), ts[1].question);
}

TEST(PlanAblation, UntrainedPolicyIsNearChance) {
  PolicyTable p;
  const auto ts = tasks(100, 7);
  const auto r = plan_ablation_eval(p, ts, small_spec());
  // A uniform policy rarely closes the template, so it sits at or below chance.
  for (double v : {r.no_plan, r.self_plan, r.oracle_plan}) EXPECT_LE(v, 0.1 + 0.05);
}

TEST(PlanAblation, ModesArePaired) {
  // The question-only policy ignores the plan, so all three modes agree.
  PolicyTable p(tok::count, ContextSpec{0, false});
  const auto ts = tasks(30, 8);
  const auto r = plan_ablation_eval(p, ts, small_spec());
  EXPECT_EQ(r.no_plan, r.oracle_plan);
}

TEST(PlanAblation, OraclePlanHelpsAPlanConditionedPolicy) {
  const auto data = build_dataset(9, 300, {{2, 0.5}, {3, 0.5}});
  PolicyTable p;
  SftConfig cfg;
  cfg.epochs = 60;
  sft_train(p, data, cfg);
  const auto r = plan_ablation_eval(p, tasks(100, 10), small_spec());
  EXPECT_GE(r.oracle_plan, r.self_plan);
  EXPECT_GE(r.oracle_plan, r.no_plan);
}
