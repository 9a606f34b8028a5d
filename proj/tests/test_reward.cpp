#include <gtest/gtest.h>

#include <algorithm>

#include "ptagrpo/reward.hpp"

using namespace ptagrpo;

namespace {
Task task_235() {
  const int a[] = {2, 3, 5};
  const Token o[] = {tok::times, tok::plus};
  return make_task(a, o);  // (2*3)+5 = 11 -> 1
}

TokenSeq response(const TokenSeq& plan, int answer_digit, int padding = 0) {
  TokenSeq think{6};
  for (int i = 0; i < padding; ++i) think.push_back(1);
  TokenSeq ans{answer_digit};
  return serialize_tagged(plan, think, ans);
}

// Group whose continuation (i, k) is correct when correct[i][k] is set.
RolloutGroup group_from(const Task& task, const std::vector<std::vector<int>>& correct,
                        const std::vector<std::vector<int>>& pad = {}) {
  RolloutGroup g;
  g.task = task;
  g.m = static_cast<int>(correct.size());
  g.z = static_cast<int>(correct[0].size());
  const TokenSeq plan{tok::times, tok::plus, tok::mod};
  for (int i = 0; i < g.m; ++i) {
    PlanSample ps;
    ps.span = plan;
    g.plans.push_back(ps);
    for (int k = 0; k < g.z; ++k) {
      const int extra = pad.empty() ? 0 : pad[i][k];
      Continuation c;
      c.response = parse_tagged(response(plan, correct[i][k] ? task.truth : (task.truth + 1) % 10, extra));
      g.continuations.push_back(c);
    }
  }
  return g;
}
}  // namespace

TEST(Reward, TwoPlanSoftmax) {
  const double acc[] = {1.0, 0.0};
  const auto s = analytic_reward(acc);
  EXPECT_NEAR(s[0], 0.731059, 1e-6);
  EXPECT_NEAR(s[1], 0.268941, 1e-6);
}

TEST(Reward, ThreePlanSoftmaxAgainstDirectSum) {
  const double acc[] = {1.0, 1.0 / 3, 0.0};
  const auto s = analytic_reward(acc);
  const double denom = std::exp(1.0) + std::exp(1.0 / 3) + 1.0;
  EXPECT_NEAR(s[0], std::exp(1.0) / denom, 1e-15);
  EXPECT_NEAR(s[1], std::exp(1.0 / 3) / denom, 1e-15);
  EXPECT_NEAR(s[2], 1.0 / denom, 1e-15);
  EXPECT_GT(s[0], s[1]);
  EXPECT_GT(s[1], s[2]);
}

TEST(Reward, SoftmaxPermutationEquivariant) {
  std::vector<double> acc{0.2, 0.9, 0.5, 0.0};
  const auto base = analytic_reward(acc);
  std::vector<int> perm{3, 1, 0, 2};
  std::vector<double> shuffled;
  for (int i : perm) shuffled.push_back(acc[static_cast<std::size_t>(i)]);
  const auto s = analytic_reward(shuffled);
  for (std::size_t j = 0; j < perm.size(); ++j) EXPECT_DOUBLE_EQ(s[j], base[static_cast<std::size_t>(perm[j])]);
}

TEST(Reward, SoftmaxStrictlyMonotone) {
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> acc(4);
    for (double& a : acc) a = static_cast<double>(rng.below(4)) / 3;
    const auto s = analytic_reward(acc);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        if (acc[i] > acc[j]) {
          EXPECT_GT(s[i], s[j]);
        }
  }
}

TEST(Reward, ScalingAccuraciesDoesNotShrinkSpread) {
  Rng rng(2);
  auto ratio = [](const std::vector<double>& s) {
    return *std::max_element(s.begin(), s.end()) / *std::min_element(s.begin(), s.end());
  };
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<double> a(3), scaled(3);
    for (double& x : a) x = rng.uniform();
    // Keep kappa * max(a) <= 1: once two entries clamp to 1 their gap vanishes.
    const double top = *std::max_element(a.begin(), a.end());
    const double kappa = 1.0 + (1.0 / top - 1.0) * rng.uniform();
    for (std::size_t i = 0; i < 3; ++i) scaled[i] = std::min(1.0, a[i] * kappa);
    EXPECT_GE(ratio(analytic_reward(scaled)), ratio(analytic_reward(a)) * (1 - 1e-12));
  }
}

TEST(Reward, ClampingCanCollapseSpread) {
  const std::vector<double> a{0.5, 0.6}, scaled{1.0, 1.0};  // kappa = 3
  const auto s = analytic_reward(a), t = analytic_reward(scaled);
  EXPECT_GT(s[1] / s[0], t[1] / t[0]);
}

TEST(Reward, OutcomeIndicator) {
  const auto t = task_235();
  EXPECT_EQ(outcome_reward(t, parse_tagged(response({tok::times, tok::plus, tok::mod}, 1))), 1.0);
  EXPECT_EQ(outcome_reward(t, parse_tagged(response({tok::times, tok::plus, tok::mod}, 2))), 0.0);
}

TEST(Reward, StructureBonus) {
  EXPECT_DOUBLE_EQ(structure_reward(parse_tagged(response({tok::mod}, 1))), 0.2);
  const TokenSeq broken{tok::plan_open, tok::mod, tok::think_open, 1};
  EXPECT_DOUBLE_EQ(structure_reward(parse_tagged(broken)), 0.0);
}

TEST(Reward, LengthRewardValues) {
  RewardConfig cfg;
  cfg.t_max = 40;
  EXPECT_DOUBLE_EQ(length_reward(12, 12, cfg), 0.2);
  EXPECT_NEAR(length_reward(40, 12, cfg), 0.2 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(length_reward(5, 12, cfg), 0.2 * std::exp(-7.0 / 28), 1e-15);
  EXPECT_EQ(length_reward(12, std::nullopt, cfg), 0.0);
}

TEST(Reward, LengthRewardMaximalAtReference) {
  RewardConfig cfg;
  for (int l = 1; l < 75; ++l) EXPECT_LE(length_reward(l, 20, cfg), length_reward(20, 20, cfg));
}

TEST(Reward, TmaxMustExceedReference) {
  RewardConfig cfg;
  cfg.t_max = 12;
  EXPECT_THROW(length_reward(12, 12, cfg), ConfigError);
  cfg.t_max = 10;
  EXPECT_THROW(length_reward(12, 12, cfg), ConfigError);
}

TEST(Reward, ReferenceIsShortestCorrect) {
  const auto g = group_from(task_235(), {{1, 0}, {1, 1}}, {{3, 0}, {1, 2}});
  // Unpadded: <plan> * + % </plan> <think> 6 </think> <answer> d </answer> is 11 tokens.
  EXPECT_EQ(reference_length(g), 12);
  const auto none = group_from(task_235(), {{0, 0}});
  EXPECT_FALSE(reference_length(none).has_value());
}

TEST(Reward, TotalComposition) {
  RewardConfig cfg;
  const auto g = group_from(task_235(), {{1, 1}, {0, 0}});
  const auto r = total_reward(g, cfg);
  const double a0 = std::exp(1.0) / (std::exp(1.0) + 1), a1 = 1 - a0;
  EXPECT_NEAR(r[0].total, a0 + 1.0 + 0.2 + 0.2, 1e-12);
  EXPECT_NEAR(r[2].total, a1 + 0.0 + 0.2 + 0.2, 1e-12);
  EXPECT_NEAR(r[2].analytic, a1, 1e-12);
}

TEST(Reward, OutcomeWeightIsLinear) {
  const auto g = group_from(task_235(), {{1, 0, 1}, {0, 0, 1}, {1, 1, 1}});
  RewardConfig one, two;
  two.outcome_weight = 2.0;
  const auto r1 = total_reward(g, one), r2 = total_reward(g, two);
  for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_NEAR(r2[i].total - r1[i].total, r1[i].outcome, 1e-12);
}

TEST(Reward, AblationSwitches) {
  const auto g = group_from(task_235(), {{1, 0}, {0, 0}});
  RewardConfig cfg;
  cfg.disable_analytic = true;
  for (const auto& b : total_reward(g, cfg)) EXPECT_EQ(b.analytic, 0.0);
  cfg = {};
  cfg.disable_format = true;
  for (const auto& b : total_reward(g, cfg)) {
    EXPECT_EQ(b.structure, 0.0);
    EXPECT_EQ(b.length, 0.0);
  }
  cfg = {};
  cfg.softmax_enabled = false;
  const auto raw = total_reward(g, cfg);
  EXPECT_DOUBLE_EQ(raw[0].analytic, 0.5);
  EXPECT_DOUBLE_EQ(raw[2].analytic, 0.0);
}

TEST(Reward, PlanAccuracies) {
  const auto g = group_from(task_235(), {{1, 1, 0}, {0, 0, 0}, {1, 1, 1}});
  const auto acc = plan_accuracies(g);
  EXPECT_DOUBLE_EQ(acc[0], 2.0 / 3);
  EXPECT_DOUBLE_EQ(acc[1], 0.0);
  EXPECT_DOUBLE_EQ(acc[2], 1.0);
}
