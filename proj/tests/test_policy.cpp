#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "ptagrpo/policy.hpp"

using namespace ptagrpo;

namespace {
PolicyTable random_policy(std::uint64_t seed, const TokenSeq& context, double scale = 2.0) {
  PolicyTable p;
  Rng rng(seed);
  auto& row = p.row_mut(p.key(context));
  for (double& x : row) x = scale * (2 * rng.uniform() - 1);
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b))); }
}  // namespace

TEST(Policy, ZeroLogitsGiveUniform) {
  PolicyTable p;
  const auto d = token_distribution(p, TokenSeq{1, tok::plus});
  ASSERT_EQ(d.size(), 22u);
  for (double x : d) EXPECT_DOUBLE_EQ(x, 1.0 / 22);
}

TEST(Policy, SingleRaisedLogit) {
  PolicyTable p;
  const TokenSeq ctx{4};
  p.row_mut(p.key(ctx))[0] = 1.0;
  const auto d = token_distribution(p, ctx);
  EXPECT_NEAR(d[0], std::exp(1.0) / (std::exp(1.0) + 21), 1e-15);
}

TEST(Policy, HighTemperatureApproachesUniform) {
  PolicyTable p(22, ContextSpec{}, 1e4);
  const TokenSeq ctx{4};
  for (int i = 0; i < 22; ++i) p.row_mut(p.key(ctx))[static_cast<std::size_t>(i)] = i;
  const auto d = token_distribution(p, ctx);
  EXPECT_LT(*std::max_element(d.begin(), d.end()) - *std::min_element(d.begin(), d.end()), 1e-3);
}

TEST(Policy, RowsSumToOne) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = random_policy(s, {1, 2}, 30.0);
    double sum = 0;
    for (double x : token_distribution(p, TokenSeq{1, 2})) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Policy, RejectsUnknownTokens) {
  PolicyTable p;
  EXPECT_THROW(token_distribution(p, TokenSeq{22}), Error);
  EXPECT_THROW(grad_log_prob(p, TokenSeq{1}, 22), Error);
}

TEST(Policy, NucleusKeepsSmallestPrefixReachingMass) {
  std::vector<double> p{0.5, 0.3, 0.15, 0.05};
  nucleus_truncate(p, 0.8);
  EXPECT_DOUBLE_EQ(p[0], 0.5 / 0.8);
  EXPECT_DOUBLE_EQ(p[1], 0.3 / 0.8);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(p[3], 0.0);
  std::vector<double> q{0.1, 0.6, 0.3};
  nucleus_truncate(q, 0.95);
  EXPECT_GT(q[0], 0.0);
  std::vector<double> r{0.1, 0.6, 0.3};
  nucleus_truncate(r, 0.5);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
}

TEST(Policy, GradientClosedForms) {
  PolicyTable p;
  const TokenSeq ctx{3};
  const auto g = grad_log_prob(p, ctx, 5).at(p.key(ctx));
  for (int i = 0; i < 22; ++i) EXPECT_DOUBLE_EQ(g[static_cast<std::size_t>(i)], (i == 5 ? 1.0 : 0.0) - 1.0 / 22);

  p.row_mut(p.key(ctx))[5] = 60.0;
  const auto peaked = grad_log_prob(p, ctx, 5);
  for (double x : peaked.at(p.key(ctx))) EXPECT_NEAR(x, 0.0, 1e-9);
}

TEST(Policy, GradientMatchesFiniteDifferences) {
  Rng pick(77);
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const TokenSeq ctx{pick.below(10), tok::plus};
    auto p = random_policy(static_cast<std::uint64_t>(inst), ctx, 3.0);
    const Token tok_ = pick.below(22);
    const auto key = p.key(ctx);
    const auto g = grad_log_prob(p, ctx, tok_).at(key);
    for (std::size_t j = 0; j < 22; ++j) {
      const double h = 1e-5, x0 = p.row(key)[j];
      p.row_mut(key)[j] = x0 + h;
      const double up = std::log(token_distribution(p, ctx)[static_cast<std::size_t>(tok_)]);
      p.row_mut(key)[j] = x0 - h;
      const double dn = std::log(token_distribution(p, ctx)[static_cast<std::size_t>(tok_)]);
      p.row_mut(key)[j] = x0;
      worst = std::max(worst, rel_err(g[j], (up - dn) / (2 * h)));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Policy, TemperatureGradient) {
  PolicyTable p(22, ContextSpec{}, 0.7);
  const TokenSeq ctx{2};
  Rng r(3);
  for (double& x : p.row_mut(p.key(ctx))) x = r.uniform();
  const auto key = p.key(ctx);
  const auto g = grad_log_prob(p, ctx, 4).at(key);
  for (std::size_t j = 0; j < 22; ++j) {
    const double h = 1e-5, x0 = p.row(key)[j];
    p.row_mut(key)[j] = x0 + h;
    const double up = std::log(token_distribution(p, ctx)[4]);
    p.row_mut(key)[j] = x0 - h;
    const double dn = std::log(token_distribution(p, ctx)[4]);
    p.row_mut(key)[j] = x0;
    EXPECT_LE(rel_err(g[j], (up - dn) / (2 * h)), 1e-6);
  }
}

TEST(Policy, SamplingLawMatchesProbabilities) {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  Rng rng(2024);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_index(probs, rng))];
  for (std::size_t i = 0; i < 4; ++i) {
    const double se = std::sqrt(n * probs[i] * (1 - probs[i]));
    EXPECT_LT(std::abs(counts[i] - n * probs[i]), 3 * se) << i;
  }
}

TEST(Policy, SampleSequenceForcedStop) {
  PolicyTable p;
  const TokenSeq prefix{1, tok::sep};
  p.row_mut(p.key(prefix))[tok::eos] = 100.0;
  Rng rng(1);
  const auto s = sample_sequence(p, prefix, {tok::eos}, 10, rng);
  EXPECT_EQ(s.tokens, (TokenSeq{tok::eos}));
  EXPECT_TRUE(s.stopped);
}

TEST(Policy, SampleSequenceUniformRunsToCap) {
  PolicyTable p;
  Rng rng(1);
  const auto s = sample_sequence(p, TokenSeq{}, {}, 5, rng);
  EXPECT_EQ(s.tokens.size(), 5u);
  EXPECT_FALSE(s.stopped);
  for (double lp : s.log_probs) EXPECT_NEAR(lp, -std::log(22.0), 1e-15);
  EXPECT_THROW(sample_sequence(p, TokenSeq{}, {}, 0, rng), Error);
}

TEST(Policy, SampleSequenceDeterministicAndLogProbsFaithful) {
  const auto p = random_policy(4, {});
  Rng a(99), b(99);
  const auto s1 = sample_sequence(p, TokenSeq{}, {tok::eos}, 30, a);
  const auto s2 = sample_sequence(p, TokenSeq{}, {tok::eos}, 30, b);
  EXPECT_EQ(s1.tokens, s2.tokens);
  EXPECT_EQ(s1.log_probs, s2.log_probs);
  TokenSeq ctx;
  for (std::size_t t = 0; t < s1.tokens.size(); ++t) {
    EXPECT_EQ(s1.log_probs[t], log_prob(p, p.key(ctx), s1.tokens[t], {p.temperature(), 1.0}));
    ctx.push_back(s1.tokens[t]);
  }
}

TEST(Policy, TopPSamplingStaysInNucleus) {
  PolicyTable p;
  const TokenSeq ctx{1};
  auto& row = p.row_mut(p.key(ctx));
  row[2] = 5.0;
  row[3] = 4.0;
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const auto s = sample_sequence(p, ctx, {}, 1, rng, {1.0, 0.9});
    EXPECT_TRUE(s.tokens[0] == 2 || s.tokens[0] == 3);
  }
}

TEST(Policy, EntropyOfUniformRow) {
  PolicyTable p;
  EXPECT_NEAR(row_entropy(p, p.key(TokenSeq{})), std::log(22.0), 1e-12);
}

TEST(Policy, CheckpointRoundTripAndHashRejection) {
  auto p = random_policy(5, {1, 2});
  p.row_mut(p.key(TokenSeq{7}))[3] = -1.25;
  const auto path = (std::filesystem::temp_directory_path() / "ptagrpo_policy_test.json").string();
  save_policy(p, path);
  const auto q = load_policy(path);
  EXPECT_TRUE(p.same_parameters(q));
  EXPECT_EQ(q.context_spec(), p.context_spec());
  std::filesystem::remove(path);

  auto j = policy_to_json(p);
  j["vocab_hash"] = "0000000000000000";
  EXPECT_THROW(policy_from_json(j), Error);
  EXPECT_THROW(policy_from_json(policy_to_json(p), "ffffffffffffffff"), Error);

  PolicyTable small(2, ContextSpec{0, false});
  EXPECT_THROW(policy_from_json(policy_to_json(small)), Error);
  EXPECT_NO_THROW(policy_from_json(policy_to_json(small), small.vocab_hash()));
}

TEST(Policy, SnapshotsAreFrozen) {
  PolicyTable p;
  const auto snap = PolicySnapshot::take(p, SnapshotRole::reference);
  p.row_mut(p.key(TokenSeq{1}))[0] = 3.0;
  EXPECT_EQ(snap->row(p.key(TokenSeq{1}))[0], 0.0);
  EXPECT_EQ(snap.role, SnapshotRole::reference);
}
