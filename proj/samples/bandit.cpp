// Two-armed bandit: one context, two tokens, arm 1 pays 1 and arm 0 pays 0.
// Plain GRPO with a group of eight pulls per step.

#include <cstdio>

#include "ptagrpo/ptagrpo.hpp"

using namespace ptagrpo;

int main() {
  PolicyTable policy(2, ContextSpec{0, false});
  Optimizer opt({OptimizerKind::sgd, 1.0});
  const ContextKey key = policy.key({});
  const int pulls = 8;
  for (int step = 1; step <= 200; ++step) {
    const auto old = PolicySnapshot::take(policy, SnapshotRole::old_policy);
    Rng rng = Rng::derive(1, static_cast<std::uint64_t>(step));
    std::vector<Trajectory> trajs;
    std::vector<double> rewards;
    for (int i = 0; i < pulls; ++i) {
      const auto probs = row_distribution(old.table->row(key), {});
      const int arm = sample_index(probs, rng);
      rewards.push_back(arm == 1 ? 1.0 : 0.0);
      trajs.push_back({{key}, {arm}, {std::log(probs[static_cast<std::size_t>(arm)])}, 0.0});
    }
    const auto adv = advantages(rewards);
    for (int i = 0; i < pulls; ++i) trajs[static_cast<std::size_t>(i)].advantage = adv.values[static_cast<std::size_t>(i)];
    const auto eval = surrogate(policy, nullptr, trajs, 0.2, 0.0, TokenNorm::per_response_mean, {});
    opt.ascend(policy, eval.gradient);
    if (step % 40 == 0) std::printf("step %3d  p(arm 1) = %.4f\n", step, row_distribution(policy.row(key), {})[1]);
  }
}
