// Cold start on a few hundred worked examples, a short GRPO run, and a
// look at what the policy writes before and after.

#include <cstdio>

#include "ptagrpo/ptagrpo.hpp"

using namespace ptagrpo;

static void show(const char* label, const PolicyTable& policy, const Task& task) {
  Rng rng(7);
  const auto plan = sample_plan(policy, task, 8, rng, {0.6, 0.95});
  const auto cont = sample_continuation(policy, task, plan.span, 64, rng, {0.6, 0.95});
  const auto& vocab = Vocab::standard();
  std::printf("%-6s %s -> %s  (%s)\n", label, vocab.render(task.question).c_str(),
              vocab.render(cont.response.raw).c_str(), verify(task, cont.response) ? "correct" : "wrong");
}

int main() {
  ExperimentConfig cfg;
  cfg.rl.steps = 60;
  cfg.heldout_tasks = 100;

  const auto data = build_dataset(cfg.seed, cfg.sft.dataset_size, cfg.task_mix, cfg.modulus);
  const auto heldout = heldout_tasks(cfg);
  const auto spec = cfg.effective_eval();

  PolicyTable policy(tok::count, cfg.context);
  const auto sft = sft_train(policy, data, cfg.sft);
  std::printf("sft loss %.3f -> %.3f over %zu epochs\n", sft.loss_trace.front(), sft.loss_trace.back(),
              sft.loss_trace.size());
  const auto before = evaluate(policy, heldout, spec);
  show("sft", policy, heldout.front());

  const auto exclude = questions_of(heldout);
  auto stream = rl_task_stream(cfg, exclude);
  const auto rl = rl_train(policy, stream, cfg.effective_reward(), cfg.rl, cfg.seed);
  const auto after = evaluate(policy, heldout, spec);
  show("grpo", policy, heldout.front());

  std::printf("held-out accuracy %.3f -> %.3f after %zu steps\n", before.accuracy, after.accuracy,
              rl.metrics.size());
  std::printf("pass@16 %.3f -> %.3f\n", before.pass_at_k.at(16), after.pass_at_k.at(16));
  const auto fano = fano_check(after.counts);
  std::printf("error %.3f, bound %.3f, holds %s\n", fano.p_error, fano.bound, fano.holds ? "yes" : "no");
}
