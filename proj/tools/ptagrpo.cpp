// Command-line driver for the planning-then-reasoning GRPO lab.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "ptagrpo/ptagrpo.hpp"

namespace fs = std::filesystem;
using namespace ptagrpo;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const std::string& p) {
  std::ifstream is(p);
  if (!is) throw Error("cannot read " + p);
  return is;
}

std::string out_or(const Globals& g, const char* fallback) { return g.out.empty() ? fallback : g.out; }

void print_report(const EvalReport& r) {
  std::printf("accuracy %.4f  mean_length %.2f", r.accuracy, r.mean_length);
  for (const auto& [k, v] : r.pass_at_k) std::printf("  pass@%d %.4f", k, v);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning-then-reasoning GRPO on synthetic modular arithmetic"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides the config)");
  app.add_option("--out", g.out, "Output file or directory");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a cold-start dataset as JSONL");
  int gen_n = -1;
  std::string gen_mix;
  gen->add_option("--n", gen_n, "Number of records");
  gen->add_option("--difficulty-mix", gen_mix, "Difficulty weights, e.g. 2:0.5,3:0.5");

  // sft
  auto* sft = app.add_subcommand("sft", "Supervised cold start on a dataset");
  std::string sft_data, sft_init;
  int sft_epochs = -1, sft_batch = -1;
  double sft_lr = -1;
  sft->add_option("--data", sft_data, "Dataset JSONL (generated from the config when omitted)");
  sft->add_option("--init", sft_init, "Starting checkpoint (random init when omitted)");
  sft->add_option("--epochs", sft_epochs);
  sft->add_option("--lr", sft_lr);
  sft->add_option("--batch-size", sft_batch);

  // rl
  auto* rl = app.add_subcommand("rl", "GRPO training from a checkpoint");
  std::string rl_ckpt, rl_trace;
  int rl_steps = -1;
  rl->add_option("--checkpoint", rl_ckpt, "Starting checkpoint (random init when omitted)");
  rl->add_option("--steps", rl_steps);
  rl->add_option("--rollouts", rl_trace, "Write every training rollout to this JSONL file");

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy and pass@k of a checkpoint");
  std::string ev_ckpt, ev_tasks, ev_trace;
  bool ev_ablation = false;
  ev->add_option("--checkpoint", ev_ckpt, "Policy checkpoint")->required();
  ev->add_option("--tasks", ev_tasks, "Task JSONL (held-out set from the config when omitted)");
  ev->add_option("--rollouts", ev_trace, "Write every evaluation sample to this JSONL file");
  ev->add_flag("--plan-ablation", ev_ablation, "Also compare no-plan, self-plan and oracle-plan conditioning");

  // theory-check
  auto* th = app.add_subcommand("theory-check", "Error bound check on a rollout file");
  std::string th_rollouts;
  th->add_option("--rollouts", th_rollouts, "Rollout or evaluation JSONL")->required()->check(CLI::ExistingFile);

  // ablate
  auto* ab = app.add_subcommand("ablate", "Run the full pipeline and its ablation variants");

  // plot
  auto* pl = app.add_subcommand("plot", "Series files and SVG charts from a metrics CSV");
  std::string pl_metrics;
  pl->add_option("--metrics", pl_metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);

  // run
  auto* run = app.add_subcommand("run", "gen-data, sft, rl, eval and theory-check in one run directory");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  try {
    ExperimentConfig cfg = resolve(g);

    if (*gen) {
      if (gen_n >= 0) cfg.sft.dataset_size = gen_n;
      if (!gen_mix.empty()) cfg.task_mix = parse_mix(gen_mix);
      if (cfg.sft.dataset_size < 1) throw ConfigError("--n must be positive");
      const auto data = build_dataset(cfg.seed, cfg.sft.dataset_size, cfg.task_mix, cfg.modulus);
      const fs::path out = out_or(g, "dataset.jsonl");
      auto os = open_out(out);
      write_dataset_jsonl(os, data);
      std::printf("wrote %zu records to %s\n", data.size(), out.string().c_str());
    } else if (*sft) {
      if (sft_epochs >= 0) cfg.sft.epochs = sft_epochs;
      if (sft_lr >= 0) cfg.sft.learning_rate = sft_lr;
      if (sft_batch > 0) cfg.sft.batch_size = sft_batch;
      cfg.sft.shuffle_seed = cfg.seed;
      std::vector<ColdStartRecord> data;
      if (sft_data.empty()) {
        data = build_dataset(cfg.seed, cfg.sft.dataset_size, cfg.task_mix, cfg.modulus);
      } else {
        auto is = open_in(sft_data);
        data = read_dataset_jsonl(is);
      }
      PolicyTable policy = sft_init.empty() ? PolicyTable(tok::count, cfg.context) : load_policy(sft_init);
      const auto res = sft_train(policy, data, cfg.sft);
      for (std::size_t e = 0; e < res.loss_trace.size(); ++e)
        std::printf("epoch %zu  loss %.6f\n", e + 1, res.loss_trace[e]);
      const fs::path out = out_or(g, "sft_checkpoint.json");
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_policy(policy, out.string());
      std::printf("wrote %s\n", out.string().c_str());
    } else if (*rl) {
      if (rl_steps >= 0) cfg.rl.steps = rl_steps;
      PolicyTable policy = rl_ckpt.empty() ? PolicyTable(tok::count, cfg.context) : load_policy(rl_ckpt);
      const fs::path dir = out_or(g, "rl");
      fs::create_directories(dir);
      std::ofstream trace;
      if (!rl_trace.empty()) trace = open_out(rl_trace);
      auto metrics = open_out(dir / "rl_metrics.csv");
      metrics << kMetricsHeader << '\n';
      RlHooks hooks;
      int question_id = 0;
      if (trace.is_open())
        hooks.on_group = [&](int, int, const RolloutGroup& grp, std::span<const RewardBreakdown> rewards) {
          for (int i = 0; i < grp.m; ++i)
            for (int k = 0; k < grp.z; ++k) {
              auto j = continuation_json(grp, question_id, i, k);
              j["reward"] = breakdown_json(rewards[static_cast<std::size_t>(i * grp.z + k)]);
              trace << j.dump() << '\n';
            }
          ++question_id;
        };
      hooks.after_step = [&](int step, const PolicyTable& p) {
        if (cfg.rl.checkpoint_every > 0 && step % cfg.rl.checkpoint_every == 0) {
          char name[64];
          std::snprintf(name, sizeof name, "step_%05d.json", step);
          save_policy(p, (dir / name).string());
        }
      };
      const auto exclude = questions_of(heldout_tasks(cfg));
      auto stream = rl_task_stream(cfg, exclude);
      const auto res = rl_train(policy, stream, cfg.effective_reward(), cfg.rl, cfg.seed, hooks);
      for (const auto& row : res.metrics) write_metrics_row(metrics, row);
      save_policy(policy, (dir / "final_checkpoint.json").string());
      if (!res.metrics.empty())
        std::printf("step %d  mean_outcome %.4f  mean_length %.2f\n", res.metrics.back().step,
                    res.metrics.back().mean_outcome, res.metrics.back().mean_length);
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (*ev) {
      const PolicyTable policy = load_policy(ev_ckpt);
      std::vector<Task> tasks;
      if (ev_tasks.empty()) {
        tasks = heldout_tasks(cfg);
      } else {
        auto is = open_in(ev_tasks);
        tasks = read_tasks_jsonl(is);
      }
      std::ofstream trace;
      if (!ev_trace.empty()) trace = open_out(ev_trace);
      const EvalSpec spec = cfg.effective_eval();
      auto rep = evaluate(policy, tasks, spec, [&](const EvalSample& e) {
        if (trace.is_open()) trace << sample_json(e).dump() << '\n';
      });
      if (ev_ablation) rep.plan_modes = plan_ablation_eval(policy, tasks, spec, cfg.modulus);
      auto j = report_json(rep);
      j["fano"] = fano_json(fano_check(rep.counts));
      auto os = open_out(out_or(g, "eval_report.json"));
      os << j.dump(2) << '\n';
      print_report(rep);
    } else if (*th) {
      auto is = open_in(th_rollouts);
      const auto rep = fano_check(counts_from_rollouts(is));
      const auto j = fano_json(rep);
      if (g.out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        auto os = open_out(g.out);
        os << j.dump(2) << '\n';
      }
      std::printf("p_error %.4f  bound %.4f  holds %s\n", rep.p_error, rep.bound, rep.holds ? "true" : "false");
    } else if (*ab) {
      if (!g.out.empty()) cfg.out = g.out;
      const auto runs = run_ablations(cfg);
      for (const auto& r : runs)
        std::printf("%-12s initial %.4f  final %.4f  final_length %.2f\n", r.variant.c_str(),
                    r.initial_accuracy, r.final_accuracy, r.final_mean_length);
    } else if (*pl) {
      for (const auto& p : emit_plots(pl_metrics, out_or(g, "plots"))) std::printf("wrote %s\n", p.string().c_str());
    } else if (*run) {
      if (!g.out.empty()) cfg.out = g.out;
      const auto s = run_pipeline(cfg);
      if (s.sft_report) {
        std::printf("before rl: ");
        print_report(*s.sft_report);
      }
      if (s.final_report) {
        std::printf("after rl:  ");
        print_report(*s.final_report);
      }
      std::printf("run directory %s\n", s.dir.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
