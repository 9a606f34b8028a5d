#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cold_start.hpp"
#include "eval.hpp"
#include "grpo.hpp"

namespace ptagrpo {

struct AblationFlags {
  bool disable_analytic = false;
  bool disable_format = false;
  bool skip_sft = false;
};

struct StageFlags {
  bool gen_data = true;
  bool sft = true;
  bool rl = true;
  bool eval = true;
  bool theory_check = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int modulus = 10;
  DifficultyMix task_mix{{2, 0.5}, {3, 0.5}};
  ContextSpec context;
  SftConfig sft;
  RewardConfig reward;
  RlConfig rl;
  int heldout_tasks = 200;
  EvalSpec eval;
  int eval_every = 0;  // extra evaluation snapshots during RL
  AblationFlags ablation;
  StageFlags stages;
  std::string out = "runs";

  void validate() const {
    check_modulus(modulus);
    check_mix(task_mix);
    check_context_spec(context, tok::count);
    sft.validate();
    reward.validate();
    rl.validate();
    eval.validate();
    if (heldout_tasks < 1) throw ConfigError("eval.heldout_tasks must be positive");
    if (eval_every < 0) throw ConfigError("eval.eval_every must be nonnegative");
    const int longest = rl.limits.max_plan_len + rl.limits.max_len + 2;
    if (reward.t_max <= longest)
      throw ConfigError("reward.t_max must exceed the longest possible response (" +
                        std::to_string(longest) + " tokens)");
  }

  RewardConfig effective_reward() const {
    RewardConfig r = reward;
    r.disable_analytic = ablation.disable_analytic;
    r.disable_format = ablation.disable_format;
    return r;
  }

  EvalSpec effective_eval() const {
    EvalSpec e = eval;
    e.limits = rl.limits;
    e.seed = seed ^ 0xE7A15EEDull;
    return e;
  }
};

// ---------------------------------------------------------------------------
// JSON surface. Unknown keys are rejected so typos fail loudly.

namespace detail {
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) {
    try {
      dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}
}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json mix = nlohmann::json::object();
  for (auto [d, w] : c.task_mix) mix[std::to_string(d)] = w;
  return {
      {"seed", c.seed},
      {"modulus", c.modulus},
      {"task_mix", mix},
      {"context", {{"order", c.context.order}, {"aligned", c.context.aligned}}},
      {"sft",
       {{"epochs", c.sft.epochs},
        {"learning_rate", c.sft.learning_rate},
        {"batch_size", c.sft.batch_size},
        {"dataset_size", c.sft.dataset_size},
        {"momentum", c.sft.momentum}}},
      {"reward",
       {{"alpha", c.reward.alpha},
        {"outcome_weight", c.reward.outcome_weight},
        {"structure_bonus", c.reward.structure_bonus},
        {"t_max", c.reward.t_max},
        {"softmax_enabled", c.reward.softmax_enabled}}},
      {"rl",
       {{"clip_eps", c.rl.clip_eps},
        {"kl_coeff", c.rl.kl_coeff},
        {"optimizer", to_string(c.rl.optimizer.kind)},
        {"learning_rate", c.rl.optimizer.learning_rate},
        {"momentum", c.rl.optimizer.momentum},
        {"weight_decay", c.rl.optimizer.weight_decay},
        {"steps", c.rl.steps},
        {"groups_per_step", c.rl.groups_per_step},
        {"token_norm", to_string(c.rl.token_norm)},
        {"include_plan_tokens", c.rl.include_plan_tokens},
        {"inner_updates", c.rl.inner_updates},
        {"checkpoint_every", c.rl.checkpoint_every},
        {"temperature", c.rl.rollout.temperature},
        {"top_p", c.rl.rollout.top_p}}},
      {"rollout",
       {{"m", c.rl.m},
        {"z", c.rl.z},
        {"max_plan_len", c.rl.limits.max_plan_len},
        {"max_len", c.rl.limits.max_len}}},
      {"eval",
       {{"heldout_tasks", c.heldout_tasks},
        {"n_samples", c.eval.n_samples},
        {"k_list", c.eval.k_list},
        {"temperature", c.eval.sampling.temperature},
        {"top_p", c.eval.sampling.top_p},
        {"ablation_samples", c.eval.ablation_samples},
        {"eval_every", c.eval_every}}},
      {"ablation",
       {{"disable_analytic", c.ablation.disable_analytic},
        {"disable_format", c.ablation.disable_format},
        {"skip_sft", c.ablation.skip_sft}}},
      {"stages",
       {{"gen_data", c.stages.gen_data},
        {"sft", c.stages.sft},
        {"rl", c.stages.rl},
        {"eval", c.stages.eval},
        {"theory_check", c.stages.theory_check}}},
      {"out", c.out},
  };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  ExperimentConfig c;
  detail::reject_unknown(j, {"seed", "modulus", "task_mix", "context", "sft", "reward", "rl", "rollout",
                             "eval", "ablation", "stages", "out"},
                         "config");
  read(j, "seed", c.seed);
  read(j, "modulus", c.modulus);
  read(j, "out", c.out);
  if (j.contains("task_mix")) {
    c.task_mix.clear();
    for (auto it = j["task_mix"].begin(); it != j["task_mix"].end(); ++it)
      c.task_mix[std::stoi(it.key())] = it.value().get<double>();
  }
  if (j.contains("context")) {
    const auto& s = j["context"];
    detail::reject_unknown(s, {"order", "aligned"}, "context");
    read(s, "order", c.context.order);
    read(s, "aligned", c.context.aligned);
  }
  if (j.contains("sft")) {
    const auto& s = j["sft"];
    detail::reject_unknown(s, {"epochs", "learning_rate", "batch_size", "dataset_size", "momentum"}, "sft");
    read(s, "epochs", c.sft.epochs);
    read(s, "learning_rate", c.sft.learning_rate);
    read(s, "batch_size", c.sft.batch_size);
    read(s, "dataset_size", c.sft.dataset_size);
    read(s, "momentum", c.sft.momentum);
  }
  if (j.contains("reward")) {
    const auto& s = j["reward"];
    detail::reject_unknown(s, {"alpha", "outcome_weight", "structure_bonus", "t_max", "softmax_enabled"},
                           "reward");
    read(s, "alpha", c.reward.alpha);
    read(s, "outcome_weight", c.reward.outcome_weight);
    read(s, "structure_bonus", c.reward.structure_bonus);
    read(s, "t_max", c.reward.t_max);
    read(s, "softmax_enabled", c.reward.softmax_enabled);
  }
  if (j.contains("rl")) {
    const auto& s = j["rl"];
    detail::reject_unknown(s, {"clip_eps", "kl_coeff", "optimizer", "learning_rate", "momentum",
                               "weight_decay", "steps", "groups_per_step", "token_norm",
                               "include_plan_tokens", "inner_updates", "checkpoint_every",
                               "temperature", "top_p"},
                           "rl");
    read(s, "clip_eps", c.rl.clip_eps);
    read(s, "kl_coeff", c.rl.kl_coeff);
    if (s.contains("optimizer")) c.rl.optimizer.kind = optimizer_kind_from_string(s["optimizer"].get<std::string>());
    read(s, "learning_rate", c.rl.optimizer.learning_rate);
    read(s, "momentum", c.rl.optimizer.momentum);
    read(s, "weight_decay", c.rl.optimizer.weight_decay);
    read(s, "steps", c.rl.steps);
    read(s, "groups_per_step", c.rl.groups_per_step);
    if (s.contains("token_norm")) c.rl.token_norm = token_norm_from_string(s["token_norm"].get<std::string>());
    read(s, "include_plan_tokens", c.rl.include_plan_tokens);
    read(s, "inner_updates", c.rl.inner_updates);
    read(s, "checkpoint_every", c.rl.checkpoint_every);
    read(s, "temperature", c.rl.rollout.temperature);
    read(s, "top_p", c.rl.rollout.top_p);
  }
  if (j.contains("rollout")) {
    const auto& s = j["rollout"];
    detail::reject_unknown(s, {"m", "z", "max_plan_len", "max_len"}, "rollout");
    read(s, "m", c.rl.m);
    read(s, "z", c.rl.z);
    read(s, "max_plan_len", c.rl.limits.max_plan_len);
    read(s, "max_len", c.rl.limits.max_len);
  }
  if (j.contains("eval")) {
    const auto& s = j["eval"];
    detail::reject_unknown(s, {"heldout_tasks", "n_samples", "k_list", "temperature", "top_p",
                               "ablation_samples", "eval_every"},
                           "eval");
    read(s, "heldout_tasks", c.heldout_tasks);
    read(s, "n_samples", c.eval.n_samples);
    read(s, "k_list", c.eval.k_list);
    read(s, "temperature", c.eval.sampling.temperature);
    read(s, "top_p", c.eval.sampling.top_p);
    read(s, "ablation_samples", c.eval.ablation_samples);
    read(s, "eval_every", c.eval_every);
  }
  if (j.contains("ablation")) {
    const auto& s = j["ablation"];
    detail::reject_unknown(s, {"disable_analytic", "disable_format", "skip_sft"}, "ablation");
    read(s, "disable_analytic", c.ablation.disable_analytic);
    read(s, "disable_format", c.ablation.disable_format);
    read(s, "skip_sft", c.ablation.skip_sft);
  }
  if (j.contains("stages")) {
    const auto& s = j["stages"];
    detail::reject_unknown(s, {"gen_data", "sft", "rl", "eval", "theory_check"}, "stages");
    read(s, "gen_data", c.stages.gen_data);
    read(s, "sft", c.stages.sft);
    read(s, "rl", c.stages.rl);
    read(s, "eval", c.stages.eval);
    read(s, "theory_check", c.stages.theory_check);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// Hash of the canonical form (keys sorted, output directory excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("out");
  return hex64(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Pipeline

struct Snapshot {
  std::string label;
  EvalReport report;
  FanoReport fano;
};

struct RunSummary {
  std::filesystem::path dir;
  std::vector<double> sft_loss;
  std::vector<MetricsRow> metrics;
  std::vector<Snapshot> snapshots;
  std::optional<EvalReport> sft_report;
  std::optional<EvalReport> final_report;
  PolicyTable final_policy;
};

struct StageError : public Error {
  std::string stage;
  StageError(std::string stage_, const std::string& msg)
      : Error("stage " + stage_ + ": " + msg), stage(std::move(stage_)) {}
};

// Held-out tasks never share a question with the cold-start dataset the config
// describes; RL streams in turn skip the held-out questions.
inline std::vector<Task> heldout_tasks(const ExperimentConfig& c) {
  std::set<TokenSeq> exclude;
  for (const auto& r : build_dataset(c.seed, c.sft.dataset_size, c.task_mix, c.modulus))
    exclude.insert(r.task.question);
  TaskStream stream(c.seed ^ 0x4E1D07ull, c.task_mix, c.modulus, &exclude);
  std::vector<Task> out;
  while (static_cast<int>(out.size()) < c.heldout_tasks) out.push_back(stream.next());
  return out;
}

inline std::set<TokenSeq> questions_of(std::span<const Task> tasks) {
  std::set<TokenSeq> out;
  for (const auto& t : tasks) out.insert(t.question);
  return out;
}

inline TaskStream rl_task_stream(const ExperimentConfig& c, const std::set<TokenSeq>& exclude) {
  return TaskStream(c.seed ^ 0x71A1u, c.task_mix, c.modulus, &exclude);
}

namespace detail {
inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  os << s;
}

inline nlohmann::json snapshot_json(const Snapshot& s) {
  return {{"label", s.label}, {"eval", report_json(s.report)}, {"fano", fano_json(s.fano)}};
}
}  // namespace detail

// gen-data -> sft -> rl -> eval -> theory-check inside <out>/run-<hash>.
inline RunSummary run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  RunSummary sum;
  sum.dir = fs::path(cfg.out) / ("run-" + config_hash(cfg));
  fs::create_directories(sum.dir);
  detail::write_text(sum.dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  detail::write_text(sum.dir / "vocab.json", Vocab::standard().manifest().dump(2) + "\n");

  auto stage = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  std::vector<ColdStartRecord> dataset;
  std::vector<Task> heldout;
  std::set<TokenSeq> heldout_questions;
  stage("gen-data", [&] {
    dataset = build_dataset(cfg.seed, cfg.sft.dataset_size, cfg.task_mix, cfg.modulus);
    heldout = heldout_tasks(cfg);
    heldout_questions = questions_of(heldout);
    if (!cfg.stages.gen_data) return;
    std::ofstream os(sum.dir / "dataset.jsonl");
    write_dataset_jsonl(os, dataset);
    std::ofstream hs(sum.dir / "heldout.jsonl");
    write_tasks_jsonl(hs, heldout);
  });

  const EvalSpec espec = cfg.effective_eval();
  PolicyTable policy(tok::count, cfg.context, 1.0);
  save_policy(policy, (sum.dir / "init_checkpoint.json").string());

  auto snapshot = [&](const std::string& label, const PolicyTable& p, bool with_ablation,
                      const std::string& trace_file) {
    Snapshot s;
    s.label = label;
    std::ofstream trace;
    if (!trace_file.empty()) trace.open(sum.dir / trace_file);
    s.report = evaluate(p, heldout, espec, [&](const EvalSample& e) {
      if (trace.is_open()) trace << sample_json(e).dump() << '\n';
    });
    if (with_ablation) s.report.plan_modes = plan_ablation_eval(p, heldout, espec, cfg.modulus);
    s.fano = fano_check(s.report.counts);
    sum.snapshots.push_back(s);
    detail::write_text(sum.dir / ("eval_" + label + ".json"), detail::snapshot_json(s).dump(2) + "\n");
    return s.report;
  };

  const bool run_sft = cfg.stages.sft && !cfg.ablation.skip_sft;
  stage("sft", [&] {
    if (!run_sft) return;
    SftConfig sc = cfg.sft;
    sc.shuffle_seed = cfg.seed;
    sum.sft_loss = sft_train(policy, dataset, sc).loss_trace;
    save_policy(policy, (sum.dir / "sft_checkpoint.json").string());
    std::ostringstream os;
    os << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < sum.sft_loss.size(); ++e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, sum.sft_loss[e]);
      os << buf;
    }
    detail::write_text(sum.dir / "sft_loss.csv", os.str());
  });

  stage("eval", [&] {
    if (!cfg.stages.eval) return;
    sum.sft_report = snapshot(run_sft ? "sft" : "init", policy, true, "");
  });

  stage("rl", [&] {
    if (!cfg.stages.rl) return;
    auto stream = rl_task_stream(cfg, heldout_questions);
    fs::create_directories(sum.dir / "checkpoints");
    std::ofstream metrics_os(sum.dir / "rl_metrics.csv");
    metrics_os << kMetricsHeader << '\n';
    RlHooks hooks;
    hooks.after_step = [&](int step, const PolicyTable& p) {
      if (cfg.rl.checkpoint_every > 0 && step % cfg.rl.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "step_%05d.json", step);
        save_policy(p, (sum.dir / "checkpoints" / name).string());
      }
      if (cfg.stages.eval && cfg.eval_every > 0 && step % cfg.eval_every == 0 && step < cfg.rl.steps)
        snapshot("step_" + std::to_string(step), p, false, "");
    };
    auto res = rl_train(policy, stream, cfg.effective_reward(), cfg.rl, cfg.seed, hooks);
    sum.metrics = std::move(res.metrics);
    for (const auto& row : sum.metrics) write_metrics_row(metrics_os, row);
  });
  save_policy(policy, (sum.dir / "final_checkpoint.json").string());

  stage("eval", [&] {
    if (!cfg.stages.eval || !cfg.stages.rl) return;
    sum.final_report = snapshot("final", policy, true, "eval_rollouts.jsonl");
  });

  stage("theory-check", [&] {
    if (!cfg.stages.theory_check) return;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : sum.snapshots) {
      auto f = fano_json(s.fano);
      f["label"] = s.label;
      arr.push_back(f);
    }
    detail::write_text(sum.dir / "theory_report.json", arr.dump(2) + "\n");
  });

  sum.final_policy = std::move(policy);
  return sum;
}

// ---------------------------------------------------------------------------
// Ablations

struct AblationRun {
  std::string variant;
  ExperimentConfig config;
  double initial_accuracy = 0;  // SFT checkpoint, or random init when SFT is skipped
  double final_accuracy = 0;
  double final_mean_length = 0;  // last metrics row
  std::filesystem::path dir;
};

inline std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  ExperimentConfig full = base;
  full.ablation = {};
  out.emplace_back("full", full);
  auto v = full;
  v.ablation.disable_analytic = true;
  out.emplace_back("no_analytic", v);
  v = full;
  v.ablation.disable_format = true;
  out.emplace_back("no_format", v);
  v = full;
  v.reward.alpha = 0.0;
  out.emplace_back("no_length", v);
  v = full;
  v.ablation.skip_sft = true;
  out.emplace_back("no_sft", v);
  return out;
}

inline AblationRun summarize_run(const std::string& variant, const ExperimentConfig& cfg, const RunSummary& s) {
  AblationRun r;
  r.variant = variant;
  r.config = cfg;
  r.dir = s.dir;
  if (s.sft_report) r.initial_accuracy = s.sft_report->accuracy;
  if (s.final_report) r.final_accuracy = s.final_report->accuracy;
  if (!s.metrics.empty()) r.final_mean_length = s.metrics.back().mean_length;
  return r;
}

inline nlohmann::json ablation_json(std::span<const AblationRun> runs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs)
    arr.push_back({{"variant", r.variant},
                   {"seed", r.config.seed},
                   {"initial_accuracy", r.initial_accuracy},
                   {"final_accuracy", r.final_accuracy},
                   {"final_mean_length", r.final_mean_length},
                   {"run_dir", r.dir.string()}});
  return arr;
}

inline std::vector<AblationRun> run_ablations(const ExperimentConfig& base) {
  std::vector<AblationRun> out;
  for (const auto& [name, cfg] : ablation_variants(base)) out.push_back(summarize_run(name, cfg, run_pipeline(cfg)));
  std::filesystem::create_directories(base.out);
  detail::write_text(std::filesystem::path(base.out) / ("ablation-" + config_hash(base) + ".json"),
                     ablation_json(out).dump(2) + "\n");
  return out;
}

// Joint counts from a rollout or evaluation trace (one JSON object per line).
inline JointCounts counts_from_rollouts(std::istream& is) {
  JointCounts jc;
  std::string line;
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::optional<int> answer;
      if (!j.at("answer").is_null()) answer = j.at("answer").get<int>();
      jc.add(j.at("question").get<TokenSeq>(), j.at("plan").get<TokenSeq>(), answer, j.at("truth").get<int>());
    } catch (const nlohmann::json::exception& e) {
      throw Error("rollout line " + std::to_string(row) + ": " + e.what());
    }
  }
  if (jc.total() == 0) throw Error("rollout file has no records");
  return jc;
}

// ---------------------------------------------------------------------------
// Plot-ready series

struct MetricsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;  // original text of every field
  std::vector<std::vector<double>> values;
};

inline MetricsTable read_metrics_csv(std::istream& is) {
  MetricsTable t;
  std::string line;
  int row = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
  };
  if (!std::getline(is, line)) throw Error("metrics CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  if (t.header.empty() || t.header[0] != "step") throw Error("metrics CSV row 1: header must start with 'step'");
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != t.header.size())
      throw Error("metrics CSV row " + std::to_string(row + 1) + ": expected " +
                  std::to_string(t.header.size()) + " fields, got " + std::to_string(f.size()));
    std::vector<double> v;
    for (const auto& x : f) {
      std::size_t used = 0;
      double d = 0;
      try {
        d = std::stod(x, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != x.size() || !std::isfinite(d))
        throw Error("metrics CSV row " + std::to_string(row + 1) + ": non-numeric field '" + x + "'");
      v.push_back(d);
    }
    t.cells.push_back(std::move(f));
    t.values.push_back(std::move(v));
  }
  if (t.values.empty()) throw Error("metrics CSV has no data rows");
  return t;
}

struct PlotPanel {
  const char* name;
  const char* column;
  const char* title;
};

inline constexpr PlotPanel kPlotPanels[] = {
    {"accuracy_reward", "mean_outcome", "Accuracy reward"},
    {"policy_entropy", "policy_entropy", "Policy entropy"},
    {"response_length", "mean_length", "Response length"},
};

inline std::string render_svg(const std::string& title, const std::vector<std::string>& steps,
                              const std::vector<std::string>& values,
                              const std::vector<double>& xs, const std::vector<double>& ys) {
  const double w = 640, h = 360, pad = 40;
  const auto [xlo, xhi] = std::minmax_element(xs.begin(), xs.end());
  const auto [ylo, yhi] = std::minmax_element(ys.begin(), ys.end());
  const double xr = *xhi - *xlo > 0 ? *xhi - *xlo : 1.0;
  const double yr = *yhi - *ylo > 0 ? *yhi - *ylo : 1.0;
  auto px = [&](double x) { return pad + (x - *xlo) / xr * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - (y - *ylo) / yr * (h - 2 * pad); };
  std::ostringstream os;
  char buf[128];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n";
  os << "  <title>" << title << "</title>\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"360\" fill=\"white\"/>\n";
  os << "  <text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  os << "  <path fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" d=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.3f %.3f", i == 0 ? "M" : " L", px(xs[i]), py(ys[i]));
    os << buf;
  }
  os << "\"/>\n  <g class=\"data\">\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "cx=\"%.3f\" cy=\"%.3f\"", px(xs[i]), py(ys[i]));
    os << "    <circle " << buf << " r=\"1.5\" data-step=\"" << steps[i] << "\" data-value=\"" << values[i]
       << "\"/>\n";
  }
  os << "  </g>\n</svg>\n";
  return os.str();
}

// One `<panel>.csv` series and one `<panel>.svg` chart per training-dynamics panel.
inline std::vector<std::filesystem::path> emit_plots(const std::string& metrics_csv,
                                                     const std::filesystem::path& out_dir) {
  std::ifstream is(metrics_csv);
  if (!is) throw Error("cannot read " + metrics_csv);
  const auto table = read_metrics_csv(is);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& panel : kPlotPanels) {
    const auto it = std::find(table.header.begin(), table.header.end(), panel.column);
    if (it == table.header.end()) throw Error(std::string("metrics CSV lacks column ") + panel.column);
    const auto col = static_cast<std::size_t>(it - table.header.begin());
    std::vector<std::string> steps, vals;
    std::vector<double> xs, ys;
    std::ostringstream series;
    series << "step," << panel.column << '\n';
    for (std::size_t r = 0; r < table.values.size(); ++r) {
      steps.push_back(table.cells[r][0]);
      vals.push_back(table.cells[r][col]);
      xs.push_back(table.values[r][0]);
      ys.push_back(table.values[r][col]);
      series << table.cells[r][0] << ',' << table.cells[r][col] << '\n';
    }
    const auto csv_path = out_dir / (std::string(panel.name) + ".csv");
    const auto svg_path = out_dir / (std::string(panel.name) + ".svg");
    detail::write_text(csv_path, series.str());
    detail::write_text(svg_path, render_svg(panel.title, steps, vals, xs, ys));
    written.push_back(csv_path);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace ptagrpo
