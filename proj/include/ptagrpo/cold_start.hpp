#pragma once

#include <algorithm>
#include <functional>
#include <thread>

#include "optimizer.hpp"

namespace ptagrpo {

// One supervised example: question q, plan t and reasoning c (think and
// answer spans). `serialized` is q followed by the tagged response and <eos>.
struct ColdStartRecord {
  Task task;
  TaggedResponse tagged;
  TokenSeq serialized;

  std::span<const Token> question() const { return task.question; }
  std::span<const Token> plan() const { return tagged.plan; }
  // Tagged tokens after </plan>: <think> ... </answer>.
  TokenSeq reasoning() const {
    return TokenSeq(tagged.raw.begin() + static_cast<std::ptrdiff_t>(tagged.plan.size() + 2),
                    tagged.raw.end());
  }
  // Supervised targets: everything after the question.
  std::span<const Token> targets() const {
    return std::span<const Token>(serialized).subspan(task.question.size());
  }
};

inline ColdStartRecord make_record(const Task& task, int modulus = 10) {
  ColdStartRecord r;
  r.task = task;
  r.tagged = oracle_plan_and_cot(task, modulus);
  r.serialized = task.question;
  r.serialized.insert(r.serialized.end(), r.tagged.raw.begin(), r.tagged.raw.end());
  r.serialized.push_back(tok::eos);
  return r;
}

inline std::vector<ColdStartRecord> build_dataset(std::uint64_t seed, int n,
                                                  const DifficultyMix& mix, int modulus = 10) {
  if (n < 1) throw ConfigError("dataset size must be at least 1");
  check_mix(mix);
  std::vector<ColdStartRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, 0xC0FD, static_cast<std::uint64_t>(i));
    const int d = sample_difficulty(mix, rng);
    out.push_back(make_record(generate_task(rng.next(), d, modulus), modulus));
  }
  return out;
}

struct SftConfig {
  int epochs = 300;
  double learning_rate = 100.0;  // the loss is a mean over records, so per-row steps are small
  int batch_size = 500;
  int dataset_size = 500;
  double momentum = 0.0;
  int threads = 1;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (epochs < 0) throw ConfigError("sft.epochs must be nonnegative");
    if (!(learning_rate >= 0)) throw ConfigError("sft.learning_rate must be nonnegative");
    if (batch_size < 1 || dataset_size < 1) throw ConfigError("sft sizes must be positive");
    if (threads < 1) throw ConfigError("sft.threads must be positive");
  }
};

// -sum_t log pi(target_t | q, targets_<t), question tokens masked.
inline double sft_loss(const PolicyTable& policy, const ColdStartRecord& rec) {
  const SamplingParams sp{policy.temperature(), 1.0};
  std::span<const Token> seq(rec.serialized);
  double loss = 0;
  for (std::size_t t = rec.task.question.size(); t < seq.size(); ++t)
    loss -= log_prob(policy, policy.key(seq.first(t)), seq[t], sp);
  return loss;
}

inline double mean_sft_loss(const PolicyTable& policy, std::span<const ColdStartRecord> data) {
  double s = 0;
  for (const auto& r : data) s += sft_loss(policy, r);
  return s / static_cast<double>(data.size());
}

// Gradient of the summed loss over `data` (not averaged).
inline void accumulate_sft_gradient(const PolicyTable& policy, std::span<const ColdStartRecord> data,
                                    SparseGrad& out) {
  const double temp = policy.temperature();
  for (const auto& rec : data) {
    std::span<const Token> seq(rec.serialized);
    for (std::size_t t = rec.task.question.size(); t < seq.size(); ++t) {
      const ContextKey k = policy.key(seq.first(t));
      const auto g = row_grad_log_prob(policy.row(k), seq[t], temp);
      auto& d = out[k];
      if (d.empty()) d.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  }
}

// Gradient of the mean loss over `batch`. With threads > 1 the batch is split
// into contiguous chunks whose partial sums are merged in chunk order.
inline SparseGrad sft_gradient(const PolicyTable& policy, std::span<const ColdStartRecord> batch,
                               int threads = 1) {
  SparseGrad total;
  const auto n = batch.size();
  if (threads <= 1 || n < 2) {
    accumulate_sft_gradient(policy, batch, total);
  } else {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<SparseGrad> parts(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const auto lo = n * w / workers, hi = n * (w + 1) / workers;
      pool.emplace_back([&, w, lo, hi] {
        accumulate_sft_gradient(policy, batch.subspan(lo, hi - lo), parts[w]);
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& p : parts) add_scaled(total, p, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& [k, r] : total)
    for (double& x : r) x *= inv;
  return total;
}

struct SftResult {
  std::vector<double> loss_trace;  // mean loss over the dataset after each epoch
};

inline SftResult sft_train(PolicyTable& policy, std::span<const ColdStartRecord> data,
                           const SftConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error("sft_train needs a nonempty dataset");
  Optimizer opt({OptimizerKind::sgd, cfg.learning_rate, cfg.momentum});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derive(cfg.shuffle_seed, 0x5F7);
  SftResult res;
  std::vector<ColdStartRecord> batch;
  for (int e = 0; e < cfg.epochs; ++e) {
    if (static_cast<std::size_t>(cfg.batch_size) < data.size()) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(static_cast<int>(i)))]);
    }
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (auto i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const auto g = sft_gradient(policy, batch, cfg.threads);
      for (const auto& [k, r] : g)
        for (double x : r)
          if (!std::isfinite(x)) throw Error("sft: non-finite gradient in epoch " + std::to_string(e));
      opt.descend(policy, g);
    }
    const double loss = mean_sft_loss(policy, data);
    if (!std::isfinite(loss))
      throw Error("sft: non-finite loss after epoch " + std::to_string(e));
    res.loss_trace.push_back(loss);
  }
  return res;
}

inline nlohmann::json record_to_json(const ColdStartRecord& r) {
  const auto& v = Vocab::standard();
  return {{"question", r.task.question},
          {"truth", r.task.truth},
          {"difficulty", r.task.difficulty},
          {"plan", r.tagged.plan},
          {"reasoning", r.reasoning()},
          {"serialized", r.serialized},
          {"text", v.render(r.serialized)}};
}

inline ColdStartRecord record_from_json(const nlohmann::json& j) {
  Task t;
  t.question = j.at("question").get<TokenSeq>();
  t.truth = j.at("truth").get<int>();
  t.difficulty = j.at("difficulty").get<int>();
  ColdStartRecord r;
  r.task = t;
  r.serialized = j.at("serialized").get<TokenSeq>();
  for (Token x : r.serialized) Vocab::standard().check(x);
  if (r.serialized.size() < t.question.size() + 1 ||
      !std::equal(t.question.begin(), t.question.end(), r.serialized.begin()))
    throw Error("record serialization does not start with its question");
  std::span<const Token> tail(r.serialized);
  tail = tail.subspan(t.question.size());
  if (!tail.empty() && tail.back() == tok::eos) tail = tail.first(tail.size() - 1);
  r.tagged = parse_tagged(tail);
  if (!r.tagged.well_formed) throw Error("record tagged part is malformed");
  return r;
}

inline void write_dataset_jsonl(std::ostream& os, std::span<const ColdStartRecord> data) {
  for (const auto& r : data) os << record_to_json(r).dump() << '\n';
}

inline std::vector<ColdStartRecord> read_dataset_jsonl(std::istream& is) {
  std::vector<ColdStartRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(record_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace ptagrpo
