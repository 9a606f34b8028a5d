#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "context.hpp"
#include "rng.hpp"

namespace ptagrpo {

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;
};

// Sparse gradient (or any per-row quantity) over logit rows.
using SparseGrad = std::map<ContextKey, std::vector<double>>;

inline void add_scaled(SparseGrad& dst, const SparseGrad& src, double scale) {
  for (const auto& [key, row] : src) {
    auto& d = dst[key];
    if (d.empty()) d.assign(row.size(), 0.0);
    for (std::size_t i = 0; i < row.size(); ++i) d[i] += scale * row[i];
  }
}

// Context-indexed logits of a tabular autoregressive softmax policy. Rows are
// materialized lazily; a missing row is all zeros (uniform distribution).
class PolicyTable {
 public:
  PolicyTable() : PolicyTable(tok::count, ContextSpec{}) {}

  PolicyTable(int vocab_size, ContextSpec spec, double temperature = 1.0)
      : vocab_size_(vocab_size), spec_(spec), temperature_(temperature),
        zeros_(static_cast<std::size_t>(vocab_size), 0.0) {
    check_context_spec(spec, vocab_size);
    if (!(temperature > 0) || !std::isfinite(temperature))
      throw ConfigError("temperature must be positive");
    vocab_hash_ = vocab_size == tok::count ? Vocab::standard().manifest_hash()
                                           : hex64(fnv1a64("generic:" + std::to_string(vocab_size)));
  }

  int vocab_size() const { return vocab_size_; }
  const ContextSpec& context_spec() const { return spec_; }
  double temperature() const { return temperature_; }
  void set_temperature(double t) {
    if (!(t > 0)) throw ConfigError("temperature must be positive");
    temperature_ = t;
  }
  const std::string& vocab_hash() const { return vocab_hash_; }

  ContextKey key(std::span<const Token> context) const {
    for (Token t : context)
      if (t < 0 || t >= vocab_size_)
        throw Error("token id " + std::to_string(t) + " outside vocabulary");
    return encode_context(spec_, context);
  }

  std::span<const double> row(ContextKey k) const {
    auto it = rows_.find(k);
    return it == rows_.end() ? std::span<const double>(zeros_) : std::span<const double>(it->second);
  }

  std::vector<double>& row_mut(ContextKey k) {
    auto [it, inserted] = rows_.try_emplace(k);
    if (inserted) it->second.assign(static_cast<std::size_t>(vocab_size_), 0.0);
    return it->second;
  }

  const std::unordered_map<ContextKey, std::vector<double>>& rows() const { return rows_; }

  std::vector<ContextKey> sorted_keys() const {
    std::vector<ContextKey> keys;
    keys.reserve(rows_.size());
    for (const auto& kv : rows_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  bool all_finite() const {
    for (const auto& [k, r] : rows_)
      for (double x : r)
        if (!std::isfinite(x)) return false;
    return true;
  }

  // Equality of the distributions the tables define (missing rows equal zero rows).
  bool same_parameters(const PolicyTable& other) const {
    if (vocab_size_ != other.vocab_size_ || !(spec_ == other.spec_)) return false;
    auto covered = [](const PolicyTable& a, const PolicyTable& b) {
      for (const auto& [k, r] : a.rows_) {
        auto o = b.row(k);
        for (std::size_t i = 0; i < r.size(); ++i)
          if (r[i] != o[i]) return false;
      }
      return true;
    };
    return covered(*this, other) && covered(other, *this);
  }

 private:
  int vocab_size_;
  ContextSpec spec_;
  double temperature_;
  std::string vocab_hash_;
  std::vector<double> zeros_;
  std::unordered_map<ContextKey, std::vector<double>> rows_;
};

enum class SnapshotRole { old_policy, reference };

// Frozen, shareable copy of a policy.
struct PolicySnapshot {
  std::shared_ptr<const PolicyTable> table;
  SnapshotRole role = SnapshotRole::old_policy;

  static PolicySnapshot take(const PolicyTable& p, SnapshotRole role) {
    return {std::make_shared<const PolicyTable>(p), role};
  }
  const PolicyTable& operator*() const { return *table; }
  const PolicyTable* operator->() const { return table.get(); }
};

// ---------------------------------------------------------------------------
// Distributions

inline std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> out(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double l : logits) z += std::exp((l - mx) / temperature);
  const double lz = std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - mx) / temperature - lz;
  return out;
}

// Keeps the smallest set of highest-probability entries whose mass reaches
// top_p and renormalizes. Ties break toward the lower token id.
inline void nucleus_truncate(std::vector<double>& p, double top_p) {
  if (top_p >= 1.0) return;
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  double mass = 0;
  std::size_t keep = 0;
  while (keep < idx.size()) {
    mass += p[idx[keep++]];
    if (mass >= top_p) break;
  }
  for (std::size_t i = keep; i < idx.size(); ++i) p[idx[i]] = 0.0;
  for (double& x : p) x /= mass;
}

inline std::vector<double> row_distribution(std::span<const double> row, const SamplingParams& sp) {
  auto p = softmax(row, sp.temperature);
  nucleus_truncate(p, sp.top_p);
  return p;
}

inline double row_log_prob(std::span<const double> row, Token token, const SamplingParams& sp) {
  if (sp.top_p >= 1.0) return log_softmax(row, sp.temperature)[static_cast<std::size_t>(token)];
  return std::log(row_distribution(row, sp)[static_cast<std::size_t>(token)]);
}

inline std::vector<double> token_distribution(const PolicyTable& policy,
                                              std::span<const Token> context,
                                              const SamplingParams& sp) {
  return row_distribution(policy.row(policy.key(context)), sp);
}

inline std::vector<double> token_distribution(const PolicyTable& policy,
                                              std::span<const Token> context) {
  return token_distribution(policy, context, SamplingParams{policy.temperature(), 1.0});
}

inline double log_prob(const PolicyTable& policy, ContextKey key, Token token,
                       const SamplingParams& sp) {
  return row_log_prob(policy.row(key), token, sp);
}

// Shannon entropy in nats of the untruncated distribution at `key`.
inline double row_entropy(const PolicyTable& policy, ContextKey key, double temperature = 1.0) {
  const auto lp = log_softmax(policy.row(key), temperature);
  double h = 0;
  for (double l : lp) h -= std::exp(l) * l;
  return h;
}

inline int sample_index(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double c = 0;
  int last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0) continue;
    c += p[i];
    last = static_cast<int>(i);
    if (u < c) return last;
  }
  return last;
}

struct SampledSequence {
  TokenSeq tokens;  // includes the stop token when one was emitted
  std::vector<double> log_probs;
  std::vector<ContextKey> contexts;
  bool stopped = false;
};

inline SampledSequence sample_sequence(const PolicyTable& policy, std::span<const Token> prefix,
                                       const std::unordered_set<Token>& stop, int max_len, Rng& rng,
                                       const SamplingParams& sp) {
  if (max_len < 1) throw Error("max_len must be at least 1");
  SampledSequence out;
  TokenSeq context(prefix.begin(), prefix.end());
  policy.key(context);  // validates the prefix
  for (int n = 0; n < max_len; ++n) {
    const ContextKey key = encode_context(policy.context_spec(), context);
    const auto row = policy.row(key);
    const auto p = row_distribution(row, sp);
    const Token t = sample_index(p, rng);
    out.tokens.push_back(t);
    out.log_probs.push_back(row_log_prob(row, t, sp));
    out.contexts.push_back(key);
    context.push_back(t);
    if (stop.contains(t)) {
      out.stopped = true;
      break;
    }
  }
  return out;
}

inline SampledSequence sample_sequence(const PolicyTable& policy, std::span<const Token> prefix,
                                       const std::unordered_set<Token>& stop, int max_len,
                                       Rng& rng) {
  return sample_sequence(policy, prefix, stop, max_len, rng, {policy.temperature(), 1.0});
}

// d log pi(token | context) / d logits[row]: (one_hot(token) - softmax(row / T)) / T.
inline std::vector<double> row_grad_log_prob(std::span<const double> row, Token token,
                                             double temperature) {
  auto g = softmax(row, temperature);
  for (double& x : g) x = -x / temperature;
  g[static_cast<std::size_t>(token)] += 1.0 / temperature;
  return g;
}

inline SparseGrad grad_log_prob(const PolicyTable& policy, std::span<const Token> context,
                                Token token) {
  if (token < 0 || token >= policy.vocab_size()) throw Error("token outside vocabulary");
  const ContextKey k = policy.key(context);
  SparseGrad g;
  g[k] = row_grad_log_prob(policy.row(k), token, policy.temperature());
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json policy_to_json(const PolicyTable& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (ContextKey k : p.sorted_keys()) {
    const auto r = p.row(k);
    rows.push_back({{"context", hex64(k)}, {"logits", std::vector<double>(r.begin(), r.end())}});
  }
  return {{"format", "ptagrpo-policy-v1"},
          {"vocab_hash", p.vocab_hash()},
          {"vocab_size", p.vocab_size()},
          {"order", p.context_spec().order},
          {"aligned", p.context_spec().aligned},
          {"temperature", p.temperature()},
          {"rows", rows}};
}

inline PolicyTable policy_from_json(const nlohmann::json& j,
                                    const std::string& expected_vocab_hash =
                                        Vocab::standard().manifest_hash()) {
  if (j.value("format", "") != "ptagrpo-policy-v1") throw Error("not a policy checkpoint");
  const auto hash = j.at("vocab_hash").get<std::string>();
  if (hash != expected_vocab_hash)
    throw Error("checkpoint vocabulary hash " + hash + " does not match " + expected_vocab_hash);
  PolicyTable p(j.at("vocab_size").get<int>(),
                ContextSpec{j.at("order").get<int>(), j.at("aligned").get<bool>()},
                j.at("temperature").get<double>());
  if (p.vocab_hash() != hash) throw Error("checkpoint vocabulary size inconsistent with its hash");
  for (const auto& r : j.at("rows")) {
    const auto key = std::stoull(r.at("context").get<std::string>(), nullptr, 16);
    auto logits = r.at("logits").get<std::vector<double>>();
    if (static_cast<int>(logits.size()) != p.vocab_size()) throw Error("logit row has wrong width");
    for (double x : logits)
      if (!std::isfinite(x)) throw Error("non-finite logit in checkpoint");
    p.row_mut(key) = std::move(logits);
  }
  return p;
}

inline void save_policy(const PolicyTable& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << policy_to_json(p).dump() << '\n';
}

inline PolicyTable load_policy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return policy_from_json(nlohmann::json::parse(is));
}

}  // namespace ptagrpo
