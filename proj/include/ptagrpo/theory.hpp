#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <tuple>

#include "vocab.hpp"

namespace ptagrpo {

// Shannon entropy in bits, 0 log 0 = 0.
inline double entropy_bits(std::span<const double> p) {
  double total = 0, h = 0;
  for (double x : p) {
    if (x < 0) throw Error("negative probability in entropy");
    total += x;
    if (x > 0) h -= x * std::log2(x);
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("probabilities do not sum to 1");
  return h;
}

// Count table over (question class, plan class, prediction, truth).
// A missing prediction is stored as -1 and never equals the truth.
class JointCounts {
 public:
  using Cell = std::tuple<int, int, int, int>;

  int question_class(const TokenSeq& q) { return intern(questions_, q); }
  int plan_class(const TokenSeq& t) { return intern(plans_, t); }

  void add(int q_class, int t_class, int prediction, int truth, long long n = 1) {
    if (n < 0) throw Error("counts must be nonnegative");
    cells_[{q_class, t_class, prediction, truth}] += n;
    total_ += n;
  }

  void add(const TokenSeq& question, const TokenSeq& plan, std::optional<int> prediction, int truth) {
    add(question_class(question), plan_class(plan), prediction.value_or(-1), truth);
  }

  // Merges a table built independently; classes are re-interned by content.
  void merge(const JointCounts& other) {
    std::map<int, int> qmap, tmap;
    for (const auto& [seq, id] : other.questions_) qmap[id] = question_class(seq);
    for (const auto& [seq, id] : other.plans_) tmap[id] = plan_class(seq);
    for (const auto& [c, n] : other.cells_) {
      auto [q, t, yh, y] = c;
      add(qmap.at(q), tmap.at(t), yh, y, n);
    }
  }

  long long total() const { return total_; }
  const std::map<Cell, long long>& cells() const { return cells_; }

 private:
  static int intern(std::map<TokenSeq, int>& m, const TokenSeq& s) {
    auto [it, inserted] = m.try_emplace(s, static_cast<int>(m.size()));
    return it->second;
  }

  std::map<TokenSeq, int> questions_;
  std::map<TokenSeq, int> plans_;
  std::map<Cell, long long> cells_;
  long long total_ = 0;
};

namespace detail {
inline double plogp_sum(const std::map<int, long long>& counts, double n) {
  double h = 0;
  for (const auto& [k, c] : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log2(p);
    }
  return h;
}
}  // namespace detail

// Plug-in entropy of the truth marginal, in bits.
inline double truth_entropy_bits(const JointCounts& jc) {
  std::map<int, long long> y;
  for (const auto& [c, n] : jc.cells()) y[std::get<3>(c)] += n;
  return detail::plogp_sum(y, static_cast<double>(jc.total()));
}

// Plug-in I(prediction; truth | question, plan) in bits.
inline double conditional_mutual_information(const JointCounts& jc) {
  if (jc.total() <= 0) throw Error("mutual information needs a nonempty table");
  struct Stratum {
    long long n = 0;
    std::map<int, long long> yh, y;
    std::map<std::pair<int, int>, long long> joint;
  };
  std::map<std::pair<int, int>, Stratum> strata;
  for (const auto& [c, n] : jc.cells()) {
    auto [q, t, yh, y] = c;
    auto& s = strata[{q, t}];
    s.n += n;
    s.yh[yh] += n;
    s.y[y] += n;
    s.joint[{yh, y}] += n;
  }
  const double total = static_cast<double>(jc.total());
  double mi = 0;
  for (const auto& [key, s] : strata) {
    const double ns = static_cast<double>(s.n);
    double local = 0;
    for (const auto& [pair, c] : s.joint) {
      if (c == 0) continue;
      const double pj = static_cast<double>(c) / ns;
      const double pa = static_cast<double>(s.yh.at(pair.first)) / ns;
      const double pb = static_cast<double>(s.y.at(pair.second)) / ns;
      local += pj * std::log2(pj / (pa * pb));
    }
    mi += (ns / total) * local;
  }
  return std::max(0.0, mi);
}

struct FanoReport {
  double p_error = 0;
  double h_y = 0;
  double mutual_information = 0;
  double bound = 0;
  double slack = 0;  // three standard errors of p_error
  long long samples = 0;
  bool holds = false;
};

inline nlohmann::json fano_json(const FanoReport& r) {
  return {{"p_error", r.p_error},     {"H_y", r.h_y},         {"I", r.mutual_information},
          {"bound", r.bound},         {"slack", r.slack},     {"samples", r.samples},
          {"holds", r.holds},         {"units", "bits"},
          {"slack_rule", "3 standard errors of the empirical error rate"}};
}

// Checks p_error <= (H(y) - I(yhat; y | q, t)) / 2 up to sampling slack.
inline FanoReport fano_check(const JointCounts& jc) {
  if (jc.total() <= 0) throw Error("fano_check needs a nonempty table");
  FanoReport r;
  r.samples = jc.total();
  long long wrong = 0;
  for (const auto& [c, n] : jc.cells())
    if (std::get<2>(c) != std::get<3>(c)) wrong += n;
  const double n = static_cast<double>(jc.total());
  r.p_error = static_cast<double>(wrong) / n;
  r.h_y = truth_entropy_bits(jc);
  r.mutual_information = conditional_mutual_information(jc);
  r.bound = 0.5 * (r.h_y - r.mutual_information);
  r.slack = 3.0 * std::sqrt(r.p_error * (1.0 - r.p_error) / n);
  r.holds = r.p_error <= r.bound + r.slack;
  return r;
}

// 1 - max_i p_i <= H(p) / 2, entropy in bits.
inline bool max_probability_lemma_holds(std::span<const double> p) {
  double pmax = 0;
  for (double x : p) pmax = std::max(pmax, x);
  return 1.0 - pmax <= 0.5 * entropy_bits(p) + 1e-12;
}

}  // namespace ptagrpo
