#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "rng.hpp"
#include "tagged.hpp"

namespace ptagrpo {

inline constexpr int kMinDifficulty = 2;
inline constexpr int kMaxDifficulty = 4;

// Question tokens are `a1 op1 a2 [op2 a3 [op3 a4]] <sep>`, evaluated left to
// right and reduced modulo `modulus`.
struct Task {
  TokenSeq question;
  int truth = 0;
  int difficulty = 2;

  bool operator==(const Task&) const = default;
};

inline int reduce_mod(long long v, int modulus) {
  long long r = v % modulus;
  if (r < 0) r += modulus;
  return static_cast<int>(r);
}

inline int apply_op(Token op, int lhs, int rhs) {
  switch (op) {
    case tok::plus: return lhs + rhs;
    case tok::minus: return lhs - rhs;
    case tok::times: return lhs * rhs;
    default: throw Error("not an arithmetic operator: " + std::to_string(op));
  }
}

inline void check_modulus(int modulus) {
  if (modulus < 2 || modulus > 10)
    throw ConfigError("modulus must lie in [2, 10] so every value is one digit token");
}

// Operand and operator tokens of a question, in order. Stops at the separator.
struct ParsedQuestion {
  std::vector<int> operands;
  std::vector<Token> operators;
};

inline ParsedQuestion parse_question(std::span<const Token> question) {
  ParsedQuestion pq;
  for (Token t : question) {
    if (t == tok::sep) break;
    if (tok::is_digit(t)) pq.operands.push_back(t);
    else if (tok::is_operator(t)) pq.operators.push_back(t);
  }
  return pq;
}

// Values after each binary operation, each reduced modulo `modulus`.
inline std::vector<int> intermediate_values(std::span<const Token> question, int modulus) {
  const auto pq = parse_question(question);
  if (pq.operands.size() != pq.operators.size() + 1 || pq.operators.empty())
    throw Error("malformed question");
  std::vector<int> values;
  int acc = reduce_mod(pq.operands[0], modulus);
  for (std::size_t i = 0; i < pq.operators.size(); ++i) {
    acc = reduce_mod(apply_op(pq.operators[i], acc, pq.operands[i + 1]), modulus);
    values.push_back(acc);
  }
  return values;
}

inline Task make_task(std::span<const int> operands, std::span<const Token> operators,
                      int modulus = 10) {
  check_modulus(modulus);
  if (operands.size() != operators.size() + 1) throw Error("operand/operator count mismatch");
  const int difficulty = static_cast<int>(operands.size());
  if (difficulty < kMinDifficulty || difficulty > kMaxDifficulty)
    throw Error("unsupported difficulty " + std::to_string(difficulty));
  Task t;
  t.difficulty = difficulty;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    if (operands[i] < 0 || operands[i] > 9) throw Error("operands must be single digits");
    t.question.push_back(operands[i]);
    if (i < operators.size()) {
      if (!tok::is_operator(operators[i])) throw Error("invalid operator token");
      t.question.push_back(operators[i]);
    }
  }
  t.question.push_back(tok::sep);
  // Exact evaluation over the integers, then one reduction.
  long long acc = operands[0];
  for (std::size_t i = 0; i < operators.size(); ++i)
    acc = apply_op(operators[i], static_cast<int>(acc), operands[i + 1]);
  t.truth = reduce_mod(acc, modulus);
  return t;
}

inline Task generate_task(std::uint64_t seed, int difficulty, int modulus = 10) {
  if (difficulty < kMinDifficulty || difficulty > kMaxDifficulty)
    throw Error("unsupported difficulty " + std::to_string(difficulty) + " (expected 2, 3 or 4)");
  static constexpr Token ops[3] = {tok::plus, tok::minus, tok::times};
  Rng rng = Rng::derive(seed, 0x7a5c, static_cast<std::uint64_t>(difficulty));
  std::vector<int> operands;
  std::vector<Token> operators;
  for (int i = 0; i < difficulty; ++i) {
    operands.push_back(rng.below(10));
    if (i + 1 < difficulty) operators.push_back(ops[rng.below(3)]);
  }
  return make_task(operands, operators, modulus);
}

// Normalized difficulty -> weight mix.
using DifficultyMix = std::map<int, double>;

inline void check_mix(const DifficultyMix& mix) {
  if (mix.empty()) throw ConfigError("difficulty mix is empty");
  double total = 0;
  for (auto [d, w] : mix) {
    if (d < kMinDifficulty || d > kMaxDifficulty)
      throw ConfigError("unsupported difficulty " + std::to_string(d) + " in mix");
    if (!(w >= 0)) throw ConfigError("difficulty weights must be nonnegative");
    total += w;
  }
  if (!(total > 0)) throw ConfigError("difficulty mix has zero total weight");
}

inline int sample_difficulty(const DifficultyMix& mix, Rng& rng) {
  double total = 0;
  for (auto [d, w] : mix) total += w;
  double u = rng.uniform() * total;
  int last = mix.begin()->first;
  for (auto [d, w] : mix) {
    if (w <= 0) continue;
    last = d;
    if (u < w) return d;
    u -= w;
  }
  return last;
}

// Parses "2:0.5,3:0.5".
inline DifficultyMix parse_mix(const std::string& text) {
  DifficultyMix mix;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const auto item = text.substr(start, end - start);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("bad difficulty mix entry '" + item + "'");
    try {
      mix[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("bad difficulty mix entry '" + item + "'");
    }
    start = end + 1;
  }
  check_mix(mix);
  return mix;
}

inline bool verify(const Task& task, const TaggedResponse& response) {
  return response.well_formed && response.prediction && *response.prediction == task.truth;
}

// Teacher stand-in: the plan is the operator schedule followed by the
// reduction, the reasoning lists every intermediate value.
inline TaggedResponse oracle_plan_and_cot(const Task& task, int modulus = 10) {
  const auto pq = parse_question(task.question);
  TokenSeq plan(pq.operators.begin(), pq.operators.end());
  plan.push_back(tok::mod);
  TokenSeq think;
  for (int v : intermediate_values(task.question, modulus)) {
    const auto digits = encode_number(v);
    think.insert(think.end(), digits.begin(), digits.end());
  }
  return parse_tagged(serialize_tagged(plan, think, encode_number(task.truth)));
}

inline nlohmann::json task_to_json(const Task& t) {
  return {{"question", t.question}, {"truth", t.truth}, {"difficulty", t.difficulty}};
}

inline Task task_from_json(const nlohmann::json& j) {
  Task t;
  t.question = j.at("question").get<TokenSeq>();
  t.truth = j.at("truth").get<int>();
  t.difficulty = j.at("difficulty").get<int>();
  for (Token x : t.question) {
    Vocab::standard().check(x);
    if (tok::is_tag(x) || x == tok::eos) throw Error("question contains a tag token");
  }
  const auto pq = parse_question(t.question);
  if (t.question.empty() || t.question.back() != tok::sep ||
      pq.operands.size() != pq.operators.size() + 1 ||
      static_cast<int>(pq.operands.size()) != t.difficulty)
    throw Error("malformed task question");
  if (t.truth < 0 || t.truth > 9) throw Error("task truth outside [0, 9]");
  return t;
}

inline void write_tasks_jsonl(std::ostream& os, std::span<const Task> tasks) {
  for (const auto& t : tasks) os << task_to_json(t).dump() << '\n';
}

inline std::vector<Task> read_tasks_jsonl(std::istream& is) {
  std::vector<Task> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(task_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace ptagrpo
