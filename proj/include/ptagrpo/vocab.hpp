#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ptagrpo {

using Token = int;
using TokenSeq = std::vector<Token>;

struct Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : public Error {
  using Error::Error;
};

// Fixed token ids. Digits map to themselves so arithmetic on answers stays trivial.
namespace tok {
inline constexpr Token plus = 10;
inline constexpr Token minus = 11;
inline constexpr Token times = 12;
inline constexpr Token mod = 13;
inline constexpr Token sep = 14;
inline constexpr Token eos = 15;
inline constexpr Token plan_open = 16;
inline constexpr Token plan_close = 17;
inline constexpr Token think_open = 18;
inline constexpr Token think_close = 19;
inline constexpr Token answer_open = 20;
inline constexpr Token answer_close = 21;
inline constexpr int count = 22;

constexpr bool is_digit(Token t) { return t >= 0 && t <= 9; }
constexpr bool is_tag(Token t) { return t >= plan_open && t <= answer_close; }
constexpr bool is_operator(Token t) { return t == plus || t == minus || t == times; }
}  // namespace tok

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

class Vocab {
 public:
  static const Vocab& standard() {
    static const Vocab v;
    return v;
  }

  int size() const { return static_cast<int>(symbols_.size()); }

  const std::string& symbol(Token t) const {
    check(t);
    return symbols_[static_cast<std::size_t>(t)];
  }

  Token id(std::string_view sym) const {
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      if (symbols_[i] == sym) return static_cast<Token>(i);
    throw Error("unknown symbol '" + std::string(sym) + "'");
  }

  bool valid(Token t) const { return t >= 0 && t < size(); }

  void check(Token t) const {
    if (!valid(t)) throw Error("token id " + std::to_string(t) + " outside vocabulary");
  }

  std::string render(std::span<const Token> seq) const {
    std::string out;
    for (Token t : seq) {
      if (!out.empty()) out += ' ';
      out += symbol(t);
    }
    return out;
  }

  // symbol -> id
  nlohmann::json manifest() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < symbols_.size(); ++i) j[symbols_[i]] = static_cast<int>(i);
    return j;
  }

  std::string manifest_hash() const { return hex64(fnv1a64(manifest().dump())); }

  static void check_manifest(const nlohmann::json& j) {
    const auto expected = standard().manifest();
    if (j != expected) throw Error("vocabulary manifest does not match the built-in vocabulary");
  }

 private:
  Vocab()
      : symbols_{"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "-", "*", "%", "<sep>",
                 "<eos>", "<plan>", "</plan>", "<think>", "</think>", "<answer>", "</answer>"} {}

  std::vector<std::string> symbols_;
};

}  // namespace ptagrpo
