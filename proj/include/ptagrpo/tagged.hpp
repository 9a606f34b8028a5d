#pragma once

#include <optional>
#include <span>

#include "vocab.hpp"

namespace ptagrpo {

// A response segmented by the plan/think/answer grammar. `raw` never includes
// the question or a trailing end-of-sequence token.
struct TaggedResponse {
  TokenSeq plan;
  TokenSeq think;
  TokenSeq answer;
  TokenSeq raw;
  bool well_formed = false;
  std::optional<int> prediction;

  bool operator==(const TaggedResponse&) const = default;
};

// Integer value of a span made only of digits; empty or mixed spans have none.
inline std::optional<int> decode_number(std::span<const Token> span) {
  if (span.empty() || span.size() > 9) return std::nullopt;
  int v = 0;
  for (Token t : span) {
    if (!tok::is_digit(t)) return std::nullopt;
    v = v * 10 + t;
  }
  return v;
}

inline TokenSeq encode_number(int value) {
  if (value < 0) throw Error("cannot encode negative number");
  TokenSeq out;
  do {
    out.insert(out.begin(), value % 10);
    value /= 10;
  } while (value > 0);
  return out;
}

// Pure function of `raw`. Malformed input produces well_formed == false with
// whatever spans could be located; it never throws.
inline TaggedResponse parse_tagged(std::span<const Token> raw) {
  TaggedResponse r;
  r.raw.assign(raw.begin(), raw.end());

  std::array<std::optional<std::size_t>, 6> pos{};
  bool duplicate = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!tok::is_tag(raw[i])) continue;
    auto slot = static_cast<std::size_t>(raw[i] - tok::plan_open);
    if (pos[slot]) duplicate = true;
    else pos[slot] = i;
  }

  auto span_between = [&](std::size_t open, std::size_t close) -> TokenSeq {
    if (!pos[open] || !pos[close] || *pos[close] < *pos[open]) return {};
    return TokenSeq(raw.begin() + static_cast<std::ptrdiff_t>(*pos[open] + 1),
                    raw.begin() + static_cast<std::ptrdiff_t>(*pos[close]));
  };
  r.plan = span_between(0, 1);
  r.think = span_between(2, 3);
  r.answer = span_between(4, 5);

  bool ok = !duplicate && !raw.empty();
  for (std::size_t s = 0; ok && s < 6; ++s) {
    if (!pos[s]) ok = false;
    else if (s > 0 && *pos[s] <= *pos[s - 1]) ok = false;
  }
  if (ok) {
    // Tags must be adjacent between spans: </plan><think> and </think><answer>,
    // and the sequence must start and end on tags.
    ok = *pos[0] == 0 && *pos[2] == *pos[1] + 1 && *pos[4] == *pos[3] + 1 &&
         *pos[5] == raw.size() - 1;
  }
  r.well_formed = ok;
  if (ok) r.prediction = decode_number(r.answer);
  return r;
}

inline TokenSeq serialize_tagged(std::span<const Token> plan, std::span<const Token> think,
                                 std::span<const Token> answer) {
  TokenSeq out;
  out.reserve(plan.size() + think.size() + answer.size() + 6);
  out.push_back(tok::plan_open);
  out.insert(out.end(), plan.begin(), plan.end());
  out.push_back(tok::plan_close);
  out.push_back(tok::think_open);
  out.insert(out.end(), think.begin(), think.end());
  out.push_back(tok::think_close);
  out.push_back(tok::answer_open);
  out.insert(out.end(), answer.begin(), answer.end());
  out.push_back(tok::answer_close);
  return out;
}

inline TokenSeq serialize_tagged(const TaggedResponse& r) {
  return serialize_tagged(r.plan, r.think, r.answer);
}

}  // namespace ptagrpo
