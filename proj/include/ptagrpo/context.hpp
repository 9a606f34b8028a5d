#pragma once

#include <cstdint>
#include <span>

#include "task.hpp"

namespace ptagrpo {

using ContextKey = std::uint64_t;

// How a prefix is reduced to a table row.
//
// `order` trailing tokens always participate (short prefixes are padded with a
// reserved begin marker). With `aligned` set, the key also carries the current
// grammar segment and three pointer features read from the question and plan
// spans at the current step:
//   plan step j:  the (j+1)-th operator of the question
//   think step j: the first operand (only at j == 0), operand j+2 of the
//                 question, and token j of the plan span
// Every field is packed into its own 5-bit slot, so the map prefix -> key is
// injective on the fields it reads.
struct ContextSpec {
  int order = 3;
  bool aligned = true;

  bool operator==(const ContextSpec&) const = default;
};

namespace ctx {
inline constexpr int kFieldBits = 5;
inline constexpr Token kBegin = 30;
inline constexpr Token kNone = 31;
inline constexpr int kMaxOrder = 8;
inline constexpr int kMaxVocab = 30;

enum Segment : int {
  kQuestion = 0,
  kAfterQuestion = 1,
  kPlan = 2,
  kAfterPlan = 3,
  kThink = 4,
  kAfterThink = 5,
  kAnswer = 6,
  kAfterAnswer = 7,
};

inline Segment segment_after_tag(Token tag) {
  switch (tag) {
    case tok::plan_open: return kPlan;
    case tok::plan_close: return kAfterPlan;
    case tok::think_open: return kThink;
    case tok::think_close: return kAfterThink;
    case tok::answer_open: return kAnswer;
    default: return kAfterAnswer;
  }
}
}  // namespace ctx

inline void check_context_spec(const ContextSpec& spec, int vocab_size) {
  if (spec.order < 0 || spec.order > ctx::kMaxOrder)
    throw ConfigError("context order must lie in [0, 8]");
  if (vocab_size < 1 || vocab_size > ctx::kMaxVocab)
    throw ConfigError("vocabulary size must lie in [1, 30]");
  if (spec.aligned && vocab_size != tok::count)
    throw ConfigError("aligned contexts require the task vocabulary");
}

inline ContextKey encode_context(const ContextSpec& spec, std::span<const Token> prefix) {
  ContextKey key = 0;
  int shift = 0;
  auto put = [&](Token field, int bits) {
    key |= static_cast<ContextKey>(field) << shift;
    shift += bits;
  };

  for (int i = spec.order; i >= 1; --i) {
    const auto n = static_cast<std::ptrdiff_t>(prefix.size());
    put(n - i >= 0 ? prefix[static_cast<std::size_t>(n - i)] : ctx::kBegin, ctx::kFieldBits);
  }
  if (!spec.aligned) return key;

  std::size_t sep_at = prefix.size();
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (prefix[i] == tok::sep) {
      sep_at = i;
      break;
    }
  Token f1 = ctx::kNone, f2 = ctx::kNone, f3 = ctx::kNone;
  if (sep_at == prefix.size()) {
    put(ctx::kQuestion, 3);
  } else {
    const auto pq = parse_question(prefix.first(sep_at));
    ctx::Segment seg = ctx::kAfterQuestion;
    std::size_t seg_start = sep_at + 1;
    std::size_t plan_begin = 0, plan_end = 0;
    bool plan_seen = false, plan_closed = false;
    for (std::size_t i = sep_at + 1; i < prefix.size(); ++i) {
      const Token t = prefix[i];
      if (!tok::is_tag(t)) continue;
      seg = ctx::segment_after_tag(t);
      seg_start = i + 1;
      if (t == tok::plan_open && !plan_seen) {
        plan_seen = true;
        plan_begin = i + 1;
      } else if (t == tok::plan_close && plan_seen && !plan_closed) {
        plan_closed = true;
        plan_end = i;
      }
    }
    if (plan_seen && !plan_closed) plan_end = prefix.size();
    const std::size_t step = prefix.size() - seg_start;

    if (seg == ctx::kPlan) {
      if (step < pq.operators.size()) f1 = pq.operators[step];
    } else if (seg == ctx::kThink) {
      if (step == 0 && !pq.operands.empty()) f1 = pq.operands[0];
      if (step + 1 < pq.operands.size()) f2 = pq.operands[step + 1];
      if (plan_seen && plan_begin + step < plan_end) f3 = prefix[plan_begin + step];
    }
    put(seg, 3);
  }
  put(f1, ctx::kFieldBits);
  put(f2, ctx::kFieldBits);
  put(f3, ctx::kFieldBits);
  return key;
}

}  // namespace ptagrpo
