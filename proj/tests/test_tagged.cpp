#include <gtest/gtest.h>

#include "ptagrpo/tagged.hpp"
#include "ptagrpo/rng.hpp"

using namespace ptagrpo;

namespace {
constexpr Token po = tok::plan_open, pc = tok::plan_close, to = tok::think_open, tc = tok::think_close,
                ao = tok::answer_open, ac = tok::answer_close;
}

TEST(Tagged, WorkedExample) {
  const TokenSeq raw{po, 3, tok::plus, 4, pc, to, 7, tc, ao, 7, ac};
  const auto r = parse_tagged(raw);
  EXPECT_TRUE(r.well_formed);
  EXPECT_EQ(r.plan, (TokenSeq{3, tok::plus, 4}));
  EXPECT_EQ(r.think, (TokenSeq{7}));
  EXPECT_EQ(r.answer, (TokenSeq{7}));
  ASSERT_TRUE(r.prediction);
  EXPECT_EQ(*r.prediction, 7);
  EXPECT_EQ(r.raw, raw);
}

TEST(Tagged, DuplicateTagIsMalformed) {
  const auto r = parse_tagged(TokenSeq{po, po, 3, pc, to, 7, tc, ao, 7, ac});
  EXPECT_FALSE(r.well_formed);
  EXPECT_FALSE(r.prediction);
}

TEST(Tagged, OutOfOrderIsMalformed) {
  EXPECT_FALSE(parse_tagged(TokenSeq{to, 7, tc, po, 3, pc, ao, 7, ac}).well_formed);
  EXPECT_FALSE(parse_tagged(TokenSeq{po, 3, pc, ao, 7, ac, to, 7, tc}).well_formed);
}

TEST(Tagged, StrayTokensBetweenSpansOrAroundAreMalformed) {
  EXPECT_FALSE(parse_tagged(TokenSeq{po, 3, pc, 5, to, 7, tc, ao, 7, ac}).well_formed);
  EXPECT_FALSE(parse_tagged(TokenSeq{po, 3, pc, to, 7, tc, 5, ao, 7, ac}).well_formed);
  EXPECT_FALSE(parse_tagged(TokenSeq{5, po, 3, pc, to, 7, tc, ao, 7, ac}).well_formed);
  EXPECT_FALSE(parse_tagged(TokenSeq{po, 3, pc, to, 7, tc, ao, 7, ac, 5}).well_formed);
}

TEST(Tagged, MissingTagsAndEmptyInput) {
  EXPECT_FALSE(parse_tagged(TokenSeq{}).well_formed);
  EXPECT_FALSE(parse_tagged(TokenSeq{po, 3, pc, to, 7, tc, ao, 7}).well_formed);
  const auto r = parse_tagged(TokenSeq{po, 3, pc, to, 7, ao, 7, ac});
  EXPECT_FALSE(r.well_formed);
  EXPECT_FALSE(r.prediction);
}

TEST(Tagged, NonNumericAnswerHasNoPrediction) {
  const auto r = parse_tagged(TokenSeq{po, pc, to, tc, ao, tok::plus, ac});
  EXPECT_TRUE(r.well_formed);
  EXPECT_FALSE(r.prediction);
  EXPECT_FALSE(parse_tagged(TokenSeq{po, pc, to, tc, ao, ac}).prediction);
}

TEST(Tagged, MultiDigitAnswer) {
  const auto r = parse_tagged(TokenSeq{po, pc, to, tc, ao, 4, 2, ac});
  ASSERT_TRUE(r.prediction);
  EXPECT_EQ(*r.prediction, 42);
  EXPECT_EQ(encode_number(42), (TokenSeq{4, 2}));
  EXPECT_EQ(encode_number(0), (TokenSeq{0}));
}

TEST(Tagged, RandomWellFormedRoundTrip) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    auto span = [&] {
      TokenSeq s(static_cast<std::size_t>(rng.below(5)));
      for (auto& t : s) t = rng.below(tok::sep);  // digits and operators only
      return s;
    };
    const auto plan = span(), think = span(), answer = span();
    const auto raw = serialize_tagged(plan, think, answer);
    const auto r = parse_tagged(raw);
    ASSERT_TRUE(r.well_formed);
    EXPECT_EQ(r.plan, plan);
    EXPECT_EQ(r.think, think);
    EXPECT_EQ(r.answer, answer);
    EXPECT_EQ(parse_tagged(serialize_tagged(r)).raw, r.raw);
  }
}

TEST(Tagged, RandomSequencesNeverThrowAndAgreeWithGrammar) {
  Rng rng(5);
  for (int trial = 0; trial < 20000; ++trial) {
    TokenSeq raw(static_cast<std::size_t>(rng.below(14)));
    for (auto& t : raw) t = rng.below(tok::count);
    const auto r = parse_tagged(raw);
    // Independent check: the grammar is exactly serialize_tagged of tag-free spans.
    bool expect = false;
    if (r.well_formed) {
      for (Token t : r.plan) ASSERT_FALSE(tok::is_tag(t));
      for (Token t : r.think) ASSERT_FALSE(tok::is_tag(t));
      for (Token t : r.answer) ASSERT_FALSE(tok::is_tag(t));
      expect = serialize_tagged(r.plan, r.think, r.answer) == raw;
      EXPECT_TRUE(expect);
    } else {
      EXPECT_FALSE(r.prediction);
    }
  }
}
