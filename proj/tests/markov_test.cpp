// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/markov.hpp"

namespace {

using namespace rewritelab;
using namespace rewritelab::markov;

std::vector<Sequence> all_words(std::size_t max_len) {
  std::vector<Sequence> words{U""};
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].size() == max_len) continue;
    for (char32_t c : {U'a', U'b'}) words.push_back(words[i] + c);
  }
  return words;
}

Sequence reverse_concat(const Sequence& w) { return w + Sequence(w.rbegin(), w.rend()); }

TEST(Markov, ReversalOfAbb) {
  const auto program = reversal_program();
  const auto result = run(U"abb", program.algorithm);
  EXPECT_EQ(result.status, Status::terminated);
  EXPECT_EQ(result.final, U"abbbba");
}

TEST(Markov, ReversalTraceOfAbb) {
  // Derived by hand: rules fire on the first applicable concrete rule at its
  // leftmost occurrence.
  const std::vector<TraceEntry> expected{
      {9, 0, U"αabb"},       {0, 0, U"aαβabb"},     {3, 2, U"aαbβab"},   {1, 1, U"abαβbβab"},
      {3, 5, U"abαβbbβa"},   {5, 3, U"abαbβbβa"},   {1, 2, U"abbαβbβbβa"}, {7, 3, U"abbbαβbβa"},
      {7, 4, U"abbbbαβa"},   {6, 5, U"abbbbaα"},    {8, 6, U"abbbba"},
  };
  const auto result = run(U"abb", reversal_program().algorithm);
  EXPECT_EQ(result.trace, expected);
}

TEST(Markov, SchemaExpandsLexicographically) {
  const auto program = reversal_program();
  const auto& rules = program.algorithm.rules;
  ASSERT_EQ(rules.size(), 10u);
  EXPECT_EQ(rules[0], (Rule{U"αa", U"aαβa", false}));
  EXPECT_EQ(rules[1], (Rule{U"αb", U"bαβb", false}));
  EXPECT_EQ(rules[2], (Rule{U"βaa", U"aβa", false}));
  EXPECT_EQ(rules[3], (Rule{U"βab", U"bβa", false}));
  EXPECT_EQ(rules[4], (Rule{U"βba", U"aβb", false}));
  EXPECT_EQ(rules[8], (Rule{U"α", U"", true}));
  EXPECT_EQ(rules[9], (Rule{U"", U"α", false}));
}

TEST(Markov, ParsedFileMatchesBuiltin) {
  const auto file = load_program(std::string(REWRITELAB_SOURCE_DIR) + "/programs/reverse.mkv");
  EXPECT_EQ(file.algorithm.rules, reversal_program().algorithm.rules);
}

TEST(Markov, ReversesEveryShortWord) {
  const auto program = reversal_program();
  for (const auto& w : all_words(6)) {
    const auto result = run(w, program.algorithm);
    ASSERT_EQ(result.status, Status::terminated);
    EXPECT_EQ(result.final, reverse_concat(w));
  }
}

TEST(Markov, ExpansionAgreesWithBindingInterpreter) {
  const auto program = reversal_program();
  for (const auto& w : all_words(6)) {
    const auto expanded = run(w, program.algorithm);
    const auto ordered = oracle::run_schema(program, w, oracle::MatchOrder::binding_order);
    const auto leftmost = oracle::run_schema(program, w, oracle::MatchOrder::leftmost);
    ASSERT_EQ(expanded.trace.size(), ordered.trace.size());
    for (std::size_t i = 0; i < ordered.trace.size(); ++i) EXPECT_EQ(expanded.trace[i].after, ordered.trace[i]);
    EXPECT_EQ(expanded.final, leftmost.final);
    EXPECT_EQ(expanded.status, leftmost.status);
  }
}

TEST(Markov, EmptyLhsMatchesAtStart) {
  const auto algo = make_algorithm({U'a'}, {U'γ'}, {{U"γ", U"", true}, {U"", U"γ", false}});
  const auto s = step(U"aa", algo);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->next, U"γaa");
  EXPECT_EQ(s->position, 0u);
  EXPECT_EQ(run(U"aa", algo).final, U"aa");
}

TEST(Markov, BlockedAndStepLimit) {
  const auto blocked = make_algorithm({U'a', U'b'}, {}, {{U"a", U"b", false}});
  const auto r = run(U"aab", blocked);
  EXPECT_EQ(r.status, Status::blocked);
  EXPECT_EQ(r.final, U"bbb");
  EXPECT_EQ(r.trace.size(), 2u);

  const auto looping = make_algorithm({U'a'}, {}, {{U"a", U"aa", false}});
  const auto l = run(U"a", looping, 5);
  EXPECT_EQ(l.status, Status::step_limit);
  EXPECT_EQ(l.final, U"aaaaaa");
  EXPECT_THROW(run(U"a", looping, 0), ValidationError);
}

TEST(Markov, RejectsMalformedAlgorithms) {
  EXPECT_THROW(make_algorithm({}, {}, {}), ValidationError);
  EXPECT_THROW(make_algorithm({U'a', U'a'}, {}, {}), ValidationError);
  EXPECT_THROW(make_algorithm({U'a'}, {U'a'}, {}), ValidationError);
  EXPECT_THROW(make_algorithm({U'a'}, {}, {{U"c", U"a", false}}), ValidationError);
  EXPECT_THROW(make_algorithm({U'a'}, {}, {{U"", U"a", false}, {U"a", U"", true}}), ValidationError);
}

TEST(Markov, RejectsMalformedPrograms) {
  EXPECT_THROW(parse_program("work: x\na -> b\n"), ParseError);
  EXPECT_THROW(parse_program("alphabet: a b\na b\n"), ParseError);
  EXPECT_THROW(parse_program("alphabet: ab\n"), ParseError);
  EXPECT_THROW(parse_program("alphabet: a b\nvars: a\n"), ValidationError);
  EXPECT_THROW(parse_program("alphabet: a b\nvars: x\na -> x\n"), ValidationError);
}

}  // namespace
