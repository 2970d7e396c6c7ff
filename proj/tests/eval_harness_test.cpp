// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "rewritelab/errors.hpp"
#include "rewritelab/eval_harness.hpp"
#include "rewritelab/expr_rewrite.hpp"
#include "rewritelab/string_tasks.hpp"
#include "test_util.hpp"

namespace {

using namespace rewritelab;
using namespace rewritelab::eval;

std::vector<Example> string_test_set(std::size_t rules = 10, std::size_t per_rule = 5, double noop = 0.2) {
  strings::NoOpConfig cfg;
  cfg.base.num_instructions = 2;
  cfg.base.examples_per_instruction = 5;
  cfg.base.input_len = 12;
  cfg.base.pattern_len = 3;
  cfg.base.test_instructions = rules;
  cfg.base.test_examples_per_instruction = per_rule;
  cfg.base.seed = 1;
  cfg.no_op_frac = noop;
  return strings::gen_noop_dataset(cfg).test;
}

std::vector<std::string> targets(const std::vector<Example>& xs) {
  std::vector<std::string> out;
  for (const auto& ex : xs) out.push_back(ex.target);
  return out;
}

TEST(Normalize, WhitespaceAndEndMarker) {
  EXPECT_EQ(normalize("  abc \n"), "abc");
  EXPECT_EQ(normalize("abc<eos>"), "abc");
  EXPECT_EQ(normalize("abc <eos> "), "abc");
  EXPECT_EQ(normalize(" abc<eos>", true), " abc");
  EXPECT_TRUE(exact_match("abc ", "abc"));
  EXPECT_FALSE(exact_match("abc ", "abc", true));
  EXPECT_FALSE(exact_match("a bc", "abc"));
}

TEST(Score, BucketsAndCounts) {
  const auto test = string_test_set();
  auto completions = targets(test);
  completions[0] = "wrong";
  const auto m = score(completions, test);
  EXPECT_EQ(m.count, test.size());
  EXPECT_EQ(m.correct, test.size() - 1);
  EXPECT_DOUBLE_EQ(m.overall_exact_match, static_cast<double>(test.size() - 1) / static_cast<double>(test.size()));
  EXPECT_EQ(m.buckets.at("task=CondReplace").count, test.size());
  EXPECT_EQ(m.buckets.at("noop=true").count + m.buckets.at("noop=false").count, test.size());
  EXPECT_EQ(m.buckets.at("noop=true").count, 10u);
  EXPECT_FALSE(m.buckets.contains("seen=no"));
  completions.pop_back();
  EXPECT_THROW(score(completions, test), ProtocolError);
}

TEST(Score, SeenBuckets) {
  auto test = string_test_set(2, 2, 0.0);
  EvalOptions opts;
  opts.train_rule_ids = std::set<std::int64_t>{test[0].meta.rule_id};
  const auto m = score(targets(test), test, opts);
  EXPECT_EQ(m.buckets.at("seen=yes").count, 2u);
  EXPECT_EQ(m.buckets.at("seen=no").count, 2u);
}

TEST(Oracle, ScoresOneOnStringAndExpressionSets) {
  const auto test = string_test_set();
  EXPECT_DOUBLE_EQ(evaluate(oracle_adapter(), test).overall_exact_match, 1.0);

  expr::GeneralistConfig gc;
  gc.num_rules = 3;
  gc.instances_total = 6;
  gc.test_rules = 3;
  gc.test_instances = 12;
  gc.expr.depth = 2;
  const auto math = expr::gen_generalist_dataset(gc).test;
  const auto m = evaluate(oracle_adapter(), math);
  EXPECT_DOUBLE_EQ(m.overall_exact_match, 1.0);
  EXPECT_EQ(m.buckets.at("d_p=1").count, 12u);

  const PromptTemplate tpl{"R {rule} I {input} O:", "O:"};
  EXPECT_DOUBLE_EQ(evaluate(oracle_adapter(tpl), test, tpl).overall_exact_match, 1.0);
  EXPECT_THROW(evaluate(oracle_adapter(), {}), ValidationError);
}

TEST(Oracle, CorruptionHitsExactFraction) {
  const auto test = string_test_set(20, 10);
  const auto m = evaluate(corrupting_adapter(oracle_adapter(), 0.1, 3), test);
  EXPECT_EQ(m.correct, 180u);
  const auto again = evaluate(corrupting_adapter(oracle_adapter(), 0.1, 3), test);
  EXPECT_EQ(again.correct, m.correct);
  EXPECT_THROW(corrupting_adapter(oracle_adapter(), 1.5, 0), ValidationError);
}

TEST(External, RoundTripMatchesInProcess) {
  const auto test = string_test_set();
  testutil::TempDir dir;
  write_prompts(dir / "prompts.txt", test);
  const auto adapter = corrupting_adapter(oracle_adapter(), 0.3, 1);
  std::vector<std::string> prompts = read_lines(dir / "prompts.txt");
  write_lines(dir / "completions.txt", adapter(prompts));
  const auto ext = run_external(dir / "prompts.txt", dir / "completions.txt", test);
  const auto in = evaluate(adapter, test);
  EXPECT_EQ(ext.correct, in.correct);
  EXPECT_EQ(to_json(ext).dump(), to_json(in).dump());
}

TEST(External, EscapedNewlinesSurvive) {
  testutil::TempDir dir;
  write_lines(dir / "x.txt", {"a\nb", "c\\d"});
  EXPECT_EQ(testutil::slurp(dir / "x.txt"), "a\\nb\nc\\\\d\n");
  EXPECT_EQ(read_lines(dir / "x.txt"), (std::vector<std::string>{"a\nb", "c\\d"}));
}

TEST(External, ProtocolErrors) {
  const auto test = string_test_set(2, 2, 0.0);
  testutil::TempDir dir;
  write_prompts(dir / "p.txt", test);
  write_lines(dir / "short.txt", {"x"});
  EXPECT_THROW(run_external(dir / "p.txt", dir / "short.txt", test), ProtocolError);

  auto lines = read_lines(dir / "p.txt");
  std::swap(lines[0], lines[2]);
  write_lines(dir / "swapped.txt", lines);
  write_lines(dir / "c.txt", targets(test));
  try {
    run_external(dir / "swapped.txt", dir / "c.txt", test);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }

  testutil::spit(dir / "bad.txt", "ok\nbad\\q\nok\nok\n");
  try {
    read_lines(dir / "bad.txt");
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(External, ShuffledCompletionsWarn) {
  const auto test = string_test_set(10, 5, 0.0);
  testutil::TempDir dir;
  write_prompts(dir / "p.txt", test);
  auto completions = targets(test);
  std::rotate(completions.begin(), completions.begin() + 1, completions.end());
  write_lines(dir / "c.txt", completions);
  const auto m = run_external(dir / "p.txt", dir / "c.txt", test);
  EXPECT_FALSE(m.warnings.empty());
  write_lines(dir / "ok.txt", targets(test));
  EXPECT_TRUE(run_external(dir / "p.txt", dir / "ok.txt", test).warnings.empty());
}

TEST(Report, CsvLayout) {
  const auto test = string_test_set(2, 2, 0.5);
  const auto m = score(targets(test), test);
  testutil::TempDir dir;
  write_report_csv(dir / "r.csv", m);
  EXPECT_EQ(testutil::slurp(dir / "r.csv"),
            "bucket_key,count,exact_match\noverall,4,1\nnoop=false,2,1\nnoop=true,2,1\ntask=CondReplace,4,1\n");
}

}  // namespace
