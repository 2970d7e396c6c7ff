// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/expr_rewrite.hpp"

namespace {

using namespace rewritelab;
using namespace rewritelab::expr;

Expr v(const char* n) { return Expr::var(n); }
Expr c(std::int64_t x) { return Expr::constant(x); }

TEST(Expr, DifferenceOfSquaresWorkedExample) {
  const AbstractRule rule{pow(v("a"), 2) - pow(v("b"), 2), (v("a") + v("b")) * (v("a") - v("b")), "dos"};
  const Expr p = c(2) * v("x") + c(5);
  const Expr q = c(3) * v("y") - c(6);
  const Expr tail = Expr::unary(UnaryOp::log, c(5) * v("t")) - Expr::unary(UnaryOp::cos, c(4) * v("k"));
  const Expr input = pow(pow(p, 2) - pow(q, 2), 3) + tail;

  const auto out = apply_abstract_rule(input, rule);
  ASSERT_TRUE(out.applied);
  EXPECT_EQ(out.output, pow((p + q) * (p - q), 3) + tail);
  EXPECT_EQ(render(out.output),
            "((((((2*x)+5)+((3*y)-6))*(((2*x)+5)-((3*y)-6)))^3)+(log((5*t))-cos((4*k))))");
  EXPECT_EQ(render_pretty(out.output), "((2x+5+3y-6)*(2x+5-(3y-6)))^3+log(5t)-cos(4k)");
}

TEST(Expr, RenderParseRoundTrip) {
  ExprGenConfig cfg;
  Rng rng{4};
  for (int i = 0; i < 500; ++i) {
    const auto e = gen_random_tree(cfg, 1 + static_cast<int>(i % 4), rng);
    ASSERT_EQ(parse(render(e)), e) << render(e);
  }
  EXPECT_EQ(parse("x^2"), pow(v("x"), 2));
  EXPECT_EQ(parse("sin(x)"), Expr::unary(UnaryOp::sin, v("x")));
}

TEST(Expr, ParseErrorsCarryOffset) {
  try {
    parse("(x+)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 3u);
  }
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("(x+y"), ParseError);
  EXPECT_THROW(parse("x y"), ParseError);
}

TEST(Expr, GeneratedTreesHaveExactDepth) {
  ExprGenConfig cfg;
  Rng rng{8};
  for (int d = 0; d <= 4; ++d) {
    for (int i = 0; i < 50; ++i) EXPECT_EQ(depth(gen_random_tree(cfg, d, rng)), d);
  }
  EXPECT_TRUE(gen_random_tree(cfg, 0, rng).is_leaf());
}

TEST(Expr, PathsAndSubtrees) {
  const Expr e = (v("x") + c(1)) * v("y");
  const auto paths = preorder_paths(e);
  ASSERT_EQ(paths.size(), 5u);
  EXPECT_EQ(subtree(e, paths[1]), v("x") + c(1));
  EXPECT_EQ(subtree(e, paths[2]), v("x"));
  EXPECT_EQ(subtree(e, paths[4]), v("y"));
  EXPECT_EQ(replace_subtree(e, paths[4], c(7)), (v("x") + c(1)) * c(7));
  EXPECT_EQ(leaf_paths(e).size(), 3u);
  EXPECT_EQ(variables(e), (std::vector<std::string>{"x", "y"}));
}

TEST(Matcher, DifferenceOfSquaresBindings) {
  const Expr p = c(2) * v("x") + c(5);
  const Expr q = c(3) * v("y") - c(6);
  const Expr pattern = pow(v("a"), 2) - pow(v("b"), 2);
  const auto s = match(pow(p, 2) - pow(q, 2), pattern);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(*s, (Substitution{{"a", p}, {"b", q}}));
  EXPECT_FALSE(match(Expr::unary(UnaryOp::log, c(5) * v("t")), pattern).has_value());
  const Expr any = Expr::unary(UnaryOp::cos, p);
  EXPECT_EQ(match(any, v("a"))->at("a"), any);
  EXPECT_EQ(instantiate((v("a") + v("b")) * (v("a") - v("b")), *s), (p + q) * (p - q));
  EXPECT_EQ(instantiate(v("a") * c(3), {{"a", v("a")}}), v("a") * c(3));
}

TEST(Matcher, NoMatchLeavesInputUnchanged) {
  const Expr e = v("x") + c(1);
  const auto out = apply_abstract_rule(e, {pow(v("a"), 2) - pow(v("b"), 2), v("a"), "r"});
  EXPECT_FALSE(out.applied);
  EXPECT_EQ(out.output, e);
}

TEST(Matcher, NonLinearPatternNeedsEqualSubtrees) {
  const Expr pattern = v("a") + v("a");
  EXPECT_FALSE(match(v("x") + v("y"), pattern).has_value());
  const auto s = match((v("x") * c(2)) + (v("x") * c(2)), pattern);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->at("a"), v("x") * c(2));
}

TEST(Matcher, FirstMatchIsOutermostLeftmost) {
  const Expr e = (v("x") - v("y")) - (v("z") - v("t"));
  const auto m = find_match(e, v("a") - v("b"));
  ASSERT_TRUE(m.has_value());
  EXPECT_TRUE(m->path.empty());
  const auto out = apply_abstract_rule(e * c(2), {v("a") - v("b"), v("b") - v("a"), "swap"});
  EXPECT_EQ(out.output, ((v("z") - v("t")) - (v("x") - v("y"))) * c(2));
}

TEST(Matcher, AgreesWithEnumeration) {
  ExprGenConfig cfg;
  Rng rng{17};
  RuleRegistry registry;
  for (int i = 0; i < 300; ++i) {
    const RuleShape shape{1 + static_cast<int>(i % 2), 1 + static_cast<int>(i % 2), 1};
    const auto rule = gen_abstract_rule(shape, cfg, rng, registry);
    Expr e = gen_random_tree(cfg, 1 + static_cast<int>(i % 3), rng);
    if (i % 3 == 0) e = ground_and_embed(rule, e, 1, cfg, rng).instance;
    const auto fast = find_match(e, rule.lhs);
    const auto slow = oracle::enumerate_match(e, rule.lhs);
    ASSERT_EQ(fast.has_value(), slow.has_value()) << render(e) << " " << render_rule(rule);
    if (fast) {
      EXPECT_EQ(fast->path, slow->path);
      EXPECT_EQ(fast->subst, slow->subst);
    }
  }
}

TEST(Rules, Validation) {
  EXPECT_THROW(validate(AbstractRule{v("a"), v("a"), ""}), ValidationError);
  EXPECT_THROW(validate(AbstractRule{v("a") + c(1), v("b"), ""}), ValidationError);
  EXPECT_NO_THROW(validate(AbstractRule{v("a") + c(0), v("a"), ""}));
  EXPECT_THROW(instantiate(v("a") + v("b"), {{"a", c(1)}}), ValidationError);
}

TEST(Rules, RenderParseRoundTrip) {
  const AbstractRule rule{pow(v("a"), 2) - pow(v("b"), 2), (v("a") + v("b")) * (v("a") - v("b")), ""};
  EXPECT_EQ(render_rule(rule), "((a^2)-(b^2))=((a+b)*(a-b))");
  const auto back = parse_rule(render_rule(rule));
  EXPECT_EQ(back.lhs, rule.lhs);
  EXPECT_EQ(back.rhs, rule.rhs);
}

TEST(Rules, HashIsStructural) {
  const AbstractRule r1{v("a") * v("b"), v("b") * v("a"), "x"};
  const AbstractRule same{v("a") * v("b"), v("b") * v("a"), "y"};
  EXPECT_EQ(rule_hash(r1), rule_hash(same));
  EXPECT_NE(rule_hash(r1), rule_hash(AbstractRule{v("a") * v("b"), v("a") * v("b"), ""}));
}

TEST(Rules, GeneratedVariablesFollowFirstAppearance) {
  ExprGenConfig cfg;
  Rng rng{12};
  RuleRegistry registry;
  for (int n = 1; n <= 4; ++n) {
    const auto rule = gen_abstract_rule({n, 2, 1}, cfg, rng, registry);
    const std::vector<std::string> expected(kRuleVars.begin(), kRuleVars.begin() + n);
    EXPECT_EQ(variables(rule.lhs), expected) << render_rule(rule);
  }
}

TEST(Rules, GeneratedRulesAreValidAndDistinct) {
  ExprGenConfig cfg;
  Rng rng{3};
  RuleRegistry registry;
  const auto rules = gen_rule_set(1000, {2, 2, 2}, cfg, rng, registry);
  std::set<std::size_t> hashes;
  for (const auto& r : rules) {
    EXPECT_NO_THROW(validate(r));
    EXPECT_EQ(depth(r.lhs), 2);
    EXPECT_EQ(depth(r.rhs), 2);
    EXPECT_EQ(variables(r.lhs).size(), 2u);
    hashes.insert(rule_hash(r));
  }
  EXPECT_EQ(hashes.size(), 1000u);
}

TEST(Grounding, EmbeddedSiteIsTheFirstMatch) {
  ExprGenConfig cfg;
  Rng rng{21};
  RuleRegistry registry;
  int rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto rule = gen_abstract_rule({1 + i % 3, 2, 1}, cfg, rng, registry);
    const auto host = gen_random_tree(cfg, 2, rng);
    Grounded g;
    try {
      g = ground_and_embed(rule, host, 1 + i % 2, cfg, rng);
    } catch (const GenerationError&) {
      // Some hosts always contain an earlier match; generators draw a new one.
      ++rejected;
      continue;
    }
    const auto m = find_match(g.instance, rule.lhs);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(m->path, g.site);
    EXPECT_EQ(apply_abstract_rule(g.instance, rule).output, g.target);
    for (const auto& [name, sub] : g.grounding) EXPECT_EQ(depth(sub), 1 + i % 2);
    EXPECT_EQ(parse(render(g.target)), g.target);
  }
  EXPECT_LT(rejected, 100);
}

TEST(Datasets, GeneralistSplitsByRule) {
  GeneralistConfig cfg;
  cfg.num_rules = 10;
  cfg.instances_total = 95;
  cfg.test_rules = 4;
  cfg.test_instances = 20;
  cfg.expr.depth = 2;
  cfg.expr.seed = 5;
  const auto data = gen_generalist_dataset(cfg);
  EXPECT_EQ(data.train.size(), 95u);
  EXPECT_EQ(data.test.size(), 20u);
  EXPECT_EQ(rule_ids(data.train).size(), 10u);
  std::set<std::string> train_rules;
  for (const auto& ex : data.train) train_rules.insert(ex.instruction);
  for (const auto& ex : data.test) {
    EXPECT_FALSE(train_rules.count(ex.instruction));
    const auto rule = parse_rule(ex.instruction);
    EXPECT_EQ(render(apply_abstract_rule(parse(ex.input), rule).output), ex.target);
  }
  const auto again = gen_generalist_dataset(cfg);
  EXPECT_EQ(again.train, data.train);
}

TEST(Datasets, SpecialistMixture) {
  ExprGenConfig gen;
  gen.depth = 2;
  Rng rng{1};
  RuleRegistry registry;
  const auto spec = gen_rule_set(3, {2, 2, 2}, gen, rng, registry);
  const auto diver = gen_rule_set(4, {2, 2, 2}, gen, rng, registry);
  SpecialistMixtureConfig cfg{spec, diver, 30, 20, 12, 1, 2};
  const auto data = gen_specialist_dataset(cfg, gen);
  EXPECT_EQ(data.train.size(), 50u);
  EXPECT_EQ(data.test.size(), 12u);
  for (const auto& ex : data.train) EXPECT_EQ(ex.meta.d_p, 1);
  for (const auto& ex : data.test) {
    EXPECT_EQ(ex.meta.d_p, 2);
    EXPECT_LT(ex.meta.rule_id, 3);
  }
  cfg.diver_rules.push_back(spec[0]);
  EXPECT_THROW(gen_specialist_dataset(cfg, gen), ValidationError);
}

}  // namespace
