// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/expr_rewrite.hpp"

#include <algorithm>

#include "rewritelab/errors.hpp"

namespace rewritelab::expr {

void validate(const AbstractRule& rule) {
  if (rule.lhs.kind == Expr::Kind::var) throw ValidationError("rule lhs must not be a bare variable");
  const auto lhs_vars = variables(rule.lhs);
  for (const auto& v : variables(rule.rhs)) {
    if (std::find(lhs_vars.begin(), lhs_vars.end(), v) == lhs_vars.end()) {
      throw ValidationError("rule variable '" + v + "' appears in rhs but not in lhs");
    }
  }
}

std::string render_rule(const AbstractRule& rule) { return render(rule.lhs) + "=" + render(rule.rhs); }

AbstractRule parse_rule(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ParseError("rule needs '='", 0);
  if (text.find('=', eq + 1) != std::string_view::npos) throw ParseError("rule has more than one '='", eq);
  AbstractRule rule;
  try {
    rule.lhs = parse(text.substr(0, eq));
  } catch (const ParseError& e) {
    throw ParseError(std::string("in rule lhs: ") + e.what(), e.position());
  }
  try {
    rule.rhs = parse(text.substr(eq + 1));
  } catch (const ParseError& e) {
    throw ParseError(std::string("in rule rhs: ") + e.what(), eq + 1 + e.position());
  }
  validate(rule);
  return rule;
}

bool match_at(const Expr& e, const Expr& pattern, Substitution& subst) {
  switch (pattern.kind) {
    case Expr::Kind::var: {
      auto [it, inserted] = subst.try_emplace(pattern.name, e);
      return inserted || it->second == e;
    }
    case Expr::Kind::constant:
      return e.kind == Expr::Kind::constant && e.value == pattern.value;
    case Expr::Kind::unary:
      return e.kind == Expr::Kind::unary && e.unary_op == pattern.unary_op &&
             match_at(e.children[0], pattern.children[0], subst);
    case Expr::Kind::binary:
      return e.kind == Expr::Kind::binary && e.binary_op == pattern.binary_op &&
             match_at(e.children[0], pattern.children[0], subst) && match_at(e.children[1], pattern.children[1], subst);
  }
  return false;
}

namespace {

bool find_first(const Expr& e, const Expr& pattern, Path& path, Substitution& out) {
  Substitution subst;
  if (match_at(e, pattern, subst)) {
    out = std::move(subst);
    return true;
  }
  for (std::uint32_t i = 0; i < e.children.size(); ++i) {
    path.push_back(i);
    if (find_first(e.children[i], pattern, path, out)) return true;
    path.pop_back();
  }
  return false;
}

}  // namespace

std::optional<Match> find_match(const Expr& e, const Expr& pattern) {
  Match m;
  if (!find_first(e, pattern, m.path, m.subst)) return std::nullopt;
  return m;
}

std::optional<Substitution> match(const Expr& e, const Expr& pattern) {
  auto m = find_match(e, pattern);
  if (!m) return std::nullopt;
  return std::move(m->subst);
}

Expr instantiate(const Expr& rule_side, const Substitution& subst) {
  if (rule_side.kind == Expr::Kind::var) {
    const auto it = subst.find(rule_side.name);
    if (it == subst.end()) throw ValidationError("unbound rule variable '" + rule_side.name + "'");
    return it->second;
  }
  Expr out = rule_side;
  for (auto& c : out.children) c = instantiate(c, subst);
  return out;
}

ExprOutcome apply_abstract_rule(const Expr& e, const AbstractRule& rule) {
  auto m = find_match(e, rule.lhs);
  if (!m) return {e, false};
  return {replace_subtree(e, m->path, instantiate(rule.rhs, m->subst)), true};
}

namespace {

std::size_t hash_combine(std::size_t a, std::size_t b) { return static_cast<std::size_t>(mix64(a * 31 + b)); }

/// Renames rule variables to a, b, c... in order of first appearance in lhs.
AbstractRule canonical_names(const AbstractRule& rule) {
  Substitution rename;
  const auto vars = variables(rule.lhs);
  for (std::size_t i = 0; i < vars.size(); ++i) rename.emplace(vars[i], Expr::var(kRuleVars.at(i)));
  return {instantiate(rule.lhs, rename), instantiate(rule.rhs, rename), rule.id};
}

}  // namespace

std::size_t rule_hash(const AbstractRule& rule) {
  return hash_combine(structural_hash(rule.lhs), structural_hash(rule.rhs));
}

AbstractRule gen_abstract_rule(const RuleShape& shape, const ExprGenConfig& cfg, Rng& rng, RuleRegistry& registry) {
  if (shape.num_vars < 1 || shape.num_vars > static_cast<int>(kRuleVars.size())) {
    throw ValidationError("num_vars must be between 1 and 4");
  }
  if (shape.lhs_depth < 1) throw ValidationError("lhs_depth must be at least 1");
  if (shape.rhs_depth < 0) throw ValidationError("rhs_depth must be non-negative");
  if (shape.lhs_depth < 30 && (1LL << shape.lhs_depth) < shape.num_vars) {
    throw CapacityError("lhs of depth " + std::to_string(shape.lhs_depth) + " cannot hold " +
                        std::to_string(shape.num_vars) + " variables");
  }
  const std::vector<std::string> vars(kRuleVars.begin(), kRuleVars.begin() + shape.num_vars);
  ExprGenConfig rule_cfg = cfg;
  // Rule sides are mostly variables so that they stay abstract.
  rule_cfg.var_prob = std::max(cfg.var_prob, 0.75);
  constexpr int kMaxAttempts = 2000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    AbstractRule rule;
    rule.lhs = gen_random_tree(rule_cfg, shape.lhs_depth, rng, vars);
    if (variables(rule.lhs).size() != vars.size()) continue;
    const auto lhs_vars = variables(rule.lhs);
    rule.rhs = gen_random_tree(rule_cfg, shape.rhs_depth, rng, lhs_vars);
    if (rule.lhs == rule.rhs) continue;
    rule = canonical_names(rule);
    if (!registry.insert(rule_hash(rule)).second) continue;
    return rule;
  }
  throw CapacityError("could not generate a new distinct rule after " + std::to_string(kMaxAttempts) + " attempts");
}

std::vector<AbstractRule> gen_rule_set(std::size_t count, const RuleShape& shape, const ExprGenConfig& cfg, Rng& rng,
                                       RuleRegistry& registry) {
  std::vector<AbstractRule> rules;
  rules.reserve(count);
  for (std::size_t i = 0; i < count; ++i) rules.push_back(gen_abstract_rule(shape, cfg, rng, registry));
  return rules;
}

Grounded ground_and_embed(const AbstractRule& rule, const Expr& host, int pattern_depth, const ExprGenConfig& cfg,
                          Rng& rng, int max_retries) {
  if (pattern_depth < 0) throw ValidationError("pattern depth must be non-negative");
  const auto leaves = leaf_paths(host);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Grounded g;
    for (const auto& v : variables(rule.lhs)) g.grounding.emplace(v, gen_random_tree(cfg, pattern_depth, rng));
    const Expr concrete = instantiate(rule.lhs, g.grounding);
    g.site = leaves[uniform_index(rng, leaves.size())];
    g.instance = replace_subtree(host, g.site, concrete);
    const auto m = find_match(g.instance, rule.lhs);
    if (!m || m->path != g.site) continue;
    g.target = replace_subtree(g.instance, g.site, instantiate(rule.rhs, m->subst));
    return g;
  }
  throw GenerationError("could not embed rule " + render_rule(rule) + " without an earlier accidental match");
}

Example make_example(const AbstractRule& rule, const Grounded& g, std::int64_t rule_id, int host_depth,
                     int pattern_depth, Split split) {
  Example ex;
  ex.task_kind = TaskKind::expr_rewrite;
  ex.instruction = render_rule(rule);
  ex.input = render(g.instance);
  ex.target = render(g.target);
  ex.meta.rule_id = rule_id;
  ex.meta.d = host_depth;
  ex.meta.d_p = pattern_depth;
  ex.meta.split = split;
  return ex;
}

namespace {

enum Stream : std::uint64_t { kRuleStream = 11, kTrainStream = 12, kTestStream = 13 };

/// Embeds `rule` into fresh hosts until an embedding succeeds.
Grounded instance_for(const AbstractRule& rule, int pattern_depth, const ExprGenConfig& cfg, Rng& rng) {
  constexpr int kHosts = 32;
  for (int h = 0; h < kHosts; ++h) {
    const Expr host = gen_random_tree(cfg, cfg.depth, rng);
    try {
      return ground_and_embed(rule, host, pattern_depth, cfg, rng, 8);
    } catch (const GenerationError&) {
    }
  }
  throw GenerationError("rule " + render_rule(rule) + " could not be embedded in " + std::to_string(kHosts) + " hosts");
}

void emit(std::vector<Example>& out, const AbstractRule& rule, std::int64_t rule_id, std::size_t count,
          int pattern_depth, Split split, const ExprGenConfig& cfg, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto g = instance_for(rule, pattern_depth, cfg, rng);
    out.push_back(make_example(rule, g, rule_id, cfg.depth, pattern_depth, split));
  }
}

nlohmann::json rules_json(const std::vector<AbstractRule>& rules) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rules) arr.push_back(render_rule(r));
  return arr;
}

}  // namespace

SplitDataset gen_generalist_dataset(const GeneralistConfig& cfg) {
  validate(cfg.expr);
  if (cfg.num_rules == 0) throw ValidationError("num_rules must be positive");
  Rng rule_rng{derive_seed(cfg.expr.seed, kRuleStream)};
  RuleRegistry registry;
  auto train_rules = gen_rule_set(cfg.num_rules, cfg.shape, cfg.expr, rule_rng, registry);
  auto test_rules = gen_rule_set(cfg.test_rules, cfg.shape, cfg.expr, rule_rng, registry);

  SplitDataset data;
  const std::size_t base = cfg.instances_total / cfg.num_rules;
  const std::size_t extra = cfg.instances_total % cfg.num_rules;
  for (std::size_t r = 0; r < train_rules.size(); ++r) {
    train_rules[r].id = "r" + std::to_string(r);
    Rng rng{derive_seed(derive_seed(cfg.expr.seed, kTrainStream), r)};
    emit(data.train, train_rules[r], static_cast<std::int64_t>(r), base + (r < extra ? 1 : 0),
         cfg.expr.pattern_depth, Split::train, cfg.expr, rng);
  }
  const std::size_t tbase = cfg.test_rules == 0 ? 0 : cfg.test_instances / cfg.test_rules;
  const std::size_t textra = cfg.test_rules == 0 ? 0 : cfg.test_instances % cfg.test_rules;
  for (std::size_t t = 0; t < test_rules.size(); ++t) {
    const auto id = cfg.num_rules + t;
    test_rules[t].id = "r" + std::to_string(id);
    Rng rng{derive_seed(derive_seed(cfg.expr.seed, kTestStream), t)};
    emit(data.test, test_rules[t], static_cast<std::int64_t>(id), tbase + (t < textra ? 1 : 0),
         cfg.expr.pattern_depth, Split::test, cfg.expr, rng);
  }
  data.config = {{"generator", "math"},
                 {"mode", "generalist"},
                 {"num_rules", cfg.num_rules},
                 {"instances_total", cfg.instances_total},
                 {"test_rules", cfg.test_rules},
                 {"test_instances", cfg.test_instances},
                 {"rule_shape",
                  {{"num_vars", cfg.shape.num_vars}, {"lhs_depth", cfg.shape.lhs_depth}, {"rhs_depth", cfg.shape.rhs_depth}}},
                 {"expr", to_json(cfg.expr)},
                 {"train_rules", rules_json(train_rules)},
                 {"test_rule_list", rules_json(test_rules)},
                 {"seed", cfg.expr.seed}};
  return data;
}

SplitDataset gen_specialist_dataset(const SpecialistMixtureConfig& cfg, const ExprGenConfig& gen) {
  validate(gen);
  if (cfg.spec_rules.empty()) throw ValidationError("R_spec must be non-empty");
  if (cfg.dp_train >= cfg.dp_test) throw ValidationError("dp_train must be smaller than dp_test");
  if (cfg.diver_count > 0 && cfg.diver_rules.empty()) throw ValidationError("diver_count > 0 needs R_diver rules");
  RuleRegistry spec_hashes;
  for (const auto& r : cfg.spec_rules) {
    validate(r);
    spec_hashes.insert(rule_hash(canonical_names(r)));
  }
  for (const auto& r : cfg.diver_rules) {
    validate(r);
    if (spec_hashes.contains(rule_hash(canonical_names(r)))) {
      throw ValidationError("rule " + render_rule(r) + " is in both R_spec and R_diver");
    }
  }

  SplitDataset data;
  auto spread = [](std::size_t total, std::size_t parts, std::size_t i) {
    return total / parts + (i < total % parts ? 1 : 0);
  };
  const std::size_t n_spec = cfg.spec_rules.size();
  for (std::size_t r = 0; r < n_spec; ++r) {
    Rng rng{derive_seed(derive_seed(gen.seed, kTrainStream), r)};
    emit(data.train, cfg.spec_rules[r], static_cast<std::int64_t>(r), spread(cfg.spec_count, n_spec, r), cfg.dp_train,
         Split::train, gen, rng);
  }
  for (std::size_t r = 0; r < cfg.diver_rules.size(); ++r) {
    const auto id = n_spec + r;
    Rng rng{derive_seed(derive_seed(gen.seed, kTrainStream), id)};
    emit(data.train, cfg.diver_rules[r], static_cast<std::int64_t>(id),
         spread(cfg.diver_count, cfg.diver_rules.size(), r), cfg.dp_train, Split::train, gen, rng);
  }
  for (std::size_t r = 0; r < n_spec; ++r) {
    Rng rng{derive_seed(derive_seed(gen.seed, kTestStream), r)};
    emit(data.test, cfg.spec_rules[r], static_cast<std::int64_t>(r), spread(cfg.test_count, n_spec, r), cfg.dp_test,
         Split::test, gen, rng);
  }
  data.config = {{"generator", "math"},
                 {"mode", "specialist"},
                 {"spec_rules", rules_json(cfg.spec_rules)},
                 {"diver_rules", rules_json(cfg.diver_rules)},
                 {"spec_count", cfg.spec_count},
                 {"diver_count", cfg.diver_count},
                 {"test_count", cfg.test_count},
                 {"dp_train", cfg.dp_train},
                 {"dp_test", cfg.dp_test},
                 {"expr", to_json(gen)},
                 {"seed", gen.seed}};
  return data;
}

}  // namespace rewritelab::expr
