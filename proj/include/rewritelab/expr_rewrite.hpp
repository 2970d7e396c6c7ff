// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/expr.hpp"

namespace rewritelab::expr {

/// Equational rule lhs = rhs. Variables in a rule are rule-variables that
/// match any subtree; they never clash with expression variables.
struct AbstractRule {
  Expr lhs;
  Expr rhs;
  std::string id;
};

/// Checks vars(rhs) ⊆ vars(lhs) and that lhs is not a bare variable.
void validate(const AbstractRule& rule);

/// "lhs=rhs" in canonical rendering.
std::string render_rule(const AbstractRule& rule);
AbstractRule parse_rule(std::string_view text);

using Substitution = std::map<std::string, Expr>;

struct Match {
  Path path;
  Substitution subst;
};

/// Whether `pattern` matches `e` at its root, extending `subst`.
bool match_at(const Expr& e, const Expr& pattern, Substitution& subst);

/// First match in pre-order (leftmost-outermost).
std::optional<Match> find_match(const Expr& e, const Expr& pattern);
std::optional<Substitution> match(const Expr& e, const Expr& pattern);

/// Replaces every rule-variable leaf with its bound subtree. Throws
/// ValidationError naming the first unbound variable.
Expr instantiate(const Expr& rule_side, const Substitution& subst);

struct ExprOutcome {
  Expr output;
  bool applied = false;
};

/// Rewrites the first matching subtree only.
ExprOutcome apply_abstract_rule(const Expr& e, const AbstractRule& rule);

struct RuleShape {
  int num_vars = 2;
  int lhs_depth = 2;
  int rhs_depth = 2;
};

/// Structural hashes of rules generated so far, used to keep rules distinct.
using RuleRegistry = std::unordered_set<std::size_t>;

std::size_t rule_hash(const AbstractRule& rule);

inline const std::vector<std::string> kRuleVars{"a", "b", "c", "d"};

/// Random rule over the first `num_vars` of a, b, c, d. lhs uses every
/// variable; rhs uses a subset. Variables are named by first appearance in
/// lhs so that renamings of one rule collapse to the same hash.
AbstractRule gen_abstract_rule(const RuleShape& shape, const ExprGenConfig& cfg, Rng& rng, RuleRegistry& registry);

std::vector<AbstractRule> gen_rule_set(std::size_t count, const RuleShape& shape, const ExprGenConfig& cfg, Rng& rng,
                                       RuleRegistry& registry);

struct Grounded {
  Expr instance;
  Expr target;
  Substitution grounding;
  Path site;
};

/// Grounds every rule variable with a random tree of depth `pattern_depth`,
/// writes the concrete lhs over a uniformly chosen leaf of `host`, and rewrites
/// it. Retries until the first match in the instance is the embedded site.
Grounded ground_and_embed(const AbstractRule& rule, const Expr& host, int pattern_depth, const ExprGenConfig& cfg,
                          Rng& rng, int max_retries = 64);

Example make_example(const AbstractRule& rule, const Grounded& g, std::int64_t rule_id, int host_depth,
                     int pattern_depth, Split split);

struct GeneralistConfig {
  std::size_t num_rules = 100;
  std::size_t instances_total = 50000;
  std::size_t test_rules = 20;
  std::size_t test_instances = 1000;
  RuleShape shape{};
  ExprGenConfig expr{};
};

/// Training instances spread evenly over `num_rules` rules; the test split
/// uses fresh rules only.
SplitDataset gen_generalist_dataset(const GeneralistConfig& cfg);

struct SpecialistMixtureConfig {
  std::vector<AbstractRule> spec_rules;
  std::vector<AbstractRule> diver_rules;
  std::size_t spec_count = 0;
  std::size_t diver_count = 0;
  std::size_t test_count = 0;
  int dp_train = 1;
  int dp_test = 2;
};

/// Train mixes R_spec and R_diver instances at dp_train; test holds R_spec
/// instances at dp_test.
SplitDataset gen_specialist_dataset(const SpecialistMixtureConfig& cfg, const ExprGenConfig& gen);

}  // namespace rewritelab::expr
