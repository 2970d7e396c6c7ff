// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewritelab/rng.hpp"

namespace rewritelab::expr {

enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };
enum class UnaryOp : std::uint8_t { log, cos, sin, neg };

/// Algebraic expression tree with value semantics. Unused fields stay at
/// their defaults so that defaulted equality is structural equality.
struct Expr {
  enum class Kind : std::uint8_t { binary, unary, var, constant };

  Kind kind = Kind::constant;
  BinaryOp binary_op = BinaryOp::add;
  UnaryOp unary_op = UnaryOp::log;
  std::string name;
  std::int64_t value = 0;
  std::vector<Expr> children;

  static Expr var(std::string name);
  static Expr constant(std::int64_t value);
  static Expr unary(UnaryOp op, Expr child);
  static Expr binary(BinaryOp op, Expr left, Expr right);

  bool is_leaf() const noexcept { return children.empty(); }

  friend bool operator==(const Expr&, const Expr&) = default;
};

// Construction helpers for readable tests and fixtures.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr pow(Expr base, std::int64_t exponent);

char symbol(BinaryOp op);
std::string_view name(UnaryOp op);

/// Depth of the tree; leaves have depth 0.
int depth(const Expr& e);
std::size_t node_count(const Expr& e);
std::size_t structural_hash(const Expr& e);

/// Child indices from the root.
using Path = std::vector<std::uint32_t>;

const Expr& subtree(const Expr& e, const Path& path);
Expr replace_subtree(const Expr& e, const Path& path, Expr replacement);
/// Every node path in pre-order (node before children, children left to right).
std::vector<Path> preorder_paths(const Expr& e);
std::vector<Path> leaf_paths(const Expr& e);
/// Distinct variable names in order of first pre-order appearance.
std::vector<std::string> variables(const Expr& e);

/// Fully parenthesised infix with explicit `*` and `^`; the canonical form
/// used in datasets.
std::string render(const Expr& e);
/// Minimal-parenthesis rendering with implicit products such as `2x`. Display
/// only; not guaranteed to parse back.
std::string render_pretty(const Expr& e);

/// Parses the canonical grammar
///   expr := '(' expr binop expr ')' | '(' expr '^' atom ')' | expr '^' atom
///         | func '(' expr ')' | var | int
/// Throws ParseError with the byte offset of the problem.
Expr parse(std::string_view text);

struct OperatorWeights {
  double add = 1.0;
  double sub = 1.0;
  double mul = 1.0;
  double div = 1.0;
  double pow = 0.5;
  double log = 0.25;
  double cos = 0.25;
  double sin = 0.25;
  double neg = 0.25;
};

struct ExprGenConfig {
  int depth = 3;
  int pattern_depth = 1;
  std::vector<std::string> leaf_vars{"x", "y", "z", "t", "k"};
  std::int64_t const_min = 1;
  std::int64_t const_max = 9;
  std::int64_t pow_min = 2;
  std::int64_t pow_max = 3;
  /// Probability that a leaf is a variable rather than a constant.
  double var_prob = 0.5;
  OperatorWeights weights{};
  std::uint64_t seed = 0;
};

void validate(const ExprGenConfig& cfg);
nlohmann::json to_json(const ExprGenConfig& cfg);

/// Random tree whose depth is exactly `depth`. Interior nodes come from the
/// binary operators and pow (with a constant exponent); unary operators only
/// wrap leaves, i.e. appear at height 1.
Expr gen_random_tree(const ExprGenConfig& cfg, int depth, Rng& rng);

/// Same, with leaves drawn from `leaf_vars` instead of cfg.leaf_vars.
Expr gen_random_tree(const ExprGenConfig& cfg, int depth, Rng& rng, const std::vector<std::string>& leaf_vars);

}  // namespace rewritelab::expr
