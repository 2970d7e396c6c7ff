// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <optional>

#include "rewritelab/errors.hpp"

namespace rewritelab::expr {

Expr Expr::var(std::string name) {
  Expr e;
  e.kind = Kind::var;
  e.name = std::move(name);
  return e;
}

Expr Expr::constant(std::int64_t value) {
  Expr e;
  e.kind = Kind::constant;
  e.value = value;
  return e;
}

Expr Expr::unary(UnaryOp op, Expr child) {
  Expr e;
  e.kind = Kind::unary;
  e.unary_op = op;
  e.children.push_back(std::move(child));
  return e;
}

Expr Expr::binary(BinaryOp op, Expr left, Expr right) {
  Expr e;
  e.kind = Kind::binary;
  e.binary_op = op;
  e.children.reserve(2);
  e.children.push_back(std::move(left));
  e.children.push_back(std::move(right));
  return e;
}

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::div, std::move(a), std::move(b)); }
Expr pow(Expr base, std::int64_t exponent) {
  return Expr::binary(BinaryOp::pow, std::move(base), Expr::constant(exponent));
}

char symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add:
      return '+';
    case BinaryOp::sub:
      return '-';
    case BinaryOp::mul:
      return '*';
    case BinaryOp::div:
      return '/';
    case BinaryOp::pow:
      return '^';
  }
  return '?';
}

std::string_view name(UnaryOp op) {
  switch (op) {
    case UnaryOp::log:
      return "log";
    case UnaryOp::cos:
      return "cos";
    case UnaryOp::sin:
      return "sin";
    case UnaryOp::neg:
      return "neg";
  }
  return "?";
}

int depth(const Expr& e) {
  int d = 0;
  for (const auto& c : e.children) d = std::max(d, depth(c) + 1);
  return d;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& c : e.children) n += node_count(c);
  return n;
}

std::size_t structural_hash(const Expr& e) {
  auto combine = [](std::size_t seed, std::size_t v) {
    return static_cast<std::size_t>(mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2))));
  };
  std::size_t h = static_cast<std::size_t>(e.kind) + 1;
  switch (e.kind) {
    case Expr::Kind::binary:
      h = combine(h, static_cast<std::size_t>(e.binary_op));
      break;
    case Expr::Kind::unary:
      h = combine(h, static_cast<std::size_t>(e.unary_op));
      break;
    case Expr::Kind::var:
      h = combine(h, std::hash<std::string>{}(e.name));
      break;
    case Expr::Kind::constant:
      h = combine(h, static_cast<std::size_t>(e.value));
      break;
  }
  for (const auto& c : e.children) h = combine(h, structural_hash(c));
  return h;
}

const Expr& subtree(const Expr& e, const Path& path) {
  const Expr* node = &e;
  for (auto i : path) {
    if (i >= node->children.size()) throw ValidationError("path does not address a node");
    node = &node->children[i];
  }
  return *node;
}

Expr replace_subtree(const Expr& e, const Path& path, Expr replacement) {
  Expr out = e;
  Expr* node = &out;
  for (auto i : path) {
    if (i >= node->children.size()) throw ValidationError("path does not address a node");
    node = &node->children[i];
  }
  *node = std::move(replacement);
  return out;
}

namespace {

void collect_paths(const Expr& e, Path& cur, std::vector<Path>& out, bool leaves_only) {
  if (!leaves_only || e.is_leaf()) out.push_back(cur);
  for (std::uint32_t i = 0; i < e.children.size(); ++i) {
    cur.push_back(i);
    collect_paths(e.children[i], cur, out, leaves_only);
    cur.pop_back();
  }
}

void collect_vars(const Expr& e, std::vector<std::string>& out) {
  if (e.kind == Expr::Kind::var && std::find(out.begin(), out.end(), e.name) == out.end()) out.push_back(e.name);
  for (const auto& c : e.children) collect_vars(c, out);
}

}  // namespace

std::vector<Path> preorder_paths(const Expr& e) {
  std::vector<Path> out;
  Path cur;
  collect_paths(e, cur, out, false);
  return out;
}

std::vector<Path> leaf_paths(const Expr& e) {
  std::vector<Path> out;
  Path cur;
  collect_paths(e, cur, out, true);
  return out;
}

std::vector<std::string> variables(const Expr& e) {
  std::vector<std::string> out;
  collect_vars(e, out);
  return out;
}

namespace {

void render_into(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::var:
      out += e.name;
      return;
    case Expr::Kind::constant:
      out += std::to_string(e.value);
      return;
    case Expr::Kind::unary:
      out += name(e.unary_op);
      out += '(';
      render_into(e.children[0], out);
      out += ')';
      return;
    case Expr::Kind::binary:
      out += '(';
      render_into(e.children[0], out);
      out += symbol(e.binary_op);
      render_into(e.children[1], out);
      out += ')';
      return;
  }
}

int precedence(const Expr& e) {
  if (e.kind != Expr::Kind::binary) return 4;
  switch (e.binary_op) {
    case BinaryOp::add:
    case BinaryOp::sub:
      return 1;
    case BinaryOp::mul:
    case BinaryOp::div:
      return 2;
    case BinaryOp::pow:
      return 3;
  }
  return 0;
}

std::string pretty(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::var:
      return e.name;
    case Expr::Kind::constant:
      return std::to_string(e.value);
    case Expr::Kind::unary:
      return std::string(name(e.unary_op)) + "(" + pretty(e.children[0]) + ")";
    case Expr::Kind::binary:
      break;
  }
  const Expr& l = e.children[0];
  const Expr& r = e.children[1];
  const int p = precedence(e);
  auto wrap = [](std::string s, bool paren) { return paren ? "(" + s + ")" : s; };
  if (e.binary_op == BinaryOp::pow) {
    return wrap(pretty(l), precedence(l) <= 3) + "^" + wrap(pretty(r), r.kind != Expr::Kind::constant);
  }
  const bool non_assoc = e.binary_op == BinaryOp::sub || e.binary_op == BinaryOp::div;
  std::string ls = wrap(pretty(l), precedence(l) < p);
  std::string rs = wrap(pretty(r), precedence(r) < p || (precedence(r) == p && non_assoc));
  if (e.binary_op == BinaryOp::mul && l.kind == Expr::Kind::constant &&
      (r.kind == Expr::Kind::var || r.kind == Expr::Kind::unary)) {
    return ls + rs;
  }
  return ls + symbol(e.binary_op) + rs;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse_expr();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  Expr parse_expr() {
    Expr e = parse_primary();
    while (peek() == '^') {
      ++pos_;
      e = Expr::binary(BinaryOp::pow, std::move(e), parse_primary());
    }
    return e;
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr left = parse_expr();
      const char op = peek();
      std::optional<BinaryOp> bop;
      switch (op) {
        case '+':
          bop = BinaryOp::add;
          break;
        case '-':
          bop = BinaryOp::sub;
          break;
        case '*':
          bop = BinaryOp::mul;
          break;
        case '/':
          bop = BinaryOp::div;
          break;
        default:
          break;
      }
      if (!bop) {
        expect(')');
        return left;
      }
      ++pos_;
      Expr right = parse_expr();
      expect(')');
      return Expr::binary(*bop, std::move(left), std::move(right));
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::int64_t v = 0;
      const auto start = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        if (pos_ - start >= 18) fail("integer literal too long");
        v = v * 10 + (text_[pos_++] - '0');
      }
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const auto start = pos_;
      while (std::isalpha(static_cast<unsigned char>(peek()))) ++pos_;
      const std::string_view word = text_.substr(start, pos_ - start);
      if (peek() == '(') {
        for (auto op : {UnaryOp::log, UnaryOp::cos, UnaryOp::sin, UnaryOp::neg}) {
          if (word == name(op)) {
            ++pos_;
            Expr child = parse_expr();
            expect(')');
            return Expr::unary(op, std::move(child));
          }
        }
      }
      if (word.size() != 1) {
        pos_ = start;
        fail("unknown function or multi-letter variable '" + std::string(word) + "'");
      }
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      return Expr::var(std::string(text_.substr(start, pos_ - start)));
    }
    if (c == '\0') fail("unexpected end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out);
  return out;
}

std::string render_pretty(const Expr& e) { return pretty(e); }

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

void validate(const ExprGenConfig& cfg) {
  if (cfg.depth < 0 || cfg.pattern_depth < 0) throw ValidationError("depths must be non-negative");
  if (cfg.const_min < 0 || cfg.const_min > cfg.const_max) throw ValidationError("invalid constant range");
  if (cfg.pow_min < 2 || cfg.pow_min > cfg.pow_max) throw ValidationError("pow exponent range must start at 2 or more");
  if (cfg.var_prob < 0.0 || cfg.var_prob > 1.0) throw ValidationError("var_prob must lie in [0, 1]");
  const auto& w = cfg.weights;
  for (double x : {w.add, w.sub, w.mul, w.div, w.pow, w.log, w.cos, w.sin, w.neg}) {
    if (x < 0.0 || !std::isfinite(x)) throw ValidationError("operator weights must be finite and non-negative");
  }
  if (w.add + w.sub + w.mul + w.div + w.pow <= 0.0) throw ValidationError("some binary operator needs positive weight");
  for (const auto& v : cfg.leaf_vars) {
    if (v.empty() || !std::isalpha(static_cast<unsigned char>(v[0])) ||
        !std::all_of(v.begin() + 1, v.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      throw ValidationError("variable names are one letter followed by digits: '" + v + "'");
    }
  }
}

nlohmann::json to_json(const ExprGenConfig& cfg) {
  const auto& w = cfg.weights;
  return {{"depth", cfg.depth},
          {"pattern_depth", cfg.pattern_depth},
          {"leaf_vars", cfg.leaf_vars},
          {"const_min", cfg.const_min},
          {"const_max", cfg.const_max},
          {"pow_min", cfg.pow_min},
          {"pow_max", cfg.pow_max},
          {"var_prob", cfg.var_prob},
          {"weights",
           {{"add", w.add},
            {"sub", w.sub},
            {"mul", w.mul},
            {"div", w.div},
            {"pow", w.pow},
            {"log", w.log},
            {"cos", w.cos},
            {"sin", w.sin},
            {"neg", w.neg}}},
          {"seed", cfg.seed}};
}

namespace {

enum class Choice { add, sub, mul, div, pow, log, cos, sin, neg };

Expr gen_leaf(const ExprGenConfig& cfg, Rng& rng, const std::vector<std::string>& vars) {
  if (!vars.empty() && std::bernoulli_distribution(cfg.var_prob)(rng)) return Expr::var(vars[uniform_index(rng, vars.size())]);
  return Expr::constant(std::uniform_int_distribution<std::int64_t>(cfg.const_min, cfg.const_max)(rng));
}

Expr gen_tree(const ExprGenConfig& cfg, int d, Rng& rng, const std::vector<std::string>& vars) {
  if (d == 0) return gen_leaf(cfg, rng, vars);
  const auto& w = cfg.weights;
  const bool unary_ok = d == 1;
  const std::array<double, 9> weights{w.add, w.sub, w.mul, w.div, w.pow, unary_ok ? w.log : 0.0,
                                      unary_ok ? w.cos : 0.0, unary_ok ? w.sin : 0.0, unary_ok ? w.neg : 0.0};
  const auto choice = static_cast<Choice>(std::discrete_distribution<int>(weights.begin(), weights.end())(rng));
  switch (choice) {
    case Choice::log:
      return Expr::unary(UnaryOp::log, gen_leaf(cfg, rng, vars));
    case Choice::cos:
      return Expr::unary(UnaryOp::cos, gen_leaf(cfg, rng, vars));
    case Choice::sin:
      return Expr::unary(UnaryOp::sin, gen_leaf(cfg, rng, vars));
    case Choice::neg:
      return Expr::unary(UnaryOp::neg, gen_leaf(cfg, rng, vars));
    case Choice::pow: {
      Expr base = gen_tree(cfg, d - 1, rng, vars);
      return pow(std::move(base), std::uniform_int_distribution<std::int64_t>(cfg.pow_min, cfg.pow_max)(rng));
    }
    default:
      break;
  }
  static constexpr std::array<BinaryOp, 4> ops{BinaryOp::add, BinaryOp::sub, BinaryOp::mul, BinaryOp::div};
  const auto op = ops[static_cast<std::size_t>(choice)];
  // One side carries the full remaining depth; the other is free to be shallower.
  const bool deep_left = std::bernoulli_distribution(0.5)(rng);
  const int other = std::uniform_int_distribution<int>(0, d - 1)(rng);
  Expr left = gen_tree(cfg, deep_left ? d - 1 : other, rng, vars);
  Expr right = gen_tree(cfg, deep_left ? other : d - 1, rng, vars);
  return Expr::binary(op, std::move(left), std::move(right));
}

}  // namespace

Expr gen_random_tree(const ExprGenConfig& cfg, int d, Rng& rng) { return gen_random_tree(cfg, d, rng, cfg.leaf_vars); }

Expr gen_random_tree(const ExprGenConfig& cfg, int d, Rng& rng, const std::vector<std::string>& leaf_vars) {
  if (d < 0) throw ValidationError("tree depth must be non-negative");
  return gen_tree(cfg, d, rng, leaf_vars);
}

}  // namespace rewritelab::expr
