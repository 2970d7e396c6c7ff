// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace oracle {

using rewritelab::markov::Sequence;
using rewritelab::markov::Status;
using rewritelab::markov::Symbol;

std::string naive_replace(const std::string& input, const std::string& src, const std::string& dst, bool* applied) {
  for (std::size_t i = 0; i + src.size() <= input.size(); ++i) {
    bool same = true;
    for (std::size_t j = 0; j < src.size(); ++j) {
      if (input[i + j] != src[j]) {
        same = false;
        break;
      }
    }
    if (same) {
      *applied = true;
      std::string out;
      for (std::size_t k = 0; k < i; ++k) out += input[k];
      out += dst;
      for (std::size_t k = i + src.size(); k < input.size(); ++k) out += input[k];
      return out;
    }
  }
  *applied = false;
  return input;
}

namespace {

bool is_var(const std::vector<Symbol>& vars, Symbol s) { return std::find(vars.begin(), vars.end(), s) != vars.end(); }

/// Binds variables while reading lhs against seq at pos.
bool bind_at(const Sequence& lhs, const Sequence& seq, std::size_t pos, const std::vector<Symbol>& vars,
             const std::vector<Symbol>& alphabet, std::map<Symbol, Symbol>& binding) {
  if (pos + lhs.size() > seq.size()) return false;
  for (std::size_t j = 0; j < lhs.size(); ++j) {
    const Symbol p = lhs[j];
    const Symbol c = seq[pos + j];
    if (is_var(vars, p)) {
      if (std::find(alphabet.begin(), alphabet.end(), c) == alphabet.end()) return false;
      auto [it, inserted] = binding.emplace(p, c);
      if (!inserted && it->second != c) return false;
    } else if (p != c) {
      return false;
    }
  }
  return true;
}

Sequence substitute(const Sequence& side, const std::map<Symbol, Symbol>& binding) {
  Sequence out;
  for (Symbol s : side) {
    auto it = binding.find(s);
    out.push_back(it == binding.end() ? s : it->second);
  }
  return out;
}

struct Hit {
  std::size_t pos;
  std::map<Symbol, Symbol> binding;
};

std::optional<Hit> find_leftmost(const rewritelab::markov::SchemaRule& rule, const Sequence& seq,
                                 const std::vector<Symbol>& vars, const std::vector<Symbol>& alphabet) {
  for (std::size_t pos = 0; pos + rule.lhs.size() <= seq.size(); ++pos) {
    std::map<Symbol, Symbol> b;
    if (bind_at(rule.lhs, seq, pos, vars, alphabet, b)) return Hit{pos, b};
  }
  return std::nullopt;
}

std::optional<Hit> find_binding_order(const rewritelab::markov::SchemaRule& rule, const Sequence& seq,
                                      const std::vector<Symbol>& vars, const std::vector<Symbol>& alphabet) {
  std::vector<Symbol> used;
  for (Symbol v : vars) {
    if (rule.lhs.find(v) != Sequence::npos) used.push_back(v);
  }
  // Odometer over the used variables, first variable most significant.
  std::vector<std::size_t> digit(used.size(), 0);
  while (true) {
    std::map<Symbol, Symbol> fixed;
    for (std::size_t i = 0; i < used.size(); ++i) fixed[used[i]] = alphabet[digit[i]];
    const Sequence lhs = substitute(rule.lhs, fixed);
    for (std::size_t pos = 0; pos + lhs.size() <= seq.size(); ++pos) {
      if (std::equal(lhs.begin(), lhs.end(), seq.begin() + static_cast<long>(pos))) return Hit{pos, fixed};
    }
    std::size_t i = used.size();
    while (i > 0) {
      --i;
      if (++digit[i] < alphabet.size()) break;
      digit[i] = 0;
      if (i == 0) return std::nullopt;
    }
    if (used.empty()) return std::nullopt;
  }
}

}  // namespace

MarkovRun run_schema(const rewritelab::markov::Program& program, Sequence input, MatchOrder order,
                     std::size_t max_steps) {
  const auto& alphabet = program.algorithm.base_alphabet;
  MarkovRun result{std::move(input), Status::blocked, {}};
  for (std::size_t step = 0; step < max_steps; ++step) {
    bool fired = false;
    for (const auto& rule : program.schema) {
      const auto hit = order == MatchOrder::leftmost ? find_leftmost(rule, result.final, program.variables, alphabet)
                                                     : find_binding_order(rule, result.final, program.variables, alphabet);
      if (!hit) continue;
      result.final.replace(hit->pos, rule.lhs.size(), substitute(rule.rhs, hit->binding));
      result.trace.push_back(result.final);
      if (rule.terminal) {
        result.status = Status::terminated;
        return result;
      }
      fired = true;
      break;
    }
    if (!fired) return result;
  }
  result.status = Status::step_limit;
  return result;
}

std::optional<ExprMatch> enumerate_match(const rewritelab::expr::Expr& e, const rewritelab::expr::Expr& pattern) {
  using namespace rewritelab::expr;
  std::vector<std::string> vars;
  std::function<void(const Expr&)> collect = [&](const Expr& p) {
    if (p.kind == Expr::Kind::var && std::find(vars.begin(), vars.end(), p.name) == vars.end()) vars.push_back(p.name);
    for (const auto& c : p.children) collect(c);
  };
  collect(pattern);
  std::vector<Expr> candidates;
  for (const auto& path : preorder_paths(e)) candidates.push_back(subtree(e, path));

  for (const auto& path : preorder_paths(e)) {
    const Expr& site = subtree(e, path);
    std::vector<std::size_t> digit(vars.size(), 0);
    while (true) {
      Substitution s;
      for (std::size_t i = 0; i < vars.size(); ++i) s[vars[i]] = candidates[digit[i]];
      if (instantiate(pattern, s) == site) return ExprMatch{path, s};
      std::size_t i = vars.size();
      bool done = true;
      while (i > 0) {
        --i;
        if (++digit[i] < candidates.size()) {
          done = false;
          break;
        }
        digit[i] = 0;
      }
      if (done) break;
    }
  }
  return std::nullopt;
}

double ks_statistic_power(std::vector<double> sample, double alpha) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = std::pow(sample[i], alpha);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace oracle
