// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/markov.hpp"

#include <algorithm>
#include <unordered_set>

#include "rewritelab/errors.hpp"
#include "rewritelab/text.hpp"

namespace rewritelab::markov {

namespace {

bool contains(std::span<const Symbol> set, Symbol s) { return std::find(set.begin(), set.end(), s) != set.end(); }

void check_distinct(std::span<const Symbol> symbols, const char* what) {
  std::unordered_set<Symbol> seen;
  for (Symbol s : symbols) {
    if (!seen.insert(s).second) throw ValidationError(std::string("duplicate symbol in ") + what + ": " + utf8_encode(s));
  }
}

}  // namespace

Algorithm make_algorithm(std::vector<Symbol> base_alphabet, std::vector<Symbol> work_symbols, std::vector<Rule> rules) {
  if (base_alphabet.empty()) throw ValidationError("base alphabet must be non-empty");
  check_distinct(base_alphabet, "alphabet");
  check_distinct(work_symbols, "work symbols");
  for (Symbol s : work_symbols) {
    if (contains(base_alphabet, s)) throw ValidationError("work symbol also in base alphabet: " + utf8_encode(s));
  }
  auto declared = [&](Symbol s) { return contains(base_alphabet, s) || contains(work_symbols, s); };
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const Rule& r = rules[i];
    for (const Sequence* side : {&r.lhs, &r.rhs}) {
      for (Symbol s : *side) {
        if (!declared(s)) {
          throw ValidationError("rule " + std::to_string(i + 1) + " uses undeclared symbol " + utf8_encode(s));
        }
      }
    }
    if (r.lhs.empty() && i + 1 != rules.size()) {
      throw ValidationError("empty-lhs rule must be the last rule (found at rule " + std::to_string(i + 1) + ")");
    }
  }
  return Algorithm{std::move(base_alphabet), std::move(work_symbols), std::move(rules)};
}

std::vector<Rule> expand_schema(std::span<const SchemaRule> rules, std::span<const Symbol> base_alphabet,
                                std::span<const Symbol> variables) {
  if (base_alphabet.empty()) throw ValidationError("base alphabet must be non-empty");
  std::vector<Rule> out;
  for (const SchemaRule& schema : rules) {
    std::vector<Symbol> used;
    for (Symbol v : variables) {
      if (schema.lhs.find(v) != Sequence::npos) used.push_back(v);
    }
    for (Symbol s : schema.rhs) {
      if (contains(variables, s) && !contains(used, s)) {
        throw ValidationError("schema variable " + utf8_encode(s) + " appears in rhs but not in lhs");
      }
    }
    // Odometer over assignments; the first variable is the most significant digit.
    std::vector<std::size_t> digit(used.size(), 0);
    for (;;) {
      auto bind = [&](const Sequence& side) {
        Sequence concrete = side;
        for (Symbol& s : concrete) {
          const auto it = std::find(used.begin(), used.end(), s);
          if (it != used.end()) s = base_alphabet[digit[static_cast<std::size_t>(it - used.begin())]];
        }
        return concrete;
      };
      out.push_back(Rule{bind(schema.lhs), bind(schema.rhs), schema.terminal});
      bool exhausted = true;
      for (std::size_t pos = used.size(); pos-- > 0;) {
        if (++digit[pos] < base_alphabet.size()) {
          exhausted = false;
          break;
        }
        digit[pos] = 0;
      }
      if (exhausted) break;
    }
  }
  return out;
}

std::optional<StepOutcome> step(const Sequence& seq, const Algorithm& algo) {
  for (std::size_t i = 0; i < algo.rules.size(); ++i) {
    const Rule& rule = algo.rules[i];
    const std::size_t pos = rule.lhs.empty() ? 0 : seq.find(rule.lhs);
    if (pos == Sequence::npos) continue;
    StepOutcome out;
    out.next.reserve(seq.size() - rule.lhs.size() + rule.rhs.size());
    out.next.append(seq, 0, pos);
    out.next.append(rule.rhs);
    out.next.append(seq, pos + rule.lhs.size());
    out.rule_index = i;
    out.position = pos;
    out.terminal = rule.terminal;
    return out;
  }
  return std::nullopt;
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::terminated:
      return "terminated";
    case Status::blocked:
      return "blocked";
    case Status::step_limit:
      return "step_limit";
  }
  return "unknown";
}

RunResult run(Sequence seq, const Algorithm& algo, std::size_t max_steps) {
  if (max_steps == 0) throw ValidationError("max_steps must be at least 1");
  RunResult result;
  for (std::size_t n = 0; n < max_steps; ++n) {
    auto outcome = step(seq, algo);
    if (!outcome) {
      result.status = Status::blocked;
      result.final = std::move(seq);
      return result;
    }
    seq = std::move(outcome->next);
    result.trace.push_back(TraceEntry{outcome->rule_index, outcome->position, seq});
    if (outcome->terminal) {
      result.status = Status::terminated;
      result.final = std::move(seq);
      return result;
    }
  }
  result.status = step(seq, algo) ? Status::step_limit : Status::blocked;
  result.final = std::move(seq);
  return result;
}

}  // namespace rewritelab::markov
