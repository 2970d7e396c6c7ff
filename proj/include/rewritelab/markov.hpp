// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rewritelab::markov {

/// A symbol is a single code point; multi-character symbols are not supported.
using Symbol = char32_t;
using Sequence = std::u32string;

/// Concrete rewrite rule `lhs -> rhs`. An empty lhs matches at position 0.
struct Rule {
  Sequence lhs;
  Sequence rhs;
  bool terminal = false;

  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Rule whose sides may mention schema variables standing for any base letter.
struct SchemaRule {
  Sequence lhs;
  Sequence rhs;
  bool terminal = false;
};

/// Ordered rule list over base alphabet U plus work symbols. Construct through
/// make_algorithm() so the invariants are checked.
struct Algorithm {
  std::vector<Symbol> base_alphabet;
  std::vector<Symbol> work_symbols;
  std::vector<Rule> rules;
};

Algorithm make_algorithm(std::vector<Symbol> base_alphabet, std::vector<Symbol> work_symbols, std::vector<Rule> rules);

/// Replaces every schema rule by one concrete rule per assignment of its
/// variables to base letters. Assignments are enumerated lexicographically:
/// variables in `variables` order (first is most significant), letters in
/// `base_alphabet` order.
std::vector<Rule> expand_schema(std::span<const SchemaRule> rules, std::span<const Symbol> base_alphabet,
                                std::span<const Symbol> variables);

struct StepOutcome {
  Sequence next;
  std::size_t rule_index = 0;
  std::size_t position = 0;
  bool terminal = false;
};

/// First applicable rule, leftmost occurrence. nullopt means blocked.
std::optional<StepOutcome> step(const Sequence& seq, const Algorithm& algo);

enum class Status { terminated, blocked, step_limit };

std::string_view to_string(Status status);

struct TraceEntry {
  std::size_t rule_index = 0;
  std::size_t position = 0;
  Sequence after;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct RunResult {
  Sequence final;
  Status status = Status::blocked;
  std::vector<TraceEntry> trace;
};

inline constexpr std::size_t kDefaultMaxSteps = 10000;

RunResult run(Sequence seq, const Algorithm& algo, std::size_t max_steps = kDefaultMaxSteps);

/// Parsed rule file: header lines `alphabet:`, `work:` and optional `vars:`,
/// then one `LHS -> RHS` (or `LHS ->. RHS` for stop rules) per line.
struct Program {
  Algorithm algorithm;
  std::vector<Symbol> variables;
  std::vector<SchemaRule> schema;
};

Program parse_program(std::string_view text);
Program load_program(const std::string& path);

/// The reversal-concatenation algorithm over {a, b} with work symbols α, β.
Program reversal_program();

}  // namespace rewritelab::markov
