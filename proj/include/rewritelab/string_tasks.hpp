// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/rng.hpp"

namespace rewritelab::strings {

inline constexpr std::string_view kLowercase = "abcdefghijklmnopqrstuvwxyz";
/// Separates src and dst in a rendered rule; excluded from data alphabets.
inline constexpr std::string_view kArrow = "->";

struct ReplaceRule {
  std::string src;
  std::string dst;

  friend bool operator==(const ReplaceRule&, const ReplaceRule&) = default;
};

struct RewriteOutcome {
  std::string output;
  bool applied = false;
};

/// Replaces the leftmost occurrence of rule.src with rule.dst.
RewriteOutcome apply_replace(std::string_view input, const ReplaceRule& rule);

std::string render_rule(const ReplaceRule& rule);
ReplaceRule parse_rule(std::string_view text);

/// Checks that an alphabet is non-empty, has no repeated letters and cannot
/// form the rule arrow or template delimiters.
void validate_alphabet(std::string_view alphabet);

std::string random_string(std::size_t len, std::string_view alphabet, Rng& rng);

/// Uniform random string of `input_len` with `pattern` written over a uniformly
/// chosen window.
std::string gen_input_with_pattern(std::string_view pattern, std::size_t input_len, std::string_view alphabet,
                                   Rng& rng);

/// Random string of `input_len` that does not contain `pattern`. Tries
/// rejection sampling first, then walks the pattern's KMP automaton so that a
/// pattern-free string is produced whenever one exists.
std::string gen_input_without_pattern(std::string_view pattern, std::size_t input_len, std::string_view alphabet,
                                      Rng& rng, std::size_t max_tries = 1000);

struct LengthRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct BasicTaskConfig {
  std::size_t num_instructions = 1000;
  std::size_t examples_per_instruction = 1000;
  std::size_t input_len = 50;
  std::size_t pattern_len = 20;
  /// Inclusive; {0, 0} means "same as pattern_len".
  LengthRange dst_len_range{};
  std::string alphabet{kLowercase};
  std::size_t test_instructions = 100;
  std::size_t test_examples_per_instruction = 10;
  std::uint64_t seed = 0;
};

void validate(const BasicTaskConfig& cfg);
nlohmann::json to_json(const BasicTaskConfig& cfg);

/// Draws `count` rules with pairwise distinct src strings that are also
/// distinct from `exclude`.
std::vector<ReplaceRule> gen_rules(std::size_t count, const BasicTaskConfig& cfg, Rng& rng,
                                   const std::vector<ReplaceRule>& exclude = {});

SplitDataset gen_basic_dataset(const BasicTaskConfig& cfg);

struct NoOpConfig {
  BasicTaskConfig base;
  double no_op_frac = 0.1;
};

SplitDataset gen_noop_dataset(const NoOpConfig& cfg);

/// Number of No-Op examples among `total`: round(frac * total).
std::size_t noop_count(double frac, std::size_t total);

struct PowerLawConfig {
  double alpha = 1.0;
  std::size_t num_instructions = 1000;
  std::size_t total_examples = 1000000;
};

struct PowerLawDraw {
  /// Raw weights x = u^(1/alpha), u ~ U(0, 1].
  std::vector<double> weights;
  std::vector<std::size_t> counts;
};

/// One weight per instruction from the density alpha * x^(alpha-1) on (0, 1],
/// turned into integer counts summing to total_examples by largest remainder.
PowerLawDraw sample_powerlaw(const PowerLawConfig& cfg, Rng& rng);
std::vector<std::size_t> sample_powerlaw_counts(const PowerLawConfig& cfg, Rng& rng);

/// Integer apportionment of `total` proportional to `weights`.
std::vector<std::size_t> largest_remainder(const std::vector<double>& weights, std::size_t total);

/// Per-rule counts follow sample_powerlaw_counts; base.examples_per_instruction
/// and base.num_instructions are ignored.
SplitDataset gen_powerlaw_dataset(const PowerLawConfig& cfg, const BasicTaskConfig& base);

enum class FamilyKind { repeated_chars, periodic, mirrored };

std::string_view to_string(FamilyKind kind);
FamilyKind parse_family_kind(std::string_view name);

struct SemanticFamily {
  FamilyKind kind = FamilyKind::periodic;
  int k = 1;
};

struct ConstrainedPattern {
  std::string pattern;
  std::string unit;
};

/// Deterministic construction of a family pattern from its unit.
std::string build_family_pattern(const SemanticFamily& family, std::string_view unit);

/// Draws a unit of `unit_len` letters (adjacent letters differ for repeated
/// chars) and builds the family pattern from it.
ConstrainedPattern gen_constrained_pattern(const SemanticFamily& family, std::size_t unit_len,
                                           std::string_view alphabet, Rng& rng);

/// Whether `pattern` is exactly the family construction over `unit`.
bool satisfies_family(std::string_view pattern, const SemanticFamily& family, std::string_view unit);
/// Unit-free predicate: every maximal run has length exactly k.
bool runs_of_exactly(std::string_view pattern, int k);

struct FamilyCount {
  SemanticFamily family;
  std::size_t count = 0;
};

struct SemanticTaskConfig {
  std::size_t input_len = 500;
  /// unit length is pattern_len / k, so pattern_len must be divisible by k.
  std::size_t pattern_len = 60;
  std::string alphabet{kLowercase};
  std::size_t examples_per_instruction = 10;
  std::size_t test_examples_per_instruction = 10;
  std::vector<FamilyCount> train;
  std::vector<FamilyCount> test;
  /// Apply the family constraint to dst as well as src.
  bool constrain_dst = true;
  std::uint64_t seed = 0;
};

SplitDataset gen_constrained_dataset(const SemanticTaskConfig& cfg);

}  // namespace rewritelab::strings
