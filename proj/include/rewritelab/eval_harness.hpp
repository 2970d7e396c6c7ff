// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/transformer.hpp"
#include "rewritelab/vocab.hpp"

namespace rewritelab::eval {

/// Maps an ordered list of prompts to an equally long list of completions.
using ModelAdapter = std::function<std::vector<std::string>(const std::vector<std::string>&)>;

/// Stripped from the end of a completion before comparison.
inline constexpr std::string_view kEndMarker = "<eos>";

/// Removes surrounding whitespace and one trailing end marker. Strict mode
/// removes only the end marker.
std::string normalize(std::string_view text, bool strict = false);
bool exact_match(std::string_view prediction, std::string_view target, bool strict = false);

struct BucketStat {
  std::size_t count = 0;
  std::size_t correct = 0;
  double exact_match() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct Metrics {
  std::size_t count = 0;
  std::size_t correct = 0;
  double overall_exact_match = 0.0;
  /// Keys look like "noop=true" or "family=periodic". Every example lands in
  /// exactly one "task=" and one "noop=" bucket; other dimensions appear only
  /// when the metadata carries them.
  std::map<std::string, BucketStat> buckets;
  std::vector<std::string> warnings;
};

struct EvalOptions {
  /// Rule ids of the training split; enables the "seen=" buckets.
  std::optional<std::set<std::int64_t>> train_rule_ids;
  bool strict = false;
};

std::vector<std::string> bucket_keys(const Example& ex, const EvalOptions& options);

/// Scores completions against targets, index by index.
Metrics score(const std::vector<std::string>& completions, const std::vector<Example>& test_set,
              const EvalOptions& options = {});

Metrics evaluate(const ModelAdapter& adapter, const std::vector<Example>& test_set, const PromptTemplate& tpl = {},
                 const EvalOptions& options = {});

/// Ground-truth rewrite of a rendered prompt: `SRC->DST` rules go through the
/// string oracle, `lhs=rhs` rules through the expression rewriter.
std::string oracle_answer(std::string_view prompt, const PromptTemplate& tpl = {});
ModelAdapter oracle_adapter(PromptTemplate tpl = {});

/// Wraps `inner` and changes one character in round(fraction * n) of the
/// outputs, chosen by a seeded permutation.
ModelAdapter corrupting_adapter(ModelAdapter inner, double fraction, std::uint64_t seed);

/// Greedy decoding with an in-process model.
ModelAdapter model_adapter(const nn::Transformer<float>& model, const nn::Vocab& vocab);

/// One escaped prompt per line.
void write_prompts(const std::filesystem::path& path, const std::vector<Example>& test_set,
                   const PromptTemplate& tpl = {});
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
/// Reads and unescapes one entry per line. Errors name the 1-based line.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Scores an external prompts/completions file pair. The prompts must be the
/// rendered test prompts in order.
Metrics run_external(const std::filesystem::path& prompts_path, const std::filesystem::path& completions_path,
                     const std::vector<Example>& test_set, const PromptTemplate& tpl = {},
                     const EvalOptions& options = {});

/// Columns: bucket_key, count, exact_match. The first row is "overall".
void write_report_csv(const std::filesystem::path& path, const Metrics& metrics);
nlohmann::ordered_json to_json(const Metrics& metrics);

}  // namespace rewritelab::eval
