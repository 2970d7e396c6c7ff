// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace rewritelab {

enum class TaskKind { basic_replace, cond_replace, markov, expr_rewrite };
enum class Split { train, test };

std::string_view to_string(TaskKind kind);
std::string_view to_string(Split split);
TaskKind parse_task_kind(std::string_view name);
Split parse_split(std::string_view name);

struct ExampleMeta {
  std::int64_t rule_id = 0;
  bool is_noop = false;
  std::optional<std::string> family;
  std::optional<int> k;
  std::optional<std::string> unit;
  std::optional<double> alpha;
  std::optional<int> d;
  std::optional<int> d_p;
  Split split = Split::train;

  friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

/// One (instruction, input, target) record.
struct Example {
  TaskKind task_kind = TaskKind::basic_replace;
  std::string instruction;
  std::string input;
  std::string target;
  ExampleMeta meta;

  friend bool operator==(const Example&, const Example&) = default;
};

struct SplitDataset {
  std::vector<Example> train;
  std::vector<Example> test;
  /// Generator name, full configuration and seed; stored in manifest.json.
  nlohmann::json config = nlohmann::json::object();
};

inline constexpr int kFormatVersion = 1;

/// Prompt layout. `format` holds `{rule}` and `{input}` exactly once and ends
/// with `cue`; the completion starts right after the cue.
struct PromptTemplate {
  std::string format = "Rule: {rule}\nInput: {input}\nOutput:";
  std::string cue = "Output:";
};

/// Returns the default template when `tpl.format` is empty, otherwise
/// validates it.
PromptTemplate resolve_template(const PromptTemplate& tpl);

std::string format_prompt(const Example& ex, const PromptTemplate& tpl = {});
/// Prompt followed by the target; the end marker is appended as a token by
/// the tokenizer.
std::string format_training_text(const Example& ex, const PromptTemplate& tpl = {});

/// Splits a training text back into (prompt, target) at the output cue.
std::pair<std::string, std::string> split_at_cue(std::string_view text, const PromptTemplate& tpl = {});

struct PromptFields {
  std::string rule;
  std::string input;
};
/// Recovers the rule and input fields from a rendered prompt.
PromptFields parse_prompt(std::string_view prompt, const PromptTemplate& tpl = {});

nlohmann::ordered_json to_json(const Example& ex);
Example example_from_json(const nlohmann::json& j);

/// Writes train.jsonl, test.jsonl and manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const SplitDataset& data);
SplitDataset read_dataset(const std::filesystem::path& dir);

std::vector<Example> read_examples(const std::filesystem::path& file, Split expected);
void write_examples(const std::filesystem::path& file, const std::vector<Example>& examples);

/// Moves every example whose rule id is in `test_rule_ids` to the test split.
SplitDataset split_by_rule(std::vector<Example> examples, const std::set<std::int64_t>& test_rule_ids);

std::set<std::int64_t> rule_ids(const std::vector<Example>& examples);

}  // namespace rewritelab
