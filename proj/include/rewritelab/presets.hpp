// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/eval_harness.hpp"
#include "rewritelab/expr_rewrite.hpp"
#include "rewritelab/string_tasks.hpp"
#include "rewritelab/trainer.hpp"

namespace rewritelab {

enum class PresetKind { phase_transition, noop_sweep, powerlaw_sweep, semantic_transfer, math_generalist, math_specialist };

std::string_view to_string(PresetKind kind);

/// Pure data: a generator, model and training bundle plus the value swept.
///
///   phase_transition   sweep = instruction counts; budget split evenly
///   noop_sweep         sweep = No-Op fractions
///   powerlaw_sweep     sweep = shape parameters alpha
///   semantic_transfer  sweep ignored; one run
///   math_generalist    sweep = numbers of training rules
///   math_specialist    sweep = numbers of diversification rules
struct ExperimentPreset {
  std::string name;
  std::string description;
  PresetKind kind = PresetKind::phase_transition;
  std::vector<double> sweep;
  /// Total number of training examples per sweep point.
  std::size_t budget = 0;
  strings::BasicTaskConfig basic;
  strings::SemanticTaskConfig semantic;
  expr::ExprGenConfig expr;
  expr::RuleShape shape;
  std::size_t test_rules = 0;
  std::size_t test_examples = 0;
  /// Specialist runs: size of R_spec.
  std::size_t spec_rules = 0;
  int dp_train = 1;
  int dp_test = 2;
  nn::ModelConfig model;
  nn::TrainConfig train;
  PromptTemplate tpl;
  /// Whether the acceptance suite gates on this preset.
  bool desk_scale = true;
};

const std::vector<ExperimentPreset>& preset_catalog();
const ExperimentPreset& find_preset(std::string_view name);

nlohmann::json to_json(const ExperimentPreset& preset);

/// Dataset of one sweep point.
SplitDataset preset_dataset(const ExperimentPreset& preset, double value);

struct SweepResult {
  double value = 0.0;
  std::size_t train_examples = 0;
  std::size_t test_examples = 0;
  eval::Metrics metrics;
  std::vector<nn::EpochLog> log;
};

/// Runs every sweep point: generates data into out/point-<i>/data, trains,
/// writes the checkpoint, metrics.csv and report.csv, and finally
/// out/results.csv in long form (value, bucket_key, count, exact_match).
std::vector<SweepResult> run_preset(const ExperimentPreset& preset, const std::filesystem::path& out,
                                    std::ostream* progress = nullptr);

}  // namespace rewritelab
