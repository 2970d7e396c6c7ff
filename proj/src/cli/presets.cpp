// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/presets.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rewritelab/checkpoint.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/rng.hpp"

namespace rewritelab {

std::string_view to_string(PresetKind kind) {
  switch (kind) {
    case PresetKind::phase_transition: return "phase_transition";
    case PresetKind::noop_sweep: return "noop_sweep";
    case PresetKind::powerlaw_sweep: return "powerlaw_sweep";
    case PresetKind::semantic_transfer: return "semantic_transfer";
    case PresetKind::math_generalist: return "math_generalist";
    case PresetKind::math_specialist: return "math_specialist";
  }
  return "unknown";
}

namespace {

nn::ModelConfig model(int layers, int d_model, int heads) {
  nn::ModelConfig m;
  m.n_layers = layers;
  m.d_model = d_model;
  m.n_heads = heads;
  return m;
}

nn::TrainConfig training(int epochs, int batch = 64) {
  nn::TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch;
  t.eval_samples = 200;
  return t;
}

strings::BasicTaskConfig replace_task(std::size_t input_len, std::size_t pattern_len, std::size_t instructions) {
  strings::BasicTaskConfig b;
  b.input_len = input_len;
  b.pattern_len = pattern_len;
  b.num_instructions = instructions;
  b.test_instructions = 100;
  b.test_examples_per_instruction = 10;
  return b;
}

std::vector<ExperimentPreset> build_catalog() {
  std::vector<ExperimentPreset> out;

  {
    ExperimentPreset p;
    p.name = "phase-transition-mini";
    p.description = "Unseen-rule accuracy against instruction count I at a fixed budget of 1e5 examples "
                    "(input 20, pattern 5, 2 layers / 64 dims / 2 heads)";
    p.kind = PresetKind::phase_transition;
    p.sweep = {10, 100, 1000};
    p.budget = 100000;
    p.basic = replace_task(20, 5, 0);
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "noop-sweep-mini";
    p.description = "No-Op fraction sweep with 100 instructions and 2e4 examples";
    p.kind = PresetKind::noop_sweep;
    p.sweep = {0.1, 0.3, 0.5};
    p.budget = 20000;
    p.basic = replace_task(20, 5, 100);
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "powerlaw-sweep-mini";
    p.description = "Power-law shape sweep with 100 instructions and 2e4 examples";
    p.kind = PresetKind::powerlaw_sweep;
    p.sweep = {0.2, 1.0, 2.0};
    p.budget = 20000;
    p.basic = replace_task(20, 5, 100);
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "semantic-transfer-mini";
    p.description = "Train on all three families at k=3, test on k=2 (input 40, pattern 12)";
    p.kind = PresetKind::semantic_transfer;
    p.sweep = {0};
    p.semantic.input_len = 40;
    p.semantic.pattern_len = 12;
    p.semantic.examples_per_instruction = 100;
    p.semantic.test_examples_per_instruction = 10;
    for (auto kind : {strings::FamilyKind::repeated_chars, strings::FamilyKind::periodic,
                      strings::FamilyKind::mirrored}) {
      p.semantic.train.push_back({{kind, 3}, 60});
      p.semantic.test.push_back({{kind, 2}, 10});
    }
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "math-generalist-mini";
    p.description = "Accuracy on unseen abstract rules against training rule count at 2e4 instances";
    p.kind = PresetKind::math_generalist;
    p.sweep = {5, 20, 80};
    p.budget = 20000;
    p.test_rules = 20;
    p.test_examples = 500;
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "math-specialist-mini";
    p.description = "Accuracy of 5 specialist rules at pattern depth 2 after training at depth 1, against the "
                    "number of diversification rules; half the 2e4 budget goes to diversification when present";
    p.kind = PresetKind::math_specialist;
    p.sweep = {0, 20, 80};
    p.budget = 20000;
    p.spec_rules = 5;
    p.test_examples = 500;
    p.dp_train = 1;
    p.dp_test = 2;
    p.model = model(2, 64, 2);
    p.train = training(20);
    out.push_back(p);
  }

  const std::pair<std::size_t, std::size_t> scales[] = {{50, 20}, {100, 40}, {200, 50}};
  for (auto [input, pattern] : scales) {
    ExperimentPreset p;
    p.name = "phase-transition-full-" + std::to_string(input);
    p.description = "Full-scale instruction-count sweep, 1e6 examples, input " + std::to_string(input) +
                    ", pattern " + std::to_string(pattern) + ", 6 layers / 256 dims / 4 heads, 50 epochs";
    p.kind = PresetKind::phase_transition;
    p.sweep = {100, 200, 300, 500, 1000, 2000, 5000};
    p.budget = 1000000;
    p.basic = replace_task(input, pattern, 0);
    p.basic.test_instructions = 1000;
    p.basic.test_examples_per_instruction = 100;
    p.model = model(6, 256, 4);
    p.train = training(50);
    p.desk_scale = false;
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "noop-sweep-full";
    p.description = "Full-scale No-Op sweep, 1e6 examples over 1000 instructions";
    p.kind = PresetKind::noop_sweep;
    p.sweep = {0.1, 0.2, 0.3, 0.4, 0.5};
    p.budget = 1000000;
    p.basic = replace_task(50, 20, 1000);
    p.basic.test_instructions = 1000;
    p.basic.test_examples_per_instruction = 100;
    p.model = model(6, 256, 4);
    p.train = training(50);
    p.desk_scale = false;
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "powerlaw-sweep-full";
    p.description = "Full-scale power-law sweep, 1e6 examples over 1000 instructions";
    p.kind = PresetKind::powerlaw_sweep;
    p.sweep = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
    p.budget = 1000000;
    p.basic = replace_task(50, 20, 1000);
    p.basic.test_instructions = 1000;
    p.basic.test_examples_per_instruction = 100;
    p.model = model(6, 256, 4);
    p.train = training(50);
    p.desk_scale = false;
    out.push_back(p);
  }
  return out;
}

}  // namespace

const std::vector<ExperimentPreset>& preset_catalog() {
  static const std::vector<ExperimentPreset> catalog = build_catalog();
  return catalog;
}

const ExperimentPreset& find_preset(std::string_view name) {
  for (const auto& p : preset_catalog()) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "'");
}

nlohmann::json to_json(const ExperimentPreset& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["kind"] = to_string(p.kind);
  j["sweep"] = p.sweep;
  j["budget"] = p.budget;
  switch (p.kind) {
    case PresetKind::phase_transition:
    case PresetKind::noop_sweep:
    case PresetKind::powerlaw_sweep:
      j["basic"] = strings::to_json(p.basic);
      break;
    case PresetKind::semantic_transfer:
      j["semantic_seed"] = p.semantic.seed;
      j["semantic_input_len"] = p.semantic.input_len;
      j["semantic_pattern_len"] = p.semantic.pattern_len;
      break;
    case PresetKind::math_generalist:
    case PresetKind::math_specialist:
      j["expr"] = expr::to_json(p.expr);
      j["shape"] = {p.shape.num_vars, p.shape.lhs_depth, p.shape.rhs_depth};
      j["test_rules"] = p.test_rules;
      j["test_examples"] = p.test_examples;
      j["spec_rules"] = p.spec_rules;
      j["dp_train"] = p.dp_train;
      j["dp_test"] = p.dp_test;
      break;
  }
  j["model"] = {{"d_model", p.model.d_model}, {"n_layers", p.model.n_layers}, {"n_heads", p.model.n_heads}};
  j["train"] = nn::to_json(p.train);
  j["template"] = {{"format", p.tpl.format}, {"cue", p.tpl.cue}};
  return j;
}

SplitDataset preset_dataset(const ExperimentPreset& p, double value) {
  auto as_count = [&](double v) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError("sweep value must be a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  switch (p.kind) {
    case PresetKind::phase_transition: {
      auto b = p.basic;
      b.num_instructions = as_count(value);
      if (b.num_instructions == 0) throw ValidationError("instruction count must be positive");
      b.examples_per_instruction = p.budget / b.num_instructions;
      return strings::gen_basic_dataset(b);
    }
    case PresetKind::noop_sweep: {
      strings::NoOpConfig c;
      c.base = p.basic;
      c.base.examples_per_instruction = p.budget / p.basic.num_instructions;
      c.no_op_frac = value;
      return strings::gen_noop_dataset(c);
    }
    case PresetKind::powerlaw_sweep: {
      strings::PowerLawConfig c;
      c.alpha = value;
      c.num_instructions = p.basic.num_instructions;
      c.total_examples = p.budget;
      return strings::gen_powerlaw_dataset(c, p.basic);
    }
    case PresetKind::semantic_transfer:
      return strings::gen_constrained_dataset(p.semantic);
    case PresetKind::math_generalist: {
      expr::GeneralistConfig c;
      c.num_rules = as_count(value);
      c.instances_total = p.budget;
      c.test_rules = p.test_rules;
      c.test_instances = p.test_examples;
      c.shape = p.shape;
      c.expr = p.expr;
      return expr::gen_generalist_dataset(c);
    }
    case PresetKind::math_specialist: {
      const std::size_t diver = as_count(value);
      Rng rng = make_rng(p.expr.seed, 21);
      expr::RuleRegistry registry;
      expr::SpecialistMixtureConfig c;
      c.spec_rules = expr::gen_rule_set(p.spec_rules, p.shape, p.expr, rng, registry);
      c.diver_rules = expr::gen_rule_set(diver, p.shape, p.expr, rng, registry);
      c.diver_count = diver > 0 ? p.budget / 2 : 0;
      c.spec_count = p.budget - c.diver_count;
      c.test_count = p.test_examples;
      c.dp_train = p.dp_train;
      c.dp_test = p.dp_test;
      return expr::gen_specialist_dataset(c, p.expr);
    }
  }
  throw ValidationError("unknown preset kind");
}

std::vector<SweepResult> run_preset(const ExperimentPreset& preset, const std::filesystem::path& out,
                                    std::ostream* progress) {
  if (preset.sweep.empty()) throw ValidationError("preset has an empty sweep");
  nn::validate(preset.train);
  const PromptTemplate tpl = resolve_template(preset.tpl);
  std::filesystem::create_directories(out);
  std::vector<SweepResult> results;
  for (std::size_t i = 0; i < preset.sweep.size(); ++i) {
    const double value = preset.sweep[i];
    const auto dir = out / ("point-" + std::to_string(i));
    std::filesystem::create_directories(dir);
    const SplitDataset data = preset_dataset(preset, value);
    write_dataset(dir / "data", data);

    const nn::Vocab vocab = nn::build_vocab(data, tpl);
    nn::ModelConfig mc = preset.model;
    mc.vocab_size = vocab.size();
    mc.max_seq_len = nn::max_sequence_length(data, tpl);
    nn::Transformer<float> model(mc);
    model.init(preset.train.seed);
    if (progress) {
      *progress << preset.name << ": point " << i << " (value " << value << "), " << data.train.size()
                << " train / " << data.test.size() << " test examples\n";
    }
    SweepResult r;
    r.value = value;
    r.train_examples = data.train.size();
    r.test_examples = data.test.size();
    r.log = nn::train(model, vocab, data.train, data.test, preset.train, tpl,
                      [&](const nn::EpochLog& e, const nn::Transformer<float>&) {
                        if (progress) {
                          *progress << "  epoch " << e.epoch << " loss " << e.train_loss << " eval_em "
                                    << e.eval_exact_match << std::endl;
                        }
                      });
    nn::save_checkpoint(dir / "model.ckpt", model, vocab, tpl);
    nn::write_metrics_csv(dir / "metrics.csv", r.log);
    eval::EvalOptions options;
    options.train_rule_ids = rule_ids(data.train);
    r.metrics = eval::evaluate(eval::model_adapter(model, vocab), data.test, tpl, options);
    eval::write_report_csv(dir / "report.csv", r.metrics);
    if (progress) *progress << "  test exact match " << r.metrics.overall_exact_match << std::endl;
    results.push_back(std::move(r));
  }

  std::ofstream csv(out / "results.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + (out / "results.csv").string());
  csv << "value,train_examples,test_examples,bucket_key,count,exact_match\n" << std::setprecision(17);
  for (const auto& r : results) {
    const auto prefix = [&] {
      std::ostringstream s;
      s << std::setprecision(17) << r.value << ',' << r.train_examples << ',' << r.test_examples << ',';
      return s.str();
    }();
    csv << prefix << "overall," << r.metrics.count << ',' << r.metrics.overall_exact_match << '\n';
    for (const auto& [key, b] : r.metrics.buckets) csv << prefix << key << ',' << b.count << ',' << b.exact_match() << '\n';
  }
  return results;
}

}  // namespace rewritelab
