// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <iomanip>
#include <memory>
#include <sstream>

#include "commands.hpp"
#include "rewritelab/checkpoint.hpp"
#include "rewritelab/cli.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/eval_harness.hpp"
#include "rewritelab/presets.hpp"
#include "rewritelab/provenance.hpp"
#include "rewritelab/trainer.hpp"

namespace rewritelab::cli {

namespace {

namespace fs = std::filesystem;

void add_template_flags(CLI::App* cmd, PromptTemplate& tpl) {
  tpl.format.clear();
  cmd->add_option("--template", tpl.format, "Prompt template with {rule} and {input}, ending in the cue");
  cmd->add_option("--cue", tpl.cue, "Output cue that ends the prompt");
}

nlohmann::json template_json(const PromptTemplate& tpl) { return {{"format", tpl.format}, {"cue", tpl.cue}}; }

void print_metrics(std::ostream& out, const eval::Metrics& m) {
  out << "overall exact match " << std::setprecision(6) << m.overall_exact_match << " (" << m.correct << "/"
      << m.count << ")\n";
  for (const auto& [key, b] : m.buckets) {
    out << "  " << std::left << std::setw(28) << key << std::right << std::setw(8) << b.count << "  "
        << b.exact_match() << '\n';
  }
}

}  // namespace

void add_model_commands(CLI::App& app, Context& ctx) {
  {
    struct Flags {
      std::string data;
      std::string out;
      nn::ModelConfig model;
      nn::TrainConfig train;
      bool no_mask_prompt = false;
      int checkpoint_every = 0;
      PromptTemplate tpl;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("train", "Train a transformer on a dataset directory");
    cmd->add_option("--data", f->data, "Dataset directory")->required();
    cmd->add_option("--out", f->out, "Output directory")->required();
    cmd->add_option("--d-model", f->model.d_model, "Model width");
    cmd->add_option("--layers", f->model.n_layers, "Transformer blocks");
    cmd->add_option("--heads", f->model.n_heads, "Attention heads");
    cmd->add_option("--lr", f->train.learning_rate, "Peak learning rate");
    cmd->add_option("--weight-decay", f->train.adamw.weight_decay, "AdamW weight decay");
    cmd->add_option("--epochs", f->train.epochs, "Training epochs");
    cmd->add_option("--batch", f->train.batch_size, "Sequences per optimizer step");
    cmd->add_option("--eval-samples", f->train.eval_samples, "Test examples decoded after each epoch");
    cmd->add_option("--checkpoint-every", f->checkpoint_every, "Also save a checkpoint every N epochs (0: final only)");
    cmd->add_flag("--no-mask-prompt", f->no_mask_prompt, "Compute the loss over prompt positions too");
    cmd->add_option("--seed", f->train.seed, "Initialisation and data-order seed");
    add_template_flags(cmd, f->tpl);
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        if (f->checkpoint_every < 0) throw ValidationError("--checkpoint-every must be non-negative");
        f->train.mask_prompt = !f->no_mask_prompt;
        nn::validate(f->train);
        const PromptTemplate tpl = resolve_template(f->tpl);
        const SplitDataset data = read_dataset(f->data);
        const nn::Vocab vocab = nn::build_vocab(data, tpl);
        nn::ModelConfig mc = f->model;
        mc.vocab_size = vocab.size();
        mc.max_seq_len = nn::max_sequence_length(data, tpl);
        nn::validate(mc);
        const fs::path out = f->out;
        fs::create_directories(out);
        nn::Transformer<float> model(mc);
        model.init(f->train.seed);
        const auto log = nn::train(model, vocab, data.train, data.test, f->train, tpl,
                                   [&](const nn::EpochLog& e, const nn::Transformer<float>& m) {
                                     ctx.err << "epoch " << e.epoch << " step " << e.step << " lr " << e.lr
                                             << " loss " << e.train_loss << " eval_em " << e.eval_exact_match
                                             << std::endl;
                                     if (f->checkpoint_every > 0 && e.epoch % f->checkpoint_every == 0) {
                                       fs::create_directories(out / "checkpoints");
                                       nn::save_checkpoint(out / "checkpoints" / ("epoch-" + std::to_string(e.epoch) + ".ckpt"),
                                                           m, vocab, tpl);
                                     }
                                   });
        nn::save_checkpoint(out / "model.ckpt", model, vocab, tpl);
        nn::write_metrics_csv(out / "metrics.csv", log);
        nlohmann::json config;
        config["model"] = {{"vocab_size", mc.vocab_size}, {"d_model", mc.d_model}, {"n_layers", mc.n_layers},
                           {"n_heads", mc.n_heads}, {"max_seq_len", mc.max_seq_len}};
        config["train"] = nn::to_json(f->train);
        config["template"] = template_json(tpl);
        config["data_manifest_sha256"] = sha256_file(fs::path(f->data) / "manifest.json");
        config["checkpoint_every"] = f->checkpoint_every;
        write_run_record(out, ctx.argv, f->train.seed, config);
        ctx.out << "trained " << model.params().num_scalars() << " parameters for " << log.size()
                << " epochs; final train loss " << log.back().train_loss << '\n';
        return kExitOk;
      };
    });
  }

  {
    struct Flags {
      std::string data;
      std::string model;
      bool oracle = false;
      std::vector<std::string> external;
      std::string write_prompts;
      std::string report;
      std::string out;
      std::string split = "test";
      bool strict = false;
      bool json = false;
      std::uint64_t seed = 0;
      PromptTemplate tpl;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = app.add_subcommand("eval", "Exact-match evaluation of a model, the oracle or an external file pair");
    cmd->add_option("--data", f->data, "Dataset directory")->required();
    auto* m = cmd->add_option("--model", f->model, "Checkpoint to decode with");
    auto* o = cmd->add_flag("--oracle", f->oracle, "Score the ground-truth rewriter");
    auto* x = cmd->add_option("--external", f->external, "PROMPTS COMPLETIONS file pair")->expected(2);
    auto* w = cmd->add_option("--write-prompts", f->write_prompts, "Write the escaped prompts, one per line, and exit");
    m->excludes(o)->excludes(x)->excludes(w);
    o->excludes(x)->excludes(w);
    x->excludes(w);
    cmd->add_option("--split", f->split, "Split to score")->check(CLI::IsMember({"train", "test"}));
    cmd->add_option("--report", f->report, "CSV report path (bucket_key, count, exact_match)");
    cmd->add_option("--out", f->out, "Directory for report.csv, metrics.json and run.json");
    cmd->add_flag("--strict", f->strict, "Do not strip whitespace before comparing");
    cmd->add_flag("--json", f->json, "Print metrics as JSON");
    cmd->add_option("--seed", f->seed, "Accepted for uniformity; evaluation is deterministic");
    add_template_flags(cmd, f->tpl);
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        const SplitDataset data = read_dataset(f->data);
        const auto& examples = f->split == "test" ? data.test : data.train;
        PromptTemplate tpl = resolve_template(f->tpl);
        if (!f->write_prompts.empty()) {
          eval::write_prompts(f->write_prompts, examples, tpl);
          ctx.out << "wrote " << examples.size() << " prompts to " << f->write_prompts << '\n';
          return kExitOk;
        }
        eval::EvalOptions options;
        options.train_rule_ids = rule_ids(data.train);
        options.strict = f->strict;
        eval::Metrics metrics;
        std::string source;
        if (!f->model.empty()) {
          const nn::Checkpoint ckpt = nn::load_checkpoint(f->model);
          tpl = ckpt.tpl;
          metrics = eval::evaluate(eval::model_adapter(ckpt.model, ckpt.vocab), examples, tpl, options);
          source = "model " + f->model;
        } else if (f->oracle) {
          metrics = eval::evaluate(eval::oracle_adapter(tpl), examples, tpl, options);
          source = "oracle";
        } else if (f->external.size() == 2) {
          metrics = eval::run_external(f->external[0], f->external[1], examples, tpl, options);
          source = "external " + f->external[1];
        } else {
          throw ValidationError("give one of --model, --oracle, --external or --write-prompts");
        }
        for (const auto& w : metrics.warnings) ctx.err << "warning: " << w << '\n';
        if (!f->report.empty()) eval::write_report_csv(f->report, metrics);
        if (!f->out.empty()) {
          const fs::path out = f->out;
          fs::create_directories(out);
          eval::write_report_csv(out / "report.csv", metrics);
          std::ofstream(out / "metrics.json") << eval::to_json(metrics).dump(2) << '\n';
          nlohmann::json config{{"source", source},
                                {"split", f->split},
                                {"strict", f->strict},
                                {"template", template_json(tpl)},
                                {"data_manifest_sha256", sha256_file(fs::path(f->data) / "manifest.json")}};
          write_run_record(out, ctx.argv, f->seed, config);
        }
        if (f->json) {
          ctx.out << eval::to_json(metrics).dump(2) << '\n';
        } else {
          print_metrics(ctx.out, metrics);
        }
        return kExitOk;
      };
    });
  }

  {
    struct Flags {
      nn::ModelConfig model;
      std::size_t batch = 2;
      std::size_t length = 6;
      double step = 1e-4;
      double tolerance = 1e-4;
      std::string fault = "none";
      bool json = false;
      std::uint64_t seed = 0;
    };
    auto f = std::make_shared<Flags>();
    f->model.vocab_size = 7;
    f->model.d_model = 8;
    f->model.n_layers = 1;
    f->model.n_heads = 1;
    auto* cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    cmd->add_option("--vocab", f->model.vocab_size, "Vocabulary size");
    cmd->add_option("--d-model", f->model.d_model, "Model width");
    cmd->add_option("--layers", f->model.n_layers, "Transformer blocks");
    cmd->add_option("--heads", f->model.n_heads, "Attention heads");
    cmd->add_option("--batch", f->batch, "Random sequences");
    cmd->add_option("--length", f->length, "Tokens per sequence");
    cmd->add_option("--step", f->step, "Finite-difference step");
    cmd->add_option("--tolerance", f->tolerance, "Pass threshold on the relative error");
    cmd->add_option("--fault", f->fault, "Inject a backward-pass defect")
        ->check(CLI::IsMember({"none", "softmax_jacobian", "layernorm_mean"}));
    cmd->add_flag("--json", f->json, "Machine-readable output");
    cmd->add_option("--seed", f->seed, "Parameter and batch seed");
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        nn::ModelConfig mc = f->model;
        mc.max_seq_len = static_cast<int>(f->length);
        nn::Transformer<double> model(mc);
        model.init(f->seed);
        nn::perturb_parameters(model.params(), 0.1, f->seed);
        if (f->fault == "softmax_jacobian") model.set_fault(nn::GradientFault::softmax_jacobian);
        if (f->fault == "layernorm_mean") model.set_fault(nn::GradientFault::layernorm_mean);
        const auto batch = nn::make_random_batch(mc.vocab_size, f->batch, f->length, f->seed);
        const auto report = nn::grad_check(model, batch, f->step, f->tolerance);
        if (f->json) {
          nlohmann::ordered_json j;
          j["passed"] = report.passed;
          j["tolerance"] = report.tolerance;
          j["max_rel_error"] = report.max_rel_error;
          for (const auto& e : report.entries) j["tensors"][e.name] = e.max_rel_error;
          ctx.out << j.dump(2) << '\n';
        } else {
          for (const auto& e : report.entries) {
            ctx.out << std::left << std::setw(20) << e.name << std::right << std::scientific << std::setprecision(3)
                    << e.max_rel_error << (e.max_rel_error < report.tolerance ? "  ok" : "  FAIL") << '\n';
          }
          ctx.out << (report.passed ? "PASS" : "FAIL") << " max relative error " << report.max_rel_error
                  << " (tolerance " << report.tolerance << ")\n";
        }
        return report.passed ? kExitOk : kExitRuntime;
      };
    });
  }
}

void add_preset_commands(CLI::App& app, Context& ctx) {
  auto* preset = app.add_subcommand("preset", "Experiment presets");
  preset->require_subcommand(1);
  {
    auto* list = preset->add_subcommand("list", "List the preset catalog");
    list->callback([&ctx] {
      ctx.action = [&ctx] {
        for (const auto& p : preset_catalog()) {
          ctx.out << p.name << (p.desk_scale ? "" : " [full scale]") << "\n  " << p.description << '\n';
        }
        return kExitOk;
      };
    });
  }
  {
    struct Flags {
      std::string name;
      std::string out;
      std::optional<std::uint64_t> seed;
      std::optional<int> epochs;
      std::optional<std::size_t> budget;
      std::vector<double> sweep;
      bool quiet = false;
    };
    auto f = std::make_shared<Flags>();
    auto* run = preset->add_subcommand("run", "Generate, train and evaluate every point of a preset");
    run->add_option("name", f->name, "Preset name")->required();
    run->add_option("--out", f->out, "Output directory (default: runs/NAME)");
    run->add_option("--seed", f->seed, "Seed for data, initialisation and data order");
    run->add_option("--epochs", f->epochs, "Override the training epochs");
    run->add_option("--budget", f->budget, "Override the training example budget");
    run->add_option("--sweep", f->sweep, "Override the swept values")->delimiter(',');
    run->add_flag("--quiet", f->quiet, "No progress output");
    run->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        ExperimentPreset p = find_preset(f->name);
        if (f->seed) {
          p.basic.seed = p.semantic.seed = p.expr.seed = p.train.seed = *f->seed;
        }
        if (f->epochs) p.train.epochs = *f->epochs;
        if (f->budget) p.budget = *f->budget;
        if (!f->sweep.empty()) p.sweep = f->sweep;
        const fs::path out = f->out.empty() ? fs::path("runs") / p.name : fs::path(f->out);
        const auto results = run_preset(p, out, f->quiet ? nullptr : &ctx.err);
        write_run_record(out, ctx.argv, p.train.seed, to_json(p));
        ctx.out << "value,exact_match\n";
        for (const auto& r : results) ctx.out << r.value << ',' << r.metrics.overall_exact_match << '\n';
        ctx.out << "results in " << (out / "results.csv").string() << '\n';
        return kExitOk;
      };
    });
  }
}

void add_replay_command(CLI::App& app, Context& ctx) {
  struct Flags {
    std::string run;
    std::string out;
    std::uint64_t seed = 0;
  };
  auto f = std::make_shared<Flags>();
  auto* cmd = app.add_subcommand("replay", "Re-run a recorded command into a new directory and compare artifacts");
  cmd->add_option("--run", f->run, "run.json of the original run")->required();
  cmd->add_option("--out", f->out, "Fresh output directory")->required();
  cmd->add_option("--seed", f->seed, "Accepted for uniformity; the recorded seed is used");
  cmd->callback([&ctx, f] {
    ctx.action = [&ctx, f] {
      const RunRecord rec = read_run_record(f->run);
      std::vector<std::string> argv = rec.argv;
      if (!argv.empty() && argv.front() == "replay") throw ValidationError("cannot replay a replay");
      bool replaced = false;
      for (std::size_t i = 0; i < argv.size(); ++i) {
        if (argv[i] == "--out" && i + 1 < argv.size()) {
          argv[i + 1] = f->out;
          replaced = true;
        } else if (argv[i].starts_with("--out=")) {
          argv[i] = "--out=" + f->out;
          replaced = true;
        }
      }
      if (!replaced) throw ValidationError("recorded command has no --out directory");
      if (fs::exists(f->out) && !fs::is_empty(f->out)) throw ValidationError("replay directory must be empty");
      std::ostringstream sub_out;
      const int code = run_cli(argv, sub_out, ctx.err);
      if (code != kExitOk) return code;
      const auto now = hash_artifacts(f->out);
      std::size_t mismatches = 0;
      for (const auto& [name, hash] : rec.artifacts) {
        const auto it = now.find(name);
        if (it == now.end()) {
          ctx.out << "missing   " << name << '\n';
          ++mismatches;
        } else if (it->second != hash) {
          ctx.out << "differs   " << name << '\n';
          ++mismatches;
        }
      }
      for (const auto& [name, hash] : now) {
        if (!rec.artifacts.contains(name)) {
          ctx.out << "extra     " << name << '\n';
          ++mismatches;
        }
      }
      if (mismatches > 0) {
        ctx.out << mismatches << " artifact(s) differ\n";
        return kExitRuntime;
      }
      ctx.out << "identical: " << now.size() << " artifacts match " << f->run << '\n';
      return kExitOk;
    };
  });
}

}  // namespace rewritelab::cli
