// SPDX-License-Identifier: Apache-2.0
#include <map>
#include <memory>

#include "commands.hpp"
#include "rewritelab/cli.hpp"
#include "rewritelab/dataset_io.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/expr_rewrite.hpp"
#include "rewritelab/markov.hpp"
#include "rewritelab/provenance.hpp"
#include "rewritelab/rng.hpp"
#include "rewritelab/string_tasks.hpp"
#include "rewritelab/text.hpp"

namespace rewritelab::cli {

namespace {

struct BasicFlags {
  std::string out;
  strings::BasicTaskConfig cfg;
};

void add_basic_flags(CLI::App* cmd, BasicFlags& f) {
  cmd->add_option("--out", f.out, "Output directory")->required();
  cmd->add_option("--instructions", f.cfg.num_instructions, "Number of training instructions I");
  cmd->add_option("--per-instruction", f.cfg.examples_per_instruction, "Examples per training instruction S");
  cmd->add_option("--input-len", f.cfg.input_len, "Input string length");
  cmd->add_option("--pattern-len", f.cfg.pattern_len, "Rule source length");
  cmd->add_option("--dst-len-min", f.cfg.dst_len_range.min, "Minimum rule target length (0: same as pattern)");
  cmd->add_option("--dst-len-max", f.cfg.dst_len_range.max, "Maximum rule target length (0: same as pattern)");
  cmd->add_option("--alphabet", f.cfg.alphabet, "Alphabet letters");
  cmd->add_option("--test-instructions", f.cfg.test_instructions, "Number of unseen test instructions");
  cmd->add_option("--test-per-instruction", f.cfg.test_examples_per_instruction, "Examples per test instruction");
  cmd->add_option("--seed", f.cfg.seed, "Random seed");
}

int finish(Context& ctx, const std::string& out, const SplitDataset& data, std::uint64_t seed) {
  write_dataset(out, data);
  write_run_record(out, ctx.argv, seed, data.config);
  ctx.out << "wrote " << data.train.size() << " train and " << data.test.size() << " test examples to " << out
          << '\n';
  return kExitOk;
}

/// FAMILY:K:COUNT, e.g. periodic:3:50.
strings::FamilyCount parse_family_count(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw ValidationError("family spec '" + text + "' must look like FAMILY:K:COUNT");
  strings::FamilyCount fc;
  fc.family.kind = strings::parse_family_kind(text.substr(0, a));
  try {
    fc.family.k = std::stoi(text.substr(a + 1, b - a - 1));
    fc.count = std::stoul(text.substr(b + 1));
  } catch (const std::logic_error&) {
    throw ValidationError("family spec '" + text + "' has a non-numeric K or COUNT");
  }
  return fc;
}

}  // namespace

void add_gen_commands(CLI::App& app, Context& ctx) {
  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  gen->require_subcommand(1);

  {
    auto f = std::make_shared<BasicFlags>();
    auto* cmd = gen->add_subcommand("basic", "Basic replacement: every input contains the rule source");
    add_basic_flags(cmd, *f);
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] { return finish(ctx, f->out, strings::gen_basic_dataset(f->cfg), f->cfg.seed); };
    });
  }
  {
    auto f = std::make_shared<BasicFlags>();
    auto frac = std::make_shared<double>(0.1);
    auto* cmd = gen->add_subcommand("noop", "Conditional replacement with a fraction of No-Op examples");
    add_basic_flags(cmd, *f);
    cmd->add_option("--noop-frac", *frac, "Fraction of examples whose input lacks the rule source");
    cmd->callback([&ctx, f, frac] {
      ctx.action = [&ctx, f, frac] {
        strings::NoOpConfig c;
        c.base = f->cfg;
        c.no_op_frac = *frac;
        return finish(ctx, f->out, strings::gen_noop_dataset(c), c.base.seed);
      };
    });
  }
  {
    auto f = std::make_shared<BasicFlags>();
    auto pl = std::make_shared<strings::PowerLawConfig>();
    auto* cmd = gen->add_subcommand("powerlaw", "Replacement with power-law example counts per instruction");
    add_basic_flags(cmd, *f);
    cmd->add_option("--alpha", pl->alpha, "Shape parameter of the density alpha*x^(alpha-1)");
    cmd->add_option("--total", pl->total_examples, "Total number of training examples");
    cmd->callback([&ctx, f, pl] {
      ctx.action = [&ctx, f, pl] {
        pl->num_instructions = f->cfg.num_instructions;
        return finish(ctx, f->out, strings::gen_powerlaw_dataset(*pl, f->cfg), f->cfg.seed);
      };
    });
  }
  {
    struct Flags {
      std::string out;
      strings::SemanticTaskConfig cfg;
      std::vector<std::string> train;
      std::vector<std::string> test;
      bool unconstrained_dst = false;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = gen->add_subcommand("semantic", "Rules drawn from constrained pattern families");
    cmd->add_option("--out", f->out, "Output directory")->required();
    cmd->add_option("--input-len", f->cfg.input_len, "Input string length");
    cmd->add_option("--pattern-len", f->cfg.pattern_len, "Pattern length (divisible by every k)");
    cmd->add_option("--alphabet", f->cfg.alphabet, "Alphabet letters");
    cmd->add_option("--per-instruction", f->cfg.examples_per_instruction, "Examples per training instruction");
    cmd->add_option("--test-per-instruction", f->cfg.test_examples_per_instruction, "Examples per test instruction");
    cmd->add_option("--train", f->train, "Training family FAMILY:K:COUNT (repeatable)")->required();
    cmd->add_option("--test", f->test, "Test family FAMILY:K:COUNT (repeatable)")->required();
    cmd->add_flag("--unconstrained-dst", f->unconstrained_dst, "Draw rule targets without the family constraint");
    cmd->add_option("--seed", f->cfg.seed, "Random seed");
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        for (const auto& s : f->train) f->cfg.train.push_back(parse_family_count(s));
        for (const auto& s : f->test) f->cfg.test.push_back(parse_family_count(s));
        f->cfg.constrain_dst = !f->unconstrained_dst;
        return finish(ctx, f->out, strings::gen_constrained_dataset(f->cfg), f->cfg.seed);
      };
    });
  }
  {
    struct Flags {
      std::string out;
      std::string mode = "generalist";
      expr::GeneralistConfig gen;
      std::size_t spec_rules = 5;
      std::size_t diver_rules = 20;
      std::size_t spec_count = 10000;
      std::size_t diver_count = 10000;
      int dp_train = 1;
      int dp_test = 2;
    };
    auto f = std::make_shared<Flags>();
    auto* cmd = gen->add_subcommand("math", "Abstract algebraic rewrite rules applied to random expressions");
    cmd->add_option("--out", f->out, "Output directory")->required();
    cmd->add_option("--mode", f->mode, "generalist or specialist")->check(CLI::IsMember({"generalist", "specialist"}));
    cmd->add_option("--rules", f->gen.num_rules, "Generalist: number of training rules");
    cmd->add_option("--instances", f->gen.instances_total, "Generalist: training instances in total");
    cmd->add_option("--test-rules", f->gen.test_rules, "Generalist: number of unseen test rules");
    cmd->add_option("--test-instances", f->gen.test_instances, "Test instances in total");
    cmd->add_option("--spec-rules", f->spec_rules, "Specialist: size of R_spec");
    cmd->add_option("--diver-rules", f->diver_rules, "Specialist: size of R_diver");
    cmd->add_option("--spec-count", f->spec_count, "Specialist: training instances from R_spec");
    cmd->add_option("--diver-count", f->diver_count, "Specialist: training instances from R_diver");
    cmd->add_option("--dp-train", f->dp_train, "Specialist: grounding depth in training");
    cmd->add_option("--dp-test", f->dp_test, "Specialist: grounding depth in testing");
    cmd->add_option("--depth", f->gen.expr.depth, "Host expression depth");
    cmd->add_option("--pattern-depth", f->gen.expr.pattern_depth, "Generalist: grounding depth d_p");
    cmd->add_option("--num-vars", f->gen.shape.num_vars, "Rule variables per rule (1-4)");
    cmd->add_option("--lhs-depth", f->gen.shape.lhs_depth, "Rule lhs depth");
    cmd->add_option("--rhs-depth", f->gen.shape.rhs_depth, "Rule rhs depth");
    cmd->add_option("--seed", f->gen.expr.seed, "Random seed");
    cmd->callback([&ctx, f] {
      ctx.action = [&ctx, f] {
        if (f->mode == "generalist") return finish(ctx, f->out, expr::gen_generalist_dataset(f->gen), f->gen.expr.seed);
        Rng rng = make_rng(f->gen.expr.seed, 21);
        expr::RuleRegistry registry;
        expr::SpecialistMixtureConfig c;
        c.spec_rules = expr::gen_rule_set(f->spec_rules, f->gen.shape, f->gen.expr, rng, registry);
        c.diver_rules = expr::gen_rule_set(f->diver_rules, f->gen.shape, f->gen.expr, rng, registry);
        c.spec_count = f->spec_count;
        c.diver_count = f->diver_count;
        c.test_count = f->gen.test_instances;
        c.dp_train = f->dp_train;
        c.dp_test = f->dp_test;
        return finish(ctx, f->out, expr::gen_specialist_dataset(c, f->gen.expr), f->gen.expr.seed);
      };
    });
  }
}

void add_markov_commands(CLI::App& app, Context& ctx) {
  auto* markov_cmd = app.add_subcommand("markov", "Markov algorithm interpreter");
  markov_cmd->require_subcommand(1);
  struct Flags {
    std::string program;
    std::string builtin;
    std::string input;
    std::size_t max_steps = markov::kDefaultMaxSteps;
    bool trace = false;
    std::uint64_t seed = 0;
  };
  auto f = std::make_shared<Flags>();
  auto* run = markov_cmd->add_subcommand("run", "Run a rule program on one input");
  auto* program_opt = run->add_option("--program", f->program, "Rule program file");
  run->add_option("--builtin", f->builtin, "Built-in program")
      ->check(CLI::IsMember({"reverse"}))
      ->excludes(program_opt);
  run->add_option("--input", f->input, "Input word over the program alphabet")->required();
  run->add_option("--max-steps", f->max_steps, "Step limit");
  run->add_flag("--trace", f->trace, "Print every rewrite step");
  run->add_option("--seed", f->seed, "Accepted for uniformity; the interpreter is deterministic");
  run->callback([&ctx, f] {
    ctx.action = [&ctx, f] {
      if (f->program.empty() && f->builtin.empty()) throw ValidationError("give --program FILE or --builtin NAME");
      const markov::Program program = f->program.empty() ? markov::reversal_program() : markov::load_program(f->program);
      const auto& alphabet = program.algorithm.base_alphabet;
      const auto input = utf8_decode(f->input);
      for (char32_t c : input) {
        if (std::find(alphabet.begin(), alphabet.end(), c) == alphabet.end()) {
          throw ValidationError("input symbol '" + utf8_encode(c) + "' is not in the program alphabet");
        }
      }
      const auto result = markov::run(input, program.algorithm, f->max_steps);
      if (f->trace) {
        ctx.err << "  " << utf8_encode(input) << '\n';
        for (const auto& t : result.trace) {
          ctx.err << "  rule " << t.rule_index + 1 << " at " << t.position << ": " << utf8_encode(t.after) << '\n';
        }
      }
      if (result.status == markov::Status::step_limit) {
        ctx.err << "error: no stop rule fired within " << f->max_steps << " steps\n";
        return kExitRuntime;
      }
      ctx.out << utf8_encode(result.final) << '\n';
      if (f->trace) ctx.err << "status: " << markov::to_string(result.status) << ", " << result.trace.size() << " steps\n";
      return kExitOk;
    };
  });
}

void add_stats_command(CLI::App& app, Context& ctx) {
  struct Flags {
    std::string data;
    bool json = false;
    std::uint64_t seed = 0;
  };
  auto f = std::make_shared<Flags>();
  auto* cmd = app.add_subcommand("stats", "Summarise a dataset directory");
  cmd->add_option("--data", f->data, "Dataset directory")->required();
  cmd->add_flag("--json", f->json, "Machine-readable output");
  cmd->add_option("--seed", f->seed, "Accepted for uniformity; unused");
  cmd->callback([&ctx, f] {
    ctx.action = [&ctx, f] {
      const SplitDataset data = read_dataset(f->data);
      nlohmann::ordered_json j;
      j["generator"] = data.config.value("generator", "");
      for (const auto& [name, split] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
        std::map<std::int64_t, std::size_t> per_rule;
        std::map<std::string, std::size_t> families;
        std::size_t noop = 0;
        std::size_t input_chars = 0;
        for (const auto& ex : *split) {
          ++per_rule[ex.meta.rule_id];
          noop += ex.meta.is_noop ? 1 : 0;
          input_chars += ex.input.size();
          if (ex.meta.family) ++families[*ex.meta.family + ":" + std::to_string(ex.meta.k.value_or(0))];
        }
        std::size_t lo = split->empty() ? 0 : SIZE_MAX;
        std::size_t hi = 0;
        for (const auto& [id, n] : per_rule) {
          lo = std::min(lo, n);
          hi = std::max(hi, n);
        }
        nlohmann::ordered_json s;
        s["examples"] = split->size();
        s["rules"] = per_rule.size();
        s["noop"] = noop;
        s["min_per_rule"] = lo;
        s["max_per_rule"] = hi;
        s["mean_input_len"] = split->empty() ? 0.0 : static_cast<double>(input_chars) / static_cast<double>(split->size());
        if (!families.empty()) s["families"] = families;
        j[name] = s;
      }
      const auto train_ids = rule_ids(data.train);
      std::size_t shared = 0;
      for (auto id : rule_ids(data.test)) shared += train_ids.contains(id) ? 1 : 0;
      j["test_rules_seen_in_train"] = shared;
      if (f->json) {
        ctx.out << j.dump(2) << '\n';
        return kExitOk;
      }
      ctx.out << "generator: " << j["generator"].get<std::string>() << '\n';
      for (const char* name : {"train", "test"}) {
        const auto& s = j[name];
        ctx.out << name << ": " << s["examples"] << " examples, " << s["rules"] << " rules (" << s["min_per_rule"]
                << " to " << s["max_per_rule"] << " per rule), " << s["noop"] << " No-Op, mean input length "
                << s["mean_input_len"] << '\n';
        if (s.contains("families")) {
          for (const auto& [fam, n] : s["families"].items()) ctx.out << "  family " << fam << ": " << n << '\n';
        }
      }
      ctx.out << "test rules seen in train: " << shared << '\n';
      return kExitOk;
    };
  });
}

}  // namespace rewritelab::cli
