// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "rewritelab/cli.hpp"
#include "rewritelab/dataset_io.hpp"
#include "rewritelab/eval_harness.hpp"
#include "rewritelab/provenance.hpp"
#include "rewritelab/string_tasks.hpp"
#include "test_util.hpp"

namespace {

using namespace rewritelab;
namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> gen_basic_args(const fs::path& out) {
  return {"gen", "basic", "--instructions", "10", "--per-instruction", "5", "--input-len", "12", "--pattern-len", "3",
          "--test-instructions", "3", "--test-per-instruction", "2", "--seed", "7", "--out", out.string()};
}

TEST(Cli, MarkovReversal) {
  const auto r = cli({"markov", "run", "--program", std::string(REWRITELAB_SOURCE_DIR) + "/programs/reverse.mkv",
                      "--input", "abb"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "abbbba");

  const auto traced = cli({"markov", "run", "--builtin", "reverse", "--input", "ab", "--trace"});
  EXPECT_EQ(traced.code, kExitOk);
  EXPECT_NE(traced.err.find("rule 10 at 0"), std::string::npos);
}

TEST(Cli, MarkovErrors) {
  EXPECT_EQ(cli({"markov", "run", "--builtin", "reverse", "--input", "abc"}).code, kExitValidation);
  EXPECT_EQ(cli({"markov", "run", "--builtin", "reverse", "--input", "abb", "--max-steps", "3"}).code, kExitRuntime);
  EXPECT_EQ(cli({"markov", "run", "--program", "/nonexistent.mkv", "--input", "a"}).code, kExitRuntime);
}

TEST(Cli, UsageAndVersion) {
  const auto bad = cli({"gen", "basic", "--no-such-flag"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("Usage"), std::string::npos) << bad.err;
  EXPECT_EQ(cli({}).code, kExitValidation);
  const auto v = cli({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_FALSE(v.out.empty());
}

TEST(Cli, GenIsDeterministic) {
  testutil::TempDir dir;
  ASSERT_EQ(cli(gen_basic_args(dir / "a")).code, kExitOk);
  ASSERT_EQ(cli(gen_basic_args(dir / "b")).code, kExitOk);
  const auto a = hash_artifacts(dir / "a");
  EXPECT_EQ(a, hash_artifacts(dir / "b"));
  EXPECT_EQ(a.size(), 3u);
  const auto rec = read_run_record(dir / "a" / "run.json");
  EXPECT_EQ(rec.seed, 7u);
  EXPECT_EQ(rec.artifacts, a);
  EXPECT_EQ(rec.config_sha256, sha256_hex(rec.config.dump()));
}

TEST(Cli, GenMatchesModuleCall) {
  testutil::TempDir dir;
  ASSERT_EQ(cli(gen_basic_args(dir / "a")).code, kExitOk);
  strings::BasicTaskConfig cfg;
  cfg.num_instructions = 10;
  cfg.examples_per_instruction = 5;
  cfg.input_len = 12;
  cfg.pattern_len = 3;
  cfg.test_instructions = 3;
  cfg.test_examples_per_instruction = 2;
  cfg.seed = 7;
  const auto direct = strings::gen_basic_dataset(cfg);
  const auto via_cli = read_dataset(dir / "a");
  EXPECT_EQ(via_cli.train, direct.train);
  EXPECT_EQ(via_cli.test, direct.test);
}

TEST(Cli, GenValidationErrors) {
  testutil::TempDir dir;
  EXPECT_EQ(cli({"gen", "basic", "--pattern-len", "30", "--input-len", "10", "--out", (dir / "x").string()}).code,
            kExitValidation);
  EXPECT_EQ(cli({"gen", "noop", "--noop-frac", "1.5", "--out", (dir / "y").string()}).code, kExitValidation);
  EXPECT_EQ(cli({"gen", "semantic", "--train", "spiral:2:3", "--test", "periodic:2:1", "--out", (dir / "z").string()})
                .code,
            kExitValidation);
}

TEST(Cli, OtherGenerators) {
  testutil::TempDir dir;
  EXPECT_EQ(cli({"gen", "noop", "--instructions", "4", "--per-instruction", "10", "--input-len", "10", "--pattern-len",
                 "3", "--test-instructions", "2", "--noop-frac", "0.3", "--out", (dir / "n").string()})
                .code,
            kExitOk);
  EXPECT_EQ(cli({"gen", "powerlaw", "--instructions", "6", "--total", "50", "--alpha", "0.5", "--input-len", "10",
                 "--pattern-len", "3", "--test-instructions", "2", "--out", (dir / "p").string()})
                .code,
            kExitOk);
  EXPECT_EQ(read_dataset(dir / "p").train.size(), 50u);
  EXPECT_EQ(cli({"gen", "semantic", "--input-len", "20", "--pattern-len", "6", "--train", "periodic:3:4", "--train",
                 "mirrored:2:4", "--test", "repeated_chars:2:2", "--out", (dir / "s").string()})
                .code,
            kExitOk);
  EXPECT_EQ(cli({"gen", "math", "--mode", "generalist", "--rules", "4", "--instances", "8", "--test-rules", "2",
                 "--test-instances", "4", "--depth", "2", "--out", (dir / "g").string()})
                .code,
            kExitOk);
  EXPECT_EQ(cli({"gen", "math", "--mode", "specialist", "--spec-rules", "2", "--diver-rules", "2", "--spec-count", "6",
                 "--diver-count", "4", "--test-instances", "4", "--depth", "2", "--out", (dir / "m").string()})
                .code,
            kExitOk);
  const auto stats = cli({"stats", "--data", (dir / "n").string(), "--json"});
  ASSERT_EQ(stats.code, kExitOk) << stats.err;
  const auto j = nlohmann::json::parse(stats.out);
  EXPECT_EQ(j.dump().find("train") != std::string::npos, true);
}

TEST(Cli, EvalOracleAndExternal) {
  testutil::TempDir dir;
  ASSERT_EQ(cli(gen_basic_args(dir / "d")).code, kExitOk);
  const auto oracle = cli({"eval", "--data", (dir / "d").string(), "--oracle", "--json"});
  ASSERT_EQ(oracle.code, kExitOk) << oracle.err;
  EXPECT_EQ(nlohmann::json::parse(oracle.out)["overall_exact_match"], 1.0);

  const auto prompts = dir / "prompts.txt";
  ASSERT_EQ(cli({"eval", "--data", (dir / "d").string(), "--write-prompts", prompts.string()}).code, kExitOk);
  const auto test = read_dataset(dir / "d").test;
  std::vector<std::string> completions;
  for (const auto& ex : test) completions.push_back(ex.target);
  completions[0] = "nope";
  eval::write_lines(dir / "completions.txt", completions);
  const auto ext = cli({"eval", "--data", (dir / "d").string(), "--external", prompts.string(),
                        (dir / "completions.txt").string(), "--out", (dir / "report").string()});
  ASSERT_EQ(ext.code, kExitOk) << ext.err;
  EXPECT_TRUE(fs::exists(dir / "report" / "report.csv"));
  EXPECT_TRUE(fs::exists(dir / "report" / "run.json"));
  const auto metrics = nlohmann::json::parse(testutil::slurp(dir / "report" / "metrics.json"));
  EXPECT_EQ(metrics["correct"], test.size() - 1);

  eval::write_lines(dir / "short.txt", {"x"});
  EXPECT_EQ(cli({"eval", "--data", (dir / "d").string(), "--external", prompts.string(), (dir / "short.txt").string()})
                .code,
            kExitRuntime);
  EXPECT_EQ(cli({"eval", "--data", (dir / "d").string()}).code, kExitValidation);
}

TEST(Cli, Gradcheck) {
  const auto ok = cli({"gradcheck", "--json"});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_TRUE(nlohmann::json::parse(ok.out)["passed"].get<bool>());
  EXPECT_EQ(cli({"gradcheck", "--fault", "softmax_jacobian"}).code, kExitRuntime);
}

TEST(Cli, TrainEvalReplay) {
  testutil::TempDir dir;
  ASSERT_EQ(cli(gen_basic_args(dir / "d")).code, kExitOk);
  const std::vector<std::string> train_args{"train",    "--data",  (dir / "d").string(), "--out", (dir / "m").string(),
                                            "--d-model", "16",     "--layers",           "1",     "--heads",
                                            "2",        "--epochs", "2",                  "--batch", "8",
                                            "--eval-samples", "2", "--checkpoint-every", "1",     "--seed",
                                            "3"};
  const auto t = cli(train_args);
  ASSERT_EQ(t.code, kExitOk) << t.err;
  for (const char* f : {"model.ckpt", "metrics.csv", "run.json", "checkpoints/epoch-1.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / "m" / f)) << f;
  }
  const auto e = cli({"eval", "--data", (dir / "d").string(), "--model", (dir / "m" / "model.ckpt").string(), "--json"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_EQ(nlohmann::json::parse(e.out)["count"], 6);

  const auto r = cli({"replay", "--run", (dir / "m" / "run.json").string(), "--out", (dir / "again").string()});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("identical"), std::string::npos);
  EXPECT_EQ(cli({"replay", "--run", (dir / "m" / "run.json").string(), "--out", (dir / "m").string()}).code,
            kExitValidation);
}

TEST(Cli, PresetSmoke) {
  const auto list = cli({"preset", "list"});
  ASSERT_EQ(list.code, kExitOk);
  EXPECT_NE(list.out.find("phase-transition-mini"), std::string::npos);
  EXPECT_EQ(cli({"preset", "run", "no-such-preset"}).code, kExitValidation);

  testutil::TempDir dir;
  const auto r = cli({"preset", "run", "phase-transition-mini", "--out", (dir / "pt").string(), "--budget", "20",
                      "--sweep", "2,4", "--epochs", "1", "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = testutil::slurp(dir / "pt" / "results.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "value,train_examples,test_examples,bucket_key,count,exact_match");
  EXPECT_NE(csv.find("\n2,20,1000,overall,1000,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\n4,20,1000,overall,1000,"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(dir / "pt" / "point-1" / "model.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "pt" / "run.json"));
}

}  // namespace
