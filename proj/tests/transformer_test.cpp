// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "rewritelab/checkpoint.hpp"
#include "rewritelab/errors.hpp"
#include "rewritelab/string_tasks.hpp"
#include "rewritelab/trainer.hpp"
#include "test_util.hpp"

namespace {

using namespace rewritelab;
using namespace rewritelab::nn;

ModelConfig micro_config(int vocab = 7) { return {vocab, 8, 2, 2, 10, 0.0}; }

template <typename Scalar>
Transformer<Scalar> micro_model(std::uint64_t seed = 1, int vocab = 7) {
  Transformer<Scalar> m(micro_config(vocab));
  m.init(seed);
  perturb_parameters(m.params(), 0.1, seed);
  return m;
}

SplitDataset tiny_dataset(std::uint64_t seed = 2) {
  strings::BasicTaskConfig cfg;
  cfg.num_instructions = 4;
  cfg.examples_per_instruction = 4;
  cfg.input_len = 6;
  cfg.pattern_len = 2;
  cfg.alphabet = "abc";
  cfg.test_instructions = 2;
  cfg.test_examples_per_instruction = 2;
  cfg.seed = seed;
  return strings::gen_basic_dataset(cfg);
}

TEST(Vocab, LayoutAndCoding) {
  const Vocab v({'c', 'a', 'b'});
  EXPECT_EQ(v.size(), 6);
  EXPECT_EQ(v.id('a'), 3);
  EXPECT_EQ(v.id('c'), 5);
  EXPECT_EQ(v.encode("cab"), (std::vector<int>{5, 3, 4}));
  const std::vector<int> ids{Vocab::kBos, 4, 3, Vocab::kEos, Vocab::kPad};
  EXPECT_EQ(v.decode(ids), "ba");
  EXPECT_THROW(v.id('z'), ValidationError);
  EXPECT_THROW(Vocab({'a', 'a'}), ValidationError);
  const std::vector<std::string> texts{"ba", "ab\n"};
  EXPECT_EQ(Vocab::from_texts(texts), Vocab({'a', 'b', '\n'}));
}

TEST(Vocab, CoversBothSplits) {
  const auto data = tiny_dataset();
  const auto v = build_vocab(data);
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& ex : *split) {
      for (char c : format_training_text(ex)) EXPECT_TRUE(v.covers(c));
    }
  }
}

TEST(Transformer, ConfigValidation) {
  EXPECT_THROW(Transformer<float>({7, 9, 1, 2, 10, 0.0}), ValidationError);
  EXPECT_THROW(Transformer<float>({0, 8, 1, 2, 10, 0.0}), ValidationError);
  EXPECT_THROW(Transformer<float>({7, 8, 1, 2, 10, 0.1}), ValidationError);
  const auto m = micro_model<float>();
  const std::vector<int> too_long(11, 3);
  EXPECT_THROW(m.forward(too_long), ValidationError);
  const std::vector<int> bad_id{1, 7};
  EXPECT_THROW(m.forward(bad_id), ValidationError);
}

TEST(Transformer, InitIsDeterministic) {
  Transformer<float> a(micro_config()), b(micro_config()), c(micro_config());
  a.init(5);
  b.init(5);
  c.init(6);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params().tensors[i], b.params().tensors[i]);
  EXPECT_NE(a.params().tensors[0], c.params().tensors[0]);
}

TEST(Transformer, Causality) {
  const auto m = micro_model<double>();
  std::vector<int> tokens{1, 3, 4, 5, 6, 3, 4, 2};
  const auto base = m.forward(tokens);
  for (std::size_t j = 1; j < tokens.size(); ++j) {
    auto changed = tokens;
    changed[j] = changed[j] == 3 ? 4 : 3;
    const auto out = m.forward(changed);
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(j); ++t) {
      EXPECT_EQ(out.row(t), base.row(t)) << "position " << t << " saw token " << j;
    }
    EXPECT_GT((out.row(static_cast<Eigen::Index>(j)) - base.row(static_cast<Eigen::Index>(j))).norm(), 0.0);
  }
}

TEST(Transformer, ConstantLogitsGiveLogV) {
  auto m = micro_model<double>();
  const Layout layout{m.config().n_layers};
  m.params().tensors[static_cast<std::size_t>(layout.head_w())].setZero();
  m.params().tensors[static_cast<std::size_t>(layout.head_b())].setConstant(0.3);
  const auto batch = make_random_batch(7, 3, 9, 4);
  auto grads = m.params().zeros_like();
  EXPECT_NEAR(loss_and_gradients(m, std::span<const Sequence>(batch), grads), std::log(7.0), 1e-12);
}

TEST(Transformer, LossMatchesForwardPass) {
  const auto m = micro_model<double>();
  const auto batch = make_random_batch(7, 4, 8, 9);
  std::vector<Matrix<double>> logits;
  for (const auto& s : batch) logits.push_back(m.forward(s.tokens));
  // Independent cross-entropy over the masked positions.
  double total = 0.0;
  int count = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 1; t < batch[b].tokens.size(); ++t) {
      if (!batch[b].loss_mask[t]) continue;
      const auto row = logits[b].row(static_cast<Eigen::Index>(t - 1));
      double z = 0.0;
      for (Eigen::Index k = 0; k < row.size(); ++k) z += std::exp(row(k));
      total += std::log(z) - row(batch[b].tokens[t]);
      ++count;
    }
  }
  auto grads = m.params().zeros_like();
  EXPECT_NEAR(loss_and_gradients(m, std::span<const Sequence>(batch), grads), total / count, 1e-12);
  EXPECT_NEAR(loss<double>(logits, batch), total / count, 1e-12);
}

TEST(Transformer, FreshModelGivesFiniteLogits) {
  Transformer<float> m(micro_config());
  m.init(11);
  const std::vector<int> tokens{1, 3, 4, 5, 6, 2};
  EXPECT_TRUE(m.forward(tokens).allFinite());
}

TEST(Transformer, MaskedOutPositionsGetNoGradient) {
  const auto m = micro_model<double>();
  // Only token 3 is predicted, from position 2; positions 3 and later feed no
  // loss term.
  Sequence s{{1, 3, 4, 5, 6, 3}, {0, 0, 0, 1, 0, 0}};
  auto grads = m.params().zeros_like();
  loss_and_gradients(m, std::span<const Sequence>(&s, 1), grads);
  const auto& wpe = grads.tensors[static_cast<std::size_t>(Layout::wpe())];
  EXPECT_GT(wpe.row(2).cwiseAbs().maxCoeff(), 0.0);
  for (Eigen::Index t = 3; t < wpe.rows(); ++t) EXPECT_EQ(wpe.row(t).cwiseAbs().maxCoeff(), 0.0);

  Sequence all = s;
  all.loss_mask = {0, 1, 1, 1, 1, 1};
  auto g2 = m.params().zeros_like();
  EXPECT_NE(loss_and_gradients(m, std::span<const Sequence>(&all, 1), g2),
            loss_and_gradients(m, std::span<const Sequence>(&s, 1), grads));
  Sequence none = s;
  none.loss_mask.assign(6, 0);
  EXPECT_THROW(loss_and_gradients(m, std::span<const Sequence>(&none, 1), grads), ValidationError);
}

TEST(Transformer, GradCheckPasses) {
  auto m = micro_model<double>();
  const auto batch = make_random_batch(7, 2, 6, 3);
  const auto report = grad_check(m, batch);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-4);
  EXPECT_EQ(report.entries.size(), m.params().size());
}

TEST(Transformer, GradCheckCatchesInjectedFaults) {
  for (auto fault : {GradientFault::softmax_jacobian, GradientFault::layernorm_mean}) {
    auto m = micro_model<double>();
    m.set_fault(fault);
    const auto batch = make_random_batch(7, 2, 6, 3);
    EXPECT_FALSE(grad_check(m, batch).passed);
  }
}

TEST(Transformer, BatchedGradientsEqualSumOfSingles) {
  const auto m = micro_model<double>();
  const auto batch = make_random_batch(7, 3, 7, 8);
  auto together = m.params().zeros_like();
  m.accumulate_gradients(batch, 1.0, together);
  auto separate = m.params().zeros_like();
  for (const auto& s : batch) m.accumulate_gradients(std::span<const Sequence>(&s, 1), 1.0, separate);
  for (std::size_t i = 0; i < together.size(); ++i) {
    EXPECT_LT((together.tensors[i] - separate.tensors[i]).cwiseAbs().maxCoeff(), 1e-12) << together.names[i];
  }
}

TEST(Transformer, CachedDecodingMatchesFullForward) {
  const auto m = micro_model<float>();
  const std::vector<int> tokens{1, 4, 6, 3, 5, 5, 6, 4, 3, 2};
  const auto full = m.forward(tokens);
  Transformer<float>::Decoder dec(m);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto row = dec.push(tokens[t]);
    EXPECT_LT((row - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Generation, TiesGoToLowestIdAndEosStops) {
  auto m = micro_model<float>();
  const Layout layout{m.config().n_layers};
  m.params().tensors[static_cast<std::size_t>(layout.head_w())].setZero();
  auto& bias = m.params().tensors[static_cast<std::size_t>(layout.head_b())];
  bias.setZero();
  bias(0, 4) = 1.0f;
  bias(0, 5) = 1.0f;
  const std::vector<int> prompt{1, 3};
  EXPECT_EQ(generate_greedy(m, prompt, 3, Vocab::kEos), (std::vector<int>{4, 4, 4}));
  bias(0, Vocab::kEos) = 2.0f;
  EXPECT_TRUE(generate_greedy(m, prompt, 3, Vocab::kEos).empty());
  EXPECT_THROW(generate_greedy(m, prompt, 9, Vocab::kEos), ValidationError);
}

TEST(Checkpoint, RoundTrip) {
  const auto m = micro_model<float>(3, 6);
  const Vocab vocab({'x', 'y', 'z'});
  const PromptTemplate tpl{"[{rule}]({input})=", "="};
  testutil::TempDir dir;
  save_checkpoint(dir / "m.ckpt", m, vocab, tpl);
  const auto ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.vocab, vocab);
  EXPECT_EQ(ck.tpl.format, tpl.format);
  EXPECT_EQ(ck.tpl.cue, tpl.cue);
  EXPECT_EQ(ck.model.config().d_model, 8);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(ck.model.params().names[i], m.params().names[i]);
    EXPECT_EQ(ck.model.params().tensors[i], m.params().tensors[i]);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt.partial"));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto m = micro_model<float>(3, 6);
  testutil::TempDir dir;
  save_checkpoint(dir / "m.ckpt", m, Vocab({'x', 'y', 'z'}), {});
  auto bytes = testutil::slurp(dir / "m.ckpt");
  testutil::spit(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), ProtocolError);
  bytes[0] = 'X';
  testutil::spit(dir / "magic.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), ProtocolError);
  EXPECT_ANY_THROW(load_checkpoint(dir / "missing.ckpt"));
}

TEST(Trainer, EncodeMasksPrompt) {
  Example ex;
  ex.instruction = "a->b";
  ex.input = "a";
  ex.target = "b";
  const auto vocab = Vocab::from_texts(std::vector<std::string>{format_training_text(ex)});
  const auto seq = encode_example(ex, vocab, {});
  const auto prompt_len = format_prompt(ex).size() + 1;
  ASSERT_EQ(seq.tokens.size(), prompt_len + 2);
  EXPECT_EQ(seq.tokens.front(), Vocab::kBos);
  EXPECT_EQ(seq.tokens.back(), Vocab::kEos);
  for (std::size_t t = 0; t < seq.tokens.size(); ++t) EXPECT_EQ(seq.loss_mask[t], t >= prompt_len ? 1 : 0);
  const auto full = encode_example(ex, vocab, {}, false);
  EXPECT_EQ(full.loss_mask[0], 0);
  EXPECT_EQ(full.loss_mask[1], 1);
}

TEST(Trainer, AdamWDecaysOnlyFlaggedTensors) {
  auto m = micro_model<double>();
  const auto before = m.params();
  AdamW<double> opt(m.params(), {0.9, 0.999, 1e-8, 0.5});
  const auto zero = m.params().zeros_like();
  opt.step(m.params(), zero, 0.1);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double factor = before.decay[i] ? 0.95 : 1.0;
    EXPECT_LT((m.params().tensors[i] - factor * before.tensors[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  auto m = micro_model<double>();
  const auto before = m.params();
  AdamW<double> opt(m.params(), {});
  auto grads = m.params().zeros_like();
  const auto batch = make_random_batch(7, 2, 6, 1);
  loss_and_gradients(m, std::span<const Sequence>(batch), grads);
  opt.step(m.params(), grads, 0.0);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(m.params().tensors[i], before.tensors[i]);
}

TEST(Trainer, LinearDecayAndBitIdenticalRetrain) {
  const auto data = tiny_dataset();
  const auto vocab = build_vocab(data);
  const ModelConfig mc{vocab.size(), 16, 1, 2, max_sequence_length(data, {}), 0.0};
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 9;
  tc.eval_samples = 2;
  auto run = [&] {
    Transformer<float> m(mc);
    m.init(tc.seed);
    auto log = train(m, vocab, data.train, data.test, tc);
    return std::make_pair(m.params(), log);
  };
  const auto [p1, log1] = run();
  const auto [p2, log2] = run();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1.tensors[i], p2.tensors[i]);
  ASSERT_EQ(log1.size(), 3u);
  EXPECT_EQ(log1.back().step, 12);
  EXPECT_NEAR(log1.back().lr, tc.learning_rate / 12.0, 1e-12);
  for (std::size_t e = 0; e < log1.size(); ++e) EXPECT_EQ(log1[e].train_loss, log2[e].train_loss);
  EXPECT_FALSE(std::isnan(log1.back().eval_exact_match));
}

TEST(Trainer, LossDecreasesAndDivergenceIsReported) {
  const auto data = tiny_dataset();
  const auto vocab = build_vocab(data);
  const ModelConfig mc{vocab.size(), 16, 1, 2, max_sequence_length(data, {}), 0.0};
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 4;
  tc.learning_rate = 3e-3;
  tc.eval_samples = 0;
  Transformer<float> m(mc);
  m.init(1);
  const auto log = train(m, vocab, data.train, {}, tc);
  EXPECT_LT(log.back().train_loss, 0.7 * log.front().train_loss);
  EXPECT_TRUE(std::isnan(log.back().eval_exact_match));

  tc.learning_rate = 1e30;
  tc.epochs = 2;
  EXPECT_THROW(train(m, vocab, data.train, {}, tc), DivergenceError);
}

TEST(Trainer, MetricsCsv) {
  testutil::TempDir dir;
  write_metrics_csv(dir / "m.csv", {{1, 4, 0.001, 2.5, 0.25}});
  EXPECT_EQ(testutil::slurp(dir / "m.csv"), "epoch,step,lr,train_loss,eval_exact_match\n1,4,0.001,2.5,0.25\n");
}

}  // namespace
