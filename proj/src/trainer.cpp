// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "rewritelab/errors.hpp"
#include "rewritelab/eval_harness.hpp"
#include "rewritelab/rng.hpp"

namespace rewritelab::nn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5EED0000;

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (cfg.epochs < 1) throw ValidationError("epochs must be at least 1");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be at least 1");
  const auto& a = cfg.adamw;
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
    throw ValidationError("AdamW betas must lie in [0, 1)");
  }
  if (!(a.eps > 0.0)) throw ValidationError("AdamW eps must be positive");
  if (!(a.weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"beta1", cfg.adamw.beta1},
          {"beta2", cfg.adamw.beta2},
          {"eps", cfg.adamw.eps},
          {"weight_decay", cfg.adamw.weight_decay},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"mask_prompt", cfg.mask_prompt},
          {"eval_samples", cfg.eval_samples}};
}

std::vector<int> encode_prompt(std::string_view prompt, const Vocab& vocab) {
  std::vector<int> ids{Vocab::kBos};
  const auto body = vocab.encode(prompt);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

Sequence encode_example(const Example& ex, const Vocab& vocab, const PromptTemplate& tpl, bool mask_prompt) {
  Sequence seq;
  seq.tokens = encode_prompt(format_prompt(ex, tpl), vocab);
  const std::size_t prompt_len = seq.tokens.size();
  const auto target = vocab.encode(ex.target);
  seq.tokens.insert(seq.tokens.end(), target.begin(), target.end());
  seq.tokens.push_back(Vocab::kEos);
  seq.loss_mask.assign(seq.tokens.size(), 1);
  seq.loss_mask[0] = 0;
  if (mask_prompt) std::fill(seq.loss_mask.begin(), seq.loss_mask.begin() + static_cast<long>(prompt_len), 0);
  return seq;
}

int max_sequence_length(const SplitDataset& data, const PromptTemplate& tpl) {
  std::size_t longest = 0;
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& ex : *split) longest = std::max(longest, format_training_text(ex, tpl).size() + 2);
  }
  return static_cast<int>(longest);
}

std::string complete(const Transformer<float>& model, const Vocab& vocab, std::string_view prompt) {
  const auto ids = encode_prompt(prompt, vocab);
  const int room = model.config().max_seq_len - static_cast<int>(ids.size());
  if (room < 0) throw ValidationError("prompt is longer than the model context");
  if (room == 0) return {};
  return vocab.decode(generate_greedy(model, ids, room, Vocab::kEos));
}

std::vector<Sequence> make_random_batch(int vocab_size, std::size_t batch, std::size_t length, std::uint64_t seed) {
  if (vocab_size < 2 || length < 2 || batch < 1) throw ValidationError("random batch needs vocab >= 2, length >= 2");
  Rng rng = make_rng(seed, 0xBA7C);
  std::vector<Sequence> out(batch);
  for (auto& s : out) {
    for (std::size_t t = 0; t < length; ++t) s.tokens.push_back(1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(vocab_size - 1))));
    const std::size_t split = 1 + uniform_index(rng, length - 1);
    s.loss_mask.assign(length, 0);
    std::fill(s.loss_mask.begin() + static_cast<long>(split), s.loss_mask.end(), 1);
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,step,lr,train_loss,eval_exact_match\n" << std::setprecision(9);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.train_loss << ',';
    if (std::isnan(e.eval_exact_match)) {
      out << "nan";
    } else {
      out << e.eval_exact_match;
    }
    out << '\n';
  }
}

std::vector<EpochLog> train(Transformer<float>& model, const Vocab& vocab, const std::vector<Example>& train_set,
                            const std::vector<Example>& eval_set, const TrainConfig& cfg, const PromptTemplate& tpl,
                            const EpochCallback& on_epoch) {
  validate(cfg);
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (model.config().vocab_size != vocab.size()) throw ValidationError("model and vocabulary sizes differ");
  const PromptTemplate t = resolve_template(tpl);

  std::vector<Sequence> data;
  data.reserve(train_set.size());
  for (const auto& ex : train_set) data.push_back(encode_example(ex, vocab, t, cfg.mask_prompt));

  const std::size_t n = data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;
  const double total_steps = static_cast<double>(batches_per_epoch) * cfg.epochs;

  std::vector<Example> eval_subset(eval_set.begin(),
                                   eval_set.begin() + static_cast<long>(std::min(cfg.eval_samples, eval_set.size())));

  AdamW<float> opt(model.params(), cfg.adamw);
  auto grads = model.params().zeros_like();
  std::vector<std::size_t> order(n);
  std::vector<Sequence> chunk;
  std::vector<EpochLog> log;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(cfg.seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t loss_tokens = 0;
    double lr = cfg.learning_rate;
    for (std::size_t start = 0; start < n; start += batch) {
      chunk.clear();
      for (std::size_t i = start; i < std::min(n, start + batch); ++i) chunk.push_back(data[order[i]]);
      const std::size_t tokens = masked_count(chunk);
      const float loss = loss_and_gradients(model, std::span<const Sequence>(chunk), grads);
      if (!std::isfinite(loss)) {
        throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + " (learning rate " + std::to_string(lr) + ")");
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(tokens);
      loss_tokens += tokens;
      lr = cfg.learning_rate * (1.0 - static_cast<double>(step) / total_steps);
      opt.step(model.params(), grads, lr);
      ++step;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.step = step;
    entry.lr = lr;
    entry.train_loss = loss_sum / static_cast<double>(loss_tokens);
    if (eval_subset.empty()) {
      entry.eval_exact_match = std::numeric_limits<double>::quiet_NaN();
    } else {
      entry.eval_exact_match =
          eval::evaluate(eval::model_adapter(model, vocab), eval_subset, t).overall_exact_match;
    }
    log.push_back(entry);
    if (on_epoch) on_epoch(entry, model);
  }
  return log;
}

}  // namespace rewritelab::nn
