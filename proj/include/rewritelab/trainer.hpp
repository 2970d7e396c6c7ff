// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/transformer.hpp"
#include "rewritelab/vocab.hpp"

namespace rewritelab::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay Adam. Decay touches only tensors flagged in
/// ParameterSet::decay.
template <typename Scalar>
class AdamW {
 public:
  AdamW(const ParameterSet<Scalar>& params, AdamWConfig cfg)
      : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto step_size = static_cast<Scalar>(lr / bc1);
    const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const auto eps = static_cast<Scalar>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params.tensors[i].array();
      const auto g = grads.tensors[i].array();
      auto m = m_.tensors[i].array();
      auto v = v_.tensors[i].array();
      if (params.decay[i]) p *= static_cast<Scalar>(1.0 - lr * cfg_.weight_decay);
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      p -= step_size * m / ((v * inv_bc2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  ParameterSet<Scalar> m_;
  ParameterSet<Scalar> v_;
  long t_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  AdamWConfig adamw;
  int epochs = 50;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Restrict the loss to the target and end marker.
  bool mask_prompt = true;
  /// Examples greedily decoded after each epoch for eval_exact_match; 0 skips.
  std::size_t eval_samples = 256;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

/// [BOS] prompt target [EOS]; the loss mask covers target and EOS, or every
/// position after BOS when `mask_prompt` is false.
Sequence encode_example(const Example& ex, const Vocab& vocab, const PromptTemplate& tpl, bool mask_prompt = true);
/// [BOS] prompt, the decoding context.
std::vector<int> encode_prompt(std::string_view prompt, const Vocab& vocab);

/// Longest encoded training sequence across both splits.
int max_sequence_length(const SplitDataset& data, const PromptTemplate& tpl);

/// Greedy completion of a rendered prompt, limited by the context window.
std::string complete(const Transformer<float>& model, const Vocab& vocab, std::string_view prompt);

struct EpochLog {
  int epoch = 0;
  long step = 0;
  /// Learning rate at the last optimizer step of the epoch.
  double lr = 0.0;
  double train_loss = 0.0;
  /// NaN when no eval examples were scored.
  double eval_exact_match = 0.0;
};

/// Random token sequences with a random prompt/target split, for gradient
/// checks. Token ids avoid PAD.
std::vector<Sequence> make_random_batch(int vocab_size, std::size_t batch, std::size_t length, std::uint64_t seed);

/// Adds normal(0, stddev) noise to every parameter so that gains and biases
/// are not at their special initial values.
template <typename Scalar>
void perturb_parameters(ParameterSet<Scalar>& params, double stddev, std::uint64_t seed) {
  Rng rng{derive_seed(seed, 0x9E27)};
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& t : params.tensors) {
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] += static_cast<Scalar>(normal(rng));
  }
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

using EpochCallback = std::function<void(const EpochLog&, const Transformer<float>&)>;

/// Trains in place. Data order per epoch is a seeded permutation; the
/// learning rate decays linearly from learning_rate to 0 over all steps.
/// Throws DivergenceError on a non-finite loss.
std::vector<EpochLog> train(Transformer<float>& model, const Vocab& vocab, const std::vector<Example>& train_set,
                            const std::vector<Example>& eval_set, const TrainConfig& cfg,
                            const PromptTemplate& tpl = {}, const EpochCallback& on_epoch = {});

}  // namespace rewritelab::nn
