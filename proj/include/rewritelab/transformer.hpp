// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rewritelab/errors.hpp"
#include "rewritelab/rng.hpp"

namespace rewritelab::nn {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 256;
  int n_layers = 6;
  int n_heads = 4;
  int max_seq_len = 0;
  /// Only 0 is supported; kept so configs round-trip.
  double dropout = 0.0;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.vocab_size < 1) throw ValidationError("vocab_size must be positive");
  if (cfg.d_model < 1 || cfg.n_layers < 1 || cfg.n_heads < 1) throw ValidationError("model dimensions must be positive");
  if (cfg.d_model % cfg.n_heads != 0) throw ValidationError("d_model must be divisible by n_heads");
  if (cfg.max_seq_len < 1) throw ValidationError("max_seq_len must be positive");
  if (cfg.dropout != 0.0) throw ValidationError("dropout is not supported");
}

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Parameter slots of one transformer block, in storage order.
enum class BlockSlot : int {
  ln1_gain,
  ln1_bias,
  attn_w,
  attn_b,
  attn_proj_w,
  attn_proj_b,
  ln2_gain,
  ln2_bias,
  fc_w,
  fc_b,
  fc_proj_w,
  fc_proj_b,
};

/// Index of every tensor in a ParameterSet built for `n_layers` blocks.
struct Layout {
  static constexpr int kBlockSlots = 12;
  int n_layers = 0;

  static constexpr int wte() { return 0; }
  static constexpr int wpe() { return 1; }
  int block(int layer, BlockSlot slot) const { return 2 + layer * kBlockSlots + static_cast<int>(slot); }
  int lnf_gain() const { return 2 + n_layers * kBlockSlots; }
  int lnf_bias() const { return lnf_gain() + 1; }
  int head_w() const { return lnf_gain() + 2; }
  int head_b() const { return lnf_gain() + 3; }
  int count() const { return lnf_gain() + 4; }
};

/// Named parameter tensors. Vectors are stored as 1 x n matrices.
template <typename Scalar>
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix<Scalar>> tensors;
  /// Whether AdamW weight decay applies (matrices and embeddings only).
  std::vector<bool> decay;

  std::size_t size() const { return tensors.size(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
    return n;
  }

  void set_zero() {
    for (auto& t : tensors) t.setZero();
  }

  ParameterSet zeros_like() const {
    ParameterSet out = *this;
    out.set_zero();
    return out;
  }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    out.names = names;
    out.decay = decay;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<Other>());
    return out;
  }
};

template <typename Scalar>
ParameterSet<Scalar> make_parameters(const ModelConfig& cfg) {
  validate(cfg);
  const Layout layout{cfg.n_layers};
  const int d = cfg.d_model;
  ParameterSet<Scalar> p;
  p.names.resize(static_cast<std::size_t>(layout.count()));
  p.tensors.resize(p.names.size());
  p.decay.resize(p.names.size());
  auto add = [&](int index, std::string name, int rows, int cols, bool decay) {
    const auto i = static_cast<std::size_t>(index);
    p.names[i] = std::move(name);
    p.tensors[i] = Matrix<Scalar>::Zero(rows, cols);
    p.decay[i] = decay;
  };
  add(Layout::wte(), "wte", cfg.vocab_size, d, true);
  add(Layout::wpe(), "wpe", cfg.max_seq_len, d, true);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "h" + std::to_string(l) + ".";
    add(layout.block(l, BlockSlot::ln1_gain), pre + "ln_1.gain", 1, d, false);
    add(layout.block(l, BlockSlot::ln1_bias), pre + "ln_1.bias", 1, d, false);
    add(layout.block(l, BlockSlot::attn_w), pre + "attn.c_attn.w", d, 3 * d, true);
    add(layout.block(l, BlockSlot::attn_b), pre + "attn.c_attn.b", 1, 3 * d, false);
    add(layout.block(l, BlockSlot::attn_proj_w), pre + "attn.c_proj.w", d, d, true);
    add(layout.block(l, BlockSlot::attn_proj_b), pre + "attn.c_proj.b", 1, d, false);
    add(layout.block(l, BlockSlot::ln2_gain), pre + "ln_2.gain", 1, d, false);
    add(layout.block(l, BlockSlot::ln2_bias), pre + "ln_2.bias", 1, d, false);
    add(layout.block(l, BlockSlot::fc_w), pre + "mlp.c_fc.w", d, 4 * d, true);
    add(layout.block(l, BlockSlot::fc_b), pre + "mlp.c_fc.b", 1, 4 * d, false);
    add(layout.block(l, BlockSlot::fc_proj_w), pre + "mlp.c_proj.w", 4 * d, d, true);
    add(layout.block(l, BlockSlot::fc_proj_b), pre + "mlp.c_proj.b", 1, d, false);
  }
  add(layout.lnf_gain(), "ln_f.gain", 1, d, false);
  add(layout.lnf_bias(), "ln_f.bias", 1, d, false);
  add(layout.head_w(), "lm_head.w", d, cfg.vocab_size, true);
  add(layout.head_b(), "lm_head.b", 1, cfg.vocab_size, false);
  return p;
}

/// Deliberate backward-pass defects, used to show that the gradient checker
/// catches broken formulas.
enum class GradientFault { none, softmax_jacobian, layernorm_mean };

namespace detail {

constexpr double kLayerNormEps = 1e-5;

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

/// tanh-approximated GELU; keeps the tanh term for the backward pass.
template <typename Scalar>
void gelu_forward(const Matrix<Scalar>& x, Matrix<Scalar>& t, Matrix<Scalar>& y) {
  const Scalar c = static_cast<Scalar>(kGeluC);
  const Scalar a = static_cast<Scalar>(kGeluA);
  const auto xa = x.array();
  t = (c * (xa + a * xa.cube())).tanh().matrix();
  y = (Scalar(0.5) * xa * (Scalar(1) + t.array())).matrix();
}

template <typename Scalar>
void gelu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& t, const Matrix<Scalar>& dy, Matrix<Scalar>& dx) {
  const Scalar c = static_cast<Scalar>(kGeluC);
  const Scalar a = static_cast<Scalar>(kGeluA);
  const auto xa = x.array();
  const auto ta = t.array();
  dx = (dy.array() * (Scalar(0.5) * (Scalar(1) + ta) +
                      Scalar(0.5) * xa * (Scalar(1) - ta.square()) * c * (Scalar(1) + Scalar(3) * a * xa.square())))
           .matrix();
}

/// y = gain * (x - mean) / sqrt(var + eps) + bias, row-wise.
template <typename Scalar>
void layernorm_forward(const Matrix<Scalar>& x, const Matrix<Scalar>& gain, const Matrix<Scalar>& bias,
                       Matrix<Scalar>& xhat, ColVector<Scalar>& rstd, Matrix<Scalar>& y) {
  const auto n = x.cols();
  xhat.resize(x.rows(), n);
  rstd.resize(x.rows());
  y.resize(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    const Scalar s = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    rstd(r) = s;
    xhat.row(r) = (x.row(r).array() - mean) * s;
    y.row(r) = xhat.row(r).array() * gain.row(0).array() + bias.row(0).array();
  }
}

template <typename Scalar>
void layernorm_backward(const Matrix<Scalar>& dy, const Matrix<Scalar>& xhat, const ColVector<Scalar>& rstd,
                        const Matrix<Scalar>& gain, Matrix<Scalar>& dgain, Matrix<Scalar>& dbias, Matrix<Scalar>& dx,
                        GradientFault fault) {
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const auto n = static_cast<Scalar>(dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const RowVector<Scalar> dxhat = (dy.row(r).array() * gain.row(0).array()).matrix();
    const Scalar mean_d = fault == GradientFault::layernorm_mean ? Scalar(0) : dxhat.sum() / n;
    const Scalar mean_dx = dxhat.dot(xhat.row(r)) / n;
    dx.row(r) += (rstd(r) * (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx)).matrix();
  }
}

}  // namespace detail

/// One training sequence: token ids and the positions that count toward the
/// loss (token t is predicted from position t - 1).
struct Sequence {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
};

/// GPT-2 style decoder-only transformer: learned token and position
/// embeddings, pre-norm blocks with causal multi-head attention and a GELU
/// MLP, final layer norm and an untied output projection with bias.
template <typename Scalar>
class Transformer {
 public:
  explicit Transformer(ModelConfig cfg) : cfg_(cfg), layout_{cfg.n_layers}, params_(make_parameters<Scalar>(cfg)) {
    reset_layernorm_gains();
  }

  Transformer(ModelConfig cfg, ParameterSet<Scalar> params)
      : cfg_(cfg), layout_{cfg.n_layers}, params_(std::move(params)) {
    const auto expected = make_parameters<Scalar>(cfg);
    if (params_.size() != expected.size()) throw ValidationError("parameter count does not match config");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_.tensors[i].rows() != expected.tensors[i].rows() ||
          params_.tensors[i].cols() != expected.tensors[i].cols()) {
        throw ValidationError("parameter '" + expected.names[i] + "' has the wrong shape");
      }
    }
    params_.names = expected.names;
    params_.decay = expected.decay;
  }

  /// normal(0, 0.02) for matrices and embeddings, zero biases, unit gains.
  void init(std::uint64_t seed) {
    Rng rng{derive_seed(seed, 0x1417)};
    std::normal_distribution<double> normal(0.0, 0.02);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& t = params_.tensors[i];
      if (params_.decay[i]) {
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(normal(rng));
      } else {
        t.setZero();
      }
    }
    reset_layernorm_gains();
  }

  const ModelConfig& config() const { return cfg_; }
  const Layout& layout() const { return layout_; }
  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }

  void set_fault(GradientFault fault) { fault_ = fault; }

  /// Logits (T x vocab) for one token sequence.
  Matrix<Scalar> forward(std::span<const int> tokens) const {
    check_tokens(tokens);
    Cache cache;
    const std::vector<Eigen::Index> offsets{0, static_cast<Eigen::Index>(tokens.size())};
    run_forward(tokens, offsets, cache);
    return std::move(cache.logits);
  }

  /// Adds `scale` times the gradient of the summed next-token cross entropy
  /// of every sequence in `batch` to `grads` and returns the unscaled sum.
  /// The sequences are stacked so the dense layers run as one product each.
  Scalar accumulate_gradients(std::span<const Sequence> batch, Scalar scale, ParameterSet<Scalar>& grads) const {
    std::vector<int> tokens;
    std::vector<std::uint8_t> mask;
    std::vector<Eigen::Index> offsets{0};
    for (const auto& seq : batch) {
      check_tokens(seq.tokens);
      if (seq.loss_mask.size() != seq.tokens.size()) throw ValidationError("loss mask length differs from token count");
      tokens.insert(tokens.end(), seq.tokens.begin(), seq.tokens.end());
      mask.insert(mask.end(), seq.loss_mask.begin(), seq.loss_mask.end());
      offsets.push_back(static_cast<Eigen::Index>(tokens.size()));
    }
    Cache cache;
    run_forward(tokens, offsets, cache);
    const auto N = static_cast<Eigen::Index>(tokens.size());
    Matrix<Scalar> dlogits = Matrix<Scalar>::Zero(N, cfg_.vocab_size);
    Scalar total = 0;
    for (std::size_t b = 0; b + 1 < offsets.size(); ++b) {
      for (Eigen::Index t = offsets[b]; t + 1 < offsets[b + 1]; ++t) {
        if (!mask[static_cast<std::size_t>(t + 1)]) continue;
        const auto row = cache.logits.row(t);
        const Scalar mx = row.maxCoeff();
        const RowVector<Scalar> e = (row.array() - mx).exp().matrix();
        const Scalar z = e.sum();
        const int target = tokens[static_cast<std::size_t>(t + 1)];
        total += std::log(z) + mx - row(target);
        dlogits.row(t) = e / z * scale;
        dlogits(t, target) -= scale;
      }
    }
    run_backward(tokens, offsets, cache, dlogits, grads);
    return total;
  }

  /// Incremental decoding with cached keys and values.
  class Decoder {
   public:
    explicit Decoder(const Transformer& model) : model_(&model) {
      const auto& c = model.cfg_;
      keys_.assign(static_cast<std::size_t>(c.n_layers), Matrix<Scalar>::Zero(c.max_seq_len, c.d_model));
      values_ = keys_;
    }

    int position() const { return pos_; }

    /// Feeds one token and returns the logits for the next position.
    RowVector<Scalar> push(int token) {
      const auto& m = *model_;
      const auto& c = m.cfg_;
      if (pos_ >= c.max_seq_len) throw ValidationError("sequence exceeds max_seq_len");
      m.check_token(token);
      const auto& P = m.params_.tensors;
      const auto& L = m.layout_;
      const int d = c.d_model;
      const int hd = d / c.n_heads;
      const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
      Matrix<Scalar> x = P[Layout::wte()].row(token) + P[Layout::wpe()].row(pos_);
      Matrix<Scalar> xhat, h;
      ColVector<Scalar> rstd;
      for (int l = 0; l < c.n_layers; ++l) {
        auto W = [&](BlockSlot s) -> const Matrix<Scalar>& { return P[static_cast<std::size_t>(L.block(l, s))]; };
        detail::layernorm_forward(x, W(BlockSlot::ln1_gain), W(BlockSlot::ln1_bias), xhat, rstd, h);
        Matrix<Scalar> qkv = h * W(BlockSlot::attn_w) + W(BlockSlot::attn_b);
        auto& K = keys_[static_cast<std::size_t>(l)];
        auto& V = values_[static_cast<std::size_t>(l)];
        K.row(pos_) = qkv.block(0, d, 1, d);
        V.row(pos_) = qkv.block(0, 2 * d, 1, d);
        Matrix<Scalar> o(1, d);
        const int n = pos_ + 1;
        for (int head = 0; head < c.n_heads; ++head) {
          RowVector<Scalar> s = (qkv.block(0, head * hd, 1, hd) * K.block(0, head * hd, n, hd).transpose()) * scale;
          s = (s.array() - s.maxCoeff()).exp().matrix();
          s /= s.sum();
          o.block(0, head * hd, 1, hd) = s * V.block(0, head * hd, n, hd);
        }
        x += o * W(BlockSlot::attn_proj_w) + W(BlockSlot::attn_proj_b);
        detail::layernorm_forward(x, W(BlockSlot::ln2_gain), W(BlockSlot::ln2_bias), xhat, rstd, h);
        Matrix<Scalar> f = h * W(BlockSlot::fc_w) + W(BlockSlot::fc_b);
        Matrix<Scalar> ft, fa;
        detail::gelu_forward(f, ft, fa);
        x += fa * W(BlockSlot::fc_proj_w) + W(BlockSlot::fc_proj_b);
      }
      const auto lg = static_cast<std::size_t>(L.lnf_gain());
      detail::layernorm_forward(x, P[lg], P[lg + 1], xhat, rstd, h);
      ++pos_;
      return h * P[static_cast<std::size_t>(L.head_w())] + P[static_cast<std::size_t>(L.head_b())];
    }

   private:
    const Transformer* model_;
    std::vector<Matrix<Scalar>> keys_;
    std::vector<Matrix<Scalar>> values_;
    int pos_ = 0;
  };

 private:
  struct LayerCache {
    Matrix<Scalar> ln1_xhat;
    ColVector<Scalar> ln1_rstd;
    Matrix<Scalar> h1;
    Matrix<Scalar> qkv;
    std::vector<Matrix<Scalar>> probs;
    Matrix<Scalar> attn;
    Matrix<Scalar> ln2_xhat;
    ColVector<Scalar> ln2_rstd;
    Matrix<Scalar> h2;
    Matrix<Scalar> fc_pre;
    Matrix<Scalar> fc_tanh;
    Matrix<Scalar> fc_act;
  };

  struct Cache {
    std::vector<LayerCache> layers;
    Matrix<Scalar> lnf_xhat;
    ColVector<Scalar> lnf_rstd;
    Matrix<Scalar> hf;
    Matrix<Scalar> logits;
  };

  void reset_layernorm_gains() {
    for (int l = 0; l < cfg_.n_layers; ++l) {
      tensor(layout_.block(l, BlockSlot::ln1_gain)).setOnes();
      tensor(layout_.block(l, BlockSlot::ln2_gain)).setOnes();
    }
    tensor(layout_.lnf_gain()).setOnes();
  }

  Matrix<Scalar>& tensor(int i) { return params_.tensors[static_cast<std::size_t>(i)]; }
  const Matrix<Scalar>& tensor(int i) const { return params_.tensors[static_cast<std::size_t>(i)]; }

  void check_token(int token) const {
    if (token < 0 || token >= cfg_.vocab_size) throw ValidationError("token id out of range");
  }

  void check_tokens(std::span<const int> tokens) const {
    if (tokens.empty()) throw ValidationError("empty token sequence");
    if (tokens.size() > static_cast<std::size_t>(cfg_.max_seq_len)) {
      throw ValidationError("sequence of length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                            std::to_string(cfg_.max_seq_len));
    }
    for (int t : tokens) check_token(t);
  }

  /// Sequence b occupies rows [offsets[b], offsets[b + 1]) of the stacked
  /// activations; attention never crosses a sequence boundary.
  void run_forward(std::span<const int> tokens, const std::vector<Eigen::Index>& offsets, Cache& cache) const {
    const auto N = static_cast<Eigen::Index>(tokens.size());
    const std::size_t B = offsets.size() - 1;
    const int d = cfg_.d_model;
    const int H = cfg_.n_heads;
    const int hd = d / H;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));

    Matrix<Scalar> x(N, d);
    const auto& wte = tensor(Layout::wte());
    const auto& wpe = tensor(Layout::wpe());
    for (std::size_t b = 0; b < B; ++b) {
      for (Eigen::Index t = offsets[b]; t < offsets[b + 1]; ++t) {
        x.row(t) = wte.row(tokens[static_cast<std::size_t>(t)]) + wpe.row(t - offsets[b]);
      }
    }

    cache.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
      auto W = [&](BlockSlot s) -> const Matrix<Scalar>& { return tensor(layout_.block(l, s)); };
      LayerCache& c = cache.layers[static_cast<std::size_t>(l)];
      detail::layernorm_forward(x, W(BlockSlot::ln1_gain), W(BlockSlot::ln1_bias), c.ln1_xhat, c.ln1_rstd, c.h1);
      c.qkv.noalias() = c.h1 * W(BlockSlot::attn_w);
      c.qkv.rowwise() += W(BlockSlot::attn_b).row(0);
      c.probs.resize(B * static_cast<std::size_t>(H));
      c.attn.resize(N, d);
      for (std::size_t b = 0; b < B; ++b) {
        const Eigen::Index off = offsets[b];
        const Eigen::Index T = offsets[b + 1] - off;
        for (int head = 0; head < H; ++head) {
          auto q = c.qkv.block(off, head * hd, T, hd);
          auto k = c.qkv.block(off, d + head * hd, T, hd);
          auto v = c.qkv.block(off, 2 * d + head * hd, T, hd);
          Matrix<Scalar>& p = c.probs[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(head)];
          p.noalias() = (q * k.transpose()) * scale;
          for (Eigen::Index i = 0; i < T; ++i) {
            auto row = p.row(i);
            const Scalar mx = row.head(i + 1).maxCoeff();
            row.head(i + 1) = (row.head(i + 1).array() - mx).exp().matrix();
            row.head(i + 1) /= row.head(i + 1).sum();
            row.tail(T - i - 1).setZero();
          }
          c.attn.block(off, head * hd, T, hd).noalias() = p * v;
        }
      }
      x.noalias() += c.attn * W(BlockSlot::attn_proj_w);
      x.rowwise() += W(BlockSlot::attn_proj_b).row(0);
      detail::layernorm_forward(x, W(BlockSlot::ln2_gain), W(BlockSlot::ln2_bias), c.ln2_xhat, c.ln2_rstd, c.h2);
      c.fc_pre.noalias() = c.h2 * W(BlockSlot::fc_w);
      c.fc_pre.rowwise() += W(BlockSlot::fc_b).row(0);
      detail::gelu_forward(c.fc_pre, c.fc_tanh, c.fc_act);
      x.noalias() += c.fc_act * W(BlockSlot::fc_proj_w);
      x.rowwise() += W(BlockSlot::fc_proj_b).row(0);
    }
    detail::layernorm_forward(x, tensor(layout_.lnf_gain()), tensor(layout_.lnf_bias()), cache.lnf_xhat,
                              cache.lnf_rstd, cache.hf);
    cache.logits.noalias() = cache.hf * tensor(layout_.head_w());
    cache.logits.rowwise() += tensor(layout_.head_b()).row(0);
  }

  void run_backward(std::span<const int> tokens, const std::vector<Eigen::Index>& offsets, const Cache& cache,
                    const Matrix<Scalar>& dlogits, ParameterSet<Scalar>& grads) const {
    const auto N = static_cast<Eigen::Index>(tokens.size());
    const std::size_t B = offsets.size() - 1;
    const int d = cfg_.d_model;
    const int H = cfg_.n_heads;
    const int hd = d / H;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(hd));
    auto G = [&](int i) -> Matrix<Scalar>& { return grads.tensors[static_cast<std::size_t>(i)]; };

    G(layout_.head_w()).noalias() += cache.hf.transpose() * dlogits;
    G(layout_.head_b()).row(0) += dlogits.colwise().sum();
    Matrix<Scalar> dh = dlogits * tensor(layout_.head_w()).transpose();
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(N, d);
    detail::layernorm_backward(dh, cache.lnf_xhat, cache.lnf_rstd, tensor(layout_.lnf_gain()), G(layout_.lnf_gain()),
                               G(layout_.lnf_bias()), dx, fault_);

    Matrix<Scalar> dact, dpre, dattn, dqkv(N, 3 * d), dp, ds;
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
      auto W = [&](BlockSlot s) -> const Matrix<Scalar>& { return tensor(layout_.block(l, s)); };
      auto dW = [&](BlockSlot s) -> Matrix<Scalar>& { return G(layout_.block(l, s)); };
      const LayerCache& c = cache.layers[static_cast<std::size_t>(l)];

      // MLP branch.
      dW(BlockSlot::fc_proj_w).noalias() += c.fc_act.transpose() * dx;
      dW(BlockSlot::fc_proj_b).row(0) += dx.colwise().sum();
      dact.noalias() = dx * W(BlockSlot::fc_proj_w).transpose();
      detail::gelu_backward(c.fc_pre, c.fc_tanh, dact, dpre);
      dW(BlockSlot::fc_w).noalias() += c.h2.transpose() * dpre;
      dW(BlockSlot::fc_b).row(0) += dpre.colwise().sum();
      dh.noalias() = dpre * W(BlockSlot::fc_w).transpose();
      detail::layernorm_backward(dh, c.ln2_xhat, c.ln2_rstd, W(BlockSlot::ln2_gain), dW(BlockSlot::ln2_gain),
                                 dW(BlockSlot::ln2_bias), dx, fault_);

      // Attention branch.
      dW(BlockSlot::attn_proj_w).noalias() += c.attn.transpose() * dx;
      dW(BlockSlot::attn_proj_b).row(0) += dx.colwise().sum();
      dattn.noalias() = dx * W(BlockSlot::attn_proj_w).transpose();
      for (std::size_t b = 0; b < B; ++b) {
        const Eigen::Index off = offsets[b];
        const Eigen::Index T = offsets[b + 1] - off;
        for (int head = 0; head < H; ++head) {
          const Matrix<Scalar>& p = c.probs[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(head)];
          auto q = c.qkv.block(off, head * hd, T, hd);
          auto k = c.qkv.block(off, d + head * hd, T, hd);
          auto v = c.qkv.block(off, 2 * d + head * hd, T, hd);
          auto dout = dattn.block(off, head * hd, T, hd);
          dp.noalias() = dout * v.transpose();
          dqkv.block(off, 2 * d + head * hd, T, hd).noalias() = p.transpose() * dout;
          if (fault_ == GradientFault::softmax_jacobian) {
            ds = p.cwiseProduct(dp);
          } else {
            const ColVector<Scalar> inner = p.cwiseProduct(dp).rowwise().sum();
            ds = p.cwiseProduct(dp.colwise() - inner);
          }
          dqkv.block(off, head * hd, T, hd).noalias() = (ds * k) * scale;
          dqkv.block(off, d + head * hd, T, hd).noalias() = (ds.transpose() * q) * scale;
        }
      }
      dW(BlockSlot::attn_w).noalias() += c.h1.transpose() * dqkv;
      dW(BlockSlot::attn_b).row(0) += dqkv.colwise().sum();
      dh.noalias() = dqkv * W(BlockSlot::attn_w).transpose();
      detail::layernorm_backward(dh, c.ln1_xhat, c.ln1_rstd, W(BlockSlot::ln1_gain), dW(BlockSlot::ln1_gain),
                                 dW(BlockSlot::ln1_bias), dx, fault_);
    }

    auto& dwte = G(Layout::wte());
    auto& dwpe = G(Layout::wpe());
    for (std::size_t b = 0; b < B; ++b) {
      for (Eigen::Index t = offsets[b]; t < offsets[b + 1]; ++t) {
        dwte.row(tokens[static_cast<std::size_t>(t)]) += dx.row(t);
        dwpe.row(t - offsets[b]) += dx.row(t);
      }
    }
  }

  ModelConfig cfg_;
  Layout layout_;
  ParameterSet<Scalar> params_;
  GradientFault fault_ = GradientFault::none;
};

/// Batched forward pass: one T_i x vocab logit matrix per sequence.
template <typename Scalar>
std::vector<Matrix<Scalar>> forward(const Transformer<Scalar>& model, std::span<const std::vector<int>> batch) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(batch.size());
  for (const auto& tokens : batch) out.push_back(model.forward(tokens));
  return out;
}

/// Mean next-token cross entropy over masked positions of a batch.
template <typename Scalar>
Scalar loss(std::span<const Matrix<Scalar>> logits, std::span<const Sequence> batch) {
  if (logits.size() != batch.size()) throw ValidationError("logits and batch sizes differ");
  Scalar total = 0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    if (seq.loss_mask.size() != seq.tokens.size()) throw ValidationError("loss mask length differs from token count");
    if (logits[b].rows() != static_cast<Eigen::Index>(seq.tokens.size())) {
      throw ValidationError("logit rows differ from token count");
    }
    for (std::size_t t = 1; t < seq.tokens.size(); ++t) {
      if (!seq.loss_mask[t]) continue;
      const auto row = logits[b].row(static_cast<Eigen::Index>(t - 1));
      const Scalar mx = row.maxCoeff();
      total += std::log((row.array() - mx).exp().sum()) + mx - row(seq.tokens[t]);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("loss mask selects no positions");
  return total / static_cast<Scalar>(count);
}

inline std::size_t masked_count(std::span<const Sequence> batch) {
  std::size_t n = 0;
  for (const auto& s : batch) {
    for (std::size_t t = 1; t < s.loss_mask.size(); ++t) n += s.loss_mask[t] ? 1 : 0;
  }
  return n;
}

/// Sets `grads` to the gradient of the mean batch loss and returns the loss.
template <typename Scalar>
Scalar loss_and_gradients(const Transformer<Scalar>& model, std::span<const Sequence> batch,
                          ParameterSet<Scalar>& grads) {
  const std::size_t count = masked_count(batch);
  if (count == 0) throw ValidationError("loss mask selects no positions");
  grads.set_zero();
  const Scalar scale = Scalar(1) / static_cast<Scalar>(count);
  return model.accumulate_gradients(batch, scale, grads) * scale;
}

/// Argmax decoding; ties go to the lowest token id. Stops at `eos` (not
/// included in the result) or after `max_new_tokens`.
template <typename Scalar>
std::vector<int> generate_greedy(const Transformer<Scalar>& model, std::span<const int> prompt, int max_new_tokens,
                                 int eos) {
  if (prompt.empty()) throw ValidationError("prompt must contain at least one token");
  if (static_cast<long>(prompt.size()) + max_new_tokens > model.config().max_seq_len) {
    throw ValidationError("prompt length plus max_new_tokens exceeds max_seq_len");
  }
  typename Transformer<Scalar>::Decoder decoder(model);
  RowVector<Scalar> logits;
  for (int t : prompt) logits = decoder.push(t);
  std::vector<int> out;
  for (int n = 0; n < max_new_tokens; ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
      if (logits(i) > logits(best)) best = i;
    }
    if (static_cast<int>(best) == eos) break;
    out.push_back(static_cast<int>(best));
    if (n + 1 < max_new_tokens) logits = decoder.push(static_cast<int>(best));
  }
  return out;
}

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares analytic gradients with central finite differences for every
/// parameter. Per tensor the error is max|analytic - numeric| divided by
/// max(max|analytic|, max|numeric|).
inline GradCheckReport grad_check(Transformer<double>& model, std::span<const Sequence> batch, double step = 1e-4,
                                  double tolerance = 1e-4) {
  auto grads = model.params().zeros_like();
  loss_and_gradients(model, batch, grads);
  auto mean_loss = [&] {
    std::vector<Matrix<double>> logits;
    for (const auto& s : batch) logits.push_back(model.forward(s.tokens));
    return loss<double>(logits, batch);
  };
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    auto& t = model.params().tensors[i];
    const auto& g = grads.tensors[i];
    double max_diff = 0.0;
    double scale = 0.0;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double saved = t.data()[k];
      t.data()[k] = saved + step;
      const double up = mean_loss();
      t.data()[k] = saved - step;
      const double down = mean_loss();
      t.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = g.data()[k];
      max_diff = std::max(max_diff, std::abs(numeric - analytic));
      scale = std::max({scale, std::abs(numeric), std::abs(analytic)});
    }
    GradCheckEntry entry{model.params().names[i], scale > 0.0 ? max_diff / scale : 0.0, max_diff};
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace rewritelab::nn
