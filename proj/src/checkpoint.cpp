// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rewritelab/errors.hpp"

namespace rewritelab::nn {

namespace {

constexpr char kMagic[8] = {'R', 'W', 'L', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  int i32() { return static_cast<int>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ProtocolError("checkpoint is truncated");
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& model, const Vocab& vocab,
                     const PromptTemplate& tpl) {
  const auto& cfg = model.config();
  if (cfg.vocab_size != vocab.size()) throw ValidationError("model and vocabulary sizes differ");
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(4);
  w.i32(cfg.vocab_size);
  w.i32(cfg.d_model);
  w.i32(cfg.n_layers);
  w.i32(cfg.n_heads);
  w.i32(cfg.max_seq_len);
  w.f64(cfg.dropout);
  w.str(std::string(vocab.symbols().begin(), vocab.symbols().end()));
  w.str(tpl.format);
  w.str(tpl.cue);
  const auto& params = model.params();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.tensors[i];
    w.str(params.names[i]);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index k = 0; k < t.size(); ++k) w.f32(t.data()[k]);
  }

  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ProtocolError(path.string() + " is not a rewritelab checkpoint");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw ProtocolError("unsupported checkpoint version " + std::to_string(version));
  }
  if (r.u32() != 4) throw ProtocolError("unsupported checkpoint scalar width");
  ModelConfig cfg;
  cfg.vocab_size = r.i32();
  cfg.d_model = r.i32();
  cfg.n_layers = r.i32();
  cfg.n_heads = r.i32();
  cfg.max_seq_len = r.i32();
  cfg.dropout = r.f64();
  const std::string symbols = r.str();
  Vocab vocab(std::vector<char>(symbols.begin(), symbols.end()));
  PromptTemplate tpl;
  tpl.format = r.str();
  tpl.cue = r.str();
  if (vocab.size() != cfg.vocab_size) throw ProtocolError("checkpoint vocabulary does not match its config");

  auto params = make_parameters<float>(cfg);
  const auto count = r.u32();
  if (count != params.size()) throw ProtocolError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = r.str();
    if (name != params.names[i]) throw ProtocolError("unexpected tensor '" + name + "', wanted '" + params.names[i] + "'");
    const auto rows = r.u32();
    const auto cols = r.u32();
    auto& t = params.tensors[i];
    if (rows != t.rows() || cols != t.cols()) throw ProtocolError("tensor '" + name + "' has the wrong shape");
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = r.f32();
  }
  if (!r.done()) throw ProtocolError("trailing bytes after checkpoint tensors");
  return Checkpoint{Transformer<float>(cfg, std::move(params)), std::move(vocab), resolve_template(tpl)};
}

}  // namespace rewritelab::nn
