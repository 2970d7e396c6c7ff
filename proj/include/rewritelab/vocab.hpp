// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rewritelab/dataset_io.hpp"

namespace rewritelab::nn {

/// Character-level vocabulary. Ids 0..2 are PAD, BOS and EOS; the remaining
/// ids follow the covered characters in ascending byte order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSpecials = 3;

  Vocab() = default;
  /// `symbols` must be distinct; they are sorted on construction.
  explicit Vocab(std::vector<char> symbols);

  static Vocab from_texts(std::span<const std::string> texts);

  int size() const { return kSpecials + static_cast<int>(symbols_.size()); }
  const std::vector<char>& symbols() const { return symbols_; }
  bool covers(char c) const;
  int id(char c) const;

  std::vector<int> encode(std::string_view text) const;
  /// Special ids decode to nothing.
  std::string decode(std::span<const int> ids) const;

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  std::vector<char> symbols_;
  std::array<int, 256> ids_{};
};

/// Covers every character of every prompt and target in both splits.
Vocab build_vocab(const SplitDataset& data, const PromptTemplate& tpl = {});

}  // namespace rewritelab::nn
