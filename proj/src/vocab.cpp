// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/vocab.hpp"

#include <algorithm>

#include "rewritelab/errors.hpp"

namespace rewritelab::nn {

namespace {

unsigned char byte(char c) { return static_cast<unsigned char>(c); }

}  // namespace

Vocab::Vocab(std::vector<char> symbols) : symbols_(std::move(symbols)) {
  std::sort(symbols_.begin(), symbols_.end(), [](char a, char b) { return byte(a) < byte(b); });
  if (std::adjacent_find(symbols_.begin(), symbols_.end()) != symbols_.end()) {
    throw ValidationError("vocabulary symbols must be distinct");
  }
  ids_.fill(-1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) ids_[byte(symbols_[i])] = kSpecials + static_cast<int>(i);
}

Vocab Vocab::from_texts(std::span<const std::string> texts) {
  std::array<bool, 256> seen{};
  for (const auto& t : texts) {
    for (char c : t) seen[byte(c)] = true;
  }
  std::vector<char> symbols;
  for (int b = 0; b < 256; ++b) {
    if (seen[static_cast<std::size_t>(b)]) symbols.push_back(static_cast<char>(b));
  }
  return Vocab(std::move(symbols));
}

bool Vocab::covers(char c) const { return ids_[byte(c)] >= 0; }

int Vocab::id(char c) const {
  const int i = ids_[byte(c)];
  if (i < 0) {
    throw ValidationError("character with code " + std::to_string(byte(c)) + " is not in the vocabulary");
  }
  return i;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(id(c));
  return out;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int i : ids) {
    if (i < 0 || i >= size()) throw ValidationError("token id " + std::to_string(i) + " out of range");
    if (i >= kSpecials) out.push_back(symbols_[static_cast<std::size_t>(i - kSpecials)]);
  }
  return out;
}

Vocab build_vocab(const SplitDataset& data, const PromptTemplate& tpl) {
  if (data.train.empty() && data.test.empty()) throw ValidationError("cannot build a vocabulary from an empty dataset");
  std::vector<std::string> texts;
  texts.reserve(data.train.size() + data.test.size());
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& ex : *split) texts.push_back(format_training_text(ex, tpl));
  }
  return Vocab::from_texts(texts);
}

}  // namespace rewritelab::nn
