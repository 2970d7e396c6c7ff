// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "rewritelab/dataset_io.hpp"
#include "rewritelab/transformer.hpp"
#include "rewritelab/vocab.hpp"

namespace rewritelab::nn {

/// Checkpoint layout, all integers and floats little-endian:
///
///   magic "RWLCKPT1" (8 bytes), u32 version, u32 scalar width (4)
///   i32 vocab_size, d_model, n_layers, n_heads, max_seq_len; f64 dropout
///   u32 n, n vocab bytes (specials excluded)
///   u32 n, template format bytes; u32 n, cue bytes
///   u32 tensor count, then per tensor: u32 n, name bytes, u32 rows,
///   u32 cols, rows*cols f32 in row-major order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Transformer<float> model;
  Vocab vocab;
  PromptTemplate tpl;
};

void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& model, const Vocab& vocab,
                     const PromptTemplate& tpl);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rewritelab::nn
