// Copyright 2026 The River Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>

#include "river/kv_cache.hpp"
#include "river/model.hpp"

namespace river {

using TokenId = std::uint32_t;

struct KvPair {
    Vector key;
    Vector value;
};

Vector embed(const Model& model, TokenId token);

// Pre-attention norm, K/V projections, RoPE on K. Exactly the K/V a block
// would append for hidden state `h_in` at `position`.
KvPair project_kv(const ModelConfig& config, const DecoderBlock& block, std::span<const float> h_in,
                  std::size_t position);

// One decoder block for one token:
//   norm -> Q,K,V -> RoPE(Q,K) -> append K,V at (layer, position) -> attention
//   over every present entry of `layer` at positions <= position -> Wo ->
//   residual -> norm -> SwiGLU -> residual.
// Appends exactly one K/V entry. Absent positions get zero attention weight.
Vector block_forward(const ModelConfig& config, const DecoderBlock& block, std::size_t layer,
                     std::span<const float> h_in, std::size_t position, KvCache& cache,
                     SourceTag tag, WriteMode mode = WriteMode::Append);

// Final RMSNorm followed by the LM-head projection.
Vector lm_head(const Model& model, std::span<const float> h);

// Greedy pick; ties go to the lowest token id.
TokenId argmax(std::span<const float> logits);

}  // namespace river
