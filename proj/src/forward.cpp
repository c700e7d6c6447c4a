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

#include "river/forward.hpp"

#include <string>

#include "river/kernels.hpp"

namespace river {

namespace {

void rope_heads(Vector& x, std::size_t n_heads, std::size_t head_dim, std::size_t position,
                float base) {
    for (std::size_t h = 0; h < n_heads; ++h) {
        std::span<float> head(x.data() + h * head_dim, head_dim);
        const Vector rotated = kernels::apply_rope(head, position, base);
        std::copy(rotated.begin(), rotated.end(), head.begin());
    }
}

void check_hidden(const ModelConfig& config, std::span<const float> h) {
    if (h.size() != config.hidden_dim) {
        throw DimensionError("hidden state has " + std::to_string(h.size()) + " elements, expected " +
                             std::to_string(config.hidden_dim));
    }
}

KvPair project_kv_normed(const ModelConfig& c, const DecoderBlock& b, std::span<const float> x,
                         std::size_t position) {
    KvPair kv{kernels::vecmat(x, b.wk), kernels::vecmat(x, b.wv)};
    rope_heads(kv.key, c.n_kv_heads, c.head_dim, position, c.rope_base);
    return kv;
}

}  // namespace

Vector embed(const Model& model, TokenId token) {
    if (token >= model.config.vocab_size) {
        throw ConfigError("token id " + std::to_string(token) + " outside vocabulary");
    }
    const auto row = model.embedding.row(token);
    return {row.begin(), row.end()};
}

KvPair project_kv(const ModelConfig& config, const DecoderBlock& block, std::span<const float> h_in,
                  std::size_t position) {
    check_hidden(config, h_in);
    const Vector x = kernels::rms_norm(h_in, block.attn_norm, config.norm_eps);
    return project_kv_normed(config, block, x, position);
}

Vector block_forward(const ModelConfig& config, const DecoderBlock& block, std::size_t layer,
                     std::span<const float> h_in, std::size_t position, KvCache& cache,
                     SourceTag tag, WriteMode mode) {
    check_hidden(config, h_in);
    if (position >= cache.max_positions()) {
        throw CapacityError("position " + std::to_string(position) + " exceeds cache capacity " +
                            std::to_string(cache.max_positions()));
    }
    if (mode == WriteMode::Append && cache.present(layer, position)) {
        throw StateError("block_forward: (" + std::to_string(layer) + ", " +
                         std::to_string(position) + ") already cached");
    }

    const Vector x = kernels::rms_norm(h_in, block.attn_norm, config.norm_eps);
    Vector q = kernels::vecmat(x, block.wq);
    rope_heads(q, config.n_heads, config.head_dim, position, config.rope_base);
    const KvPair kv = project_kv_normed(config, block, x, position);
    cache.append(layer, position, kv.key, kv.value, tag, mode);

    const PresentRows rows = cache.read_present(layer, position);
    const kernels::AttentionShape shape{config.n_heads, config.n_kv_heads, config.head_dim};
    const Vector attn = kernels::attention(q, rows.keys, rows.values, shape);
    const Vector o = kernels::vecmat(attn, block.wo);

    Vector h(h_in.begin(), h_in.end());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += o[i];

    const Vector x2 = kernels::rms_norm(h, block.ffn_norm, config.norm_eps);
    Vector gate = kernels::vecmat(x2, block.w_gate);
    const Vector up = kernels::vecmat(x2, block.w_up);
    for (std::size_t i = 0; i < gate.size(); ++i) gate[i] = kernels::silu(gate[i]) * up[i];
    const Vector down = kernels::vecmat(gate, block.w_down);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += down[i];
    return h;
}

Vector lm_head(const Model& model, std::span<const float> h) {
    check_hidden(model.config, h);
    const Vector x = kernels::rms_norm(h, model.final_norm, model.config.norm_eps);
    return kernels::vecmat(x, model.head);
}

TokenId argmax(std::span<const float> logits) {
    if (logits.empty()) throw DimensionError("argmax of empty logits");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

}  // namespace river
