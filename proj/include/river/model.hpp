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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "river/tensor.hpp"

namespace river {

// Architecture of a Llama-style decoder: RMSNorm pre-norm blocks, RoPE,
// SwiGLU FFN, grouped-query attention when n_kv_heads < n_heads.
struct ModelConfig {
    std::uint32_t n_layers = 0;
    std::uint32_t hidden_dim = 0;
    std::uint32_t n_heads = 0;
    std::uint32_t n_kv_heads = 0;
    std::uint32_t head_dim = 0;
    std::uint32_t ffn_dim = 0;
    std::uint32_t vocab_size = 0;
    float rope_base = 10000.0f;
    float norm_eps = 1e-5f;
    std::uint32_t max_positions = 0;

    std::size_t q_dim() const noexcept { return std::size_t{n_heads} * head_dim; }
    std::size_t kv_dim() const noexcept { return std::size_t{n_kv_heads} * head_dim; }

    bool operator==(const ModelConfig&) const = default;
};

// Throws ConfigError naming the first offending field.
void validate(const ModelConfig& config);

// Shape-only presets: "toy-8", "llama3.2-1b-shape", "llama3.1-8b-shape".
std::optional<ModelConfig> find_preset(std::string_view name);
std::vector<std::string> preset_names();

// Projection matrices are stored [in x out] so that y = x * W.
struct DecoderBlock {
    Vector attn_norm;
    Matrix wq;  // [d x n_heads*head_dim]
    Matrix wk;  // [d x n_kv_heads*head_dim]
    Matrix wv;  // [d x n_kv_heads*head_dim]
    Matrix wo;  // [n_heads*head_dim x d]
    Vector ffn_norm;
    Matrix w_gate;  // [d x ffn]
    Matrix w_up;    // [d x ffn]
    Matrix w_down;  // [ffn x d]

    bool operator==(const DecoderBlock&) const = default;
};

struct Model {
    ModelConfig config;
    Matrix embedding;  // [vocab x d]
    std::vector<DecoderBlock> blocks;
    Vector final_norm;
    Matrix head;  // [d x vocab]

    bool operator==(const Model&) const = default;
};

std::uint64_t count_block_parameters(const ModelConfig& config);
std::uint64_t count_parameters(const ModelConfig& config);

// Zero-initialised block with correct shapes and unit norm gains.
DecoderBlock make_zero_block(const ModelConfig& config);

// Deterministic random model.
//
// PRNG: std::mt19937_64 seeded with `seed`. Each weight consumes one draw r:
//   u = (r >> 40) * 2^-24            (uniform in [0, 1), 24-bit grid)
//   w = (2u - 1) * scale             (uniform in [-scale, scale))
// scale = 1 / sqrt(fan_in) for projections (fan_in = matrix rows) and the LM
// head, 1 for the embedding. Norm gains are exactly 1 and consume no draws.
// Draw order is the canonical tensor order of the model file.
Model generate_random_model(const ModelConfig& config, std::uint64_t seed);

// Little-endian "RIVR" v1 file; see README for the byte layout.
std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(const std::vector<std::uint8_t>& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace river
