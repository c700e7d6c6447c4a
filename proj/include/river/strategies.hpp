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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "river/exit_river.hpp"
#include "river/forward.hpp"
#include "river/kv_cache.hpp"
#include "river/model.hpp"

namespace river {

enum class StrategyKind {
    FullBackbone,
    River,
    BatchingRecompute,
    StatePropagation,
    KvMask,
    MonoDecreasing,
};

// How an early-exited token's missing K/V is handled.
struct Strategy {
    StrategyKind kind = StrategyKind::FullBackbone;
    // KvMask only: exits below this depth are suppressed. 0 selects L / 2.
    std::size_t min_exit_layer = 0;

    static Strategy full() { return {StrategyKind::FullBackbone}; }
    static Strategy river() { return {StrategyKind::River}; }
    static Strategy recompute() { return {StrategyKind::BatchingRecompute}; }
    static Strategy propagate() { return {StrategyKind::StatePropagation}; }
    static Strategy mask(std::size_t min_exit = 0) { return {StrategyKind::KvMask, min_exit}; }
    static Strategy mono() { return {StrategyKind::MonoDecreasing}; }

    bool can_exit() const noexcept { return kind != StrategyKind::FullBackbone; }
    bool operator==(const Strategy&) const = default;
};

// CLI names: full, river, recompute, propagate, mask, mono.
std::string_view to_string(StrategyKind kind);
Strategy parse_strategy(std::string_view name);

// Shared exit gate: candidates are depths e in [entry_layer, L - 1], where
// depth e means blocks 0..e-1 have run. The gate at depth e compares the
// input and output of block e-1.
struct ExitPolicy {
    std::size_t entry_layer = 1;
    float tau = 0.5f;
};

struct SavedState {
    Vector hidden;
    std::size_t layer = 0;  // hidden is the input of backbone block `layer`
};

struct TokenRecord {
    std::size_t exit_layer = 0;
    std::optional<SavedState> saved;  // BatchingRecompute with exit_layer < L only
};

// Per-position bookkeeping owned by one generation stream.
struct TokenStates {
    std::vector<TokenRecord> records;  // indexed by position
    std::optional<std::size_t> last_exit;
};

struct StepReport {
    std::size_t exit_layer = 0;
    std::size_t backbone_blocks = 0;
    std::size_t river_blocks = 0;
    std::size_t recompute_units = 0;
    float s_min = -1.0f;                // min over batch, last backbone block run
    std::vector<float> similarities;    // s^(1..exit_layer), min over batch
    std::int64_t decision_ns = 0;
    std::int64_t step_ns = 0;
};

struct StepResult {
    TokenId next_token = 0;
    std::size_t exit_layer = 0;
    Vector logits;
    StepReport report;
};

// Everything a policy may read or mutate for one stream.
struct DecodeContext {
    const Model& model;
    const ExitRiver* river;  // required for StrategyKind::River
    KvCache& cache;
    TokenStates& states;
    ExitPolicy policy;
};

// Result of pushing several positions through the model together with a
// single exit depth (batch-min gate). decode_step is the one-position case.
struct BatchStepResult {
    std::size_t exit_layer = 0;
    std::vector<Vector> logits;  // one per position
    StepReport report;           // block counts are per position
};

void validate(const Strategy& strategy, const ModelConfig& config, const ExitPolicy& policy,
              const ExitRiver* river);

std::size_t effective_min_exit(const Strategy& strategy, const ModelConfig& config);

BatchStepResult forward_positions(const Strategy& strategy, DecodeContext& ctx,
                                  std::span<const TokenId> tokens,
                                  std::span<const std::size_t> positions);

StepResult decode_step(const Strategy& strategy, DecodeContext& ctx, std::size_t position,
                       TokenId input_token);

// Advances every listed position from its saved state through backbone
// blocks up to and including `layer`, layer-major in position order, writing
// K/V tagged Recomputed. Returns the number of block evaluations performed.
std::size_t recompute_missing(const Model& model, KvCache& cache, TokenStates& states,
                              std::size_t layer, std::span<const std::size_t> positions);

// Writes K/V for layers [exit_layer, L) at `position` from the exit hidden
// state, using each layer's own norm and K/V projections.
void propagate_state(const Model& model, KvCache& cache, std::span<const float> h_exit,
                     std::size_t exit_layer, std::size_t position);

}  // namespace river
