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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "river/exit_river.hpp"
#include "river/kv_cache.hpp"
#include "river/model.hpp"
#include "river/strategies.hpp"

namespace river {

// One row per processed position. Prompt rows share the unified prefill
// depth; out_id is -1 for prompt positions whose prediction is not emitted.
struct TraceRow {
    std::size_t position = 0;
    TokenId in_id = 0;
    std::int64_t out_id = -1;
    bool prefill = false;
    std::size_t exit_layer = 0;
    float s_min = -1.0f;
    std::size_t backbone_blocks = 0;
    std::size_t river_blocks = 0;
    std::size_t recompute_units = 0;
    std::vector<float> similarities;
    std::int64_t decision_ns = 0;
    std::int64_t step_ns = 0;
};

struct GenerationTrace {
    std::size_t n_layers = 0;
    double river_cost_factor = kDefaultRiverCostFactor;
    std::size_t prefill_depth = 0;
    std::vector<TraceRow> rows;
    std::vector<TokenId> generated;
    std::int64_t wall_ns = 0;

    double mean_exit_depth() const;
    std::vector<std::size_t> exit_histogram() const;  // size L + 1, indexed by exit layer
    // sum over rows of backbone_blocks + river_cost_factor * river_blocks + recompute_units
    double cost_units() const;
    std::size_t total_backbone_blocks() const;
    std::size_t total_river_blocks() const;
    std::size_t total_recompute_units() const;
};

struct PrefillResult {
    std::size_t depth = 0;
    std::vector<Vector> logits;  // one per prompt position
    std::vector<TraceRow> rows;
};

// Sequence-level exit over the whole prompt: one unified depth chosen by the
// batch-min gate with the batch being every prompt position.
PrefillResult prefill(DecodeContext& ctx, const Strategy& strategy, std::span<const TokenId> prompt);

struct GenerateOptions {
    bool record_logits = false;
    // Called after the prefill and after every decode step.
    std::function<void(const TraceRow&, const KvCache&)> on_step;
};

struct GenerationRun {
    GenerationTrace trace;
    KvCache cache;
    TokenStates states;
    std::vector<Vector> output_logits;  // per emitted token, when recorded
};

// Greedy generation: prefill, then token-level exit for every new token.
GenerationRun generate(const Model& model, const ExitRiver* river, const Strategy& strategy,
                       std::span<const TokenId> prompt, std::size_t max_new_tokens,
                       const ExitPolicy& policy, const GenerateOptions& options = {});

// Recomputes every K/V entry still owed by BatchingRecompute so the cache is
// complete. Returns the block evaluations spent.
std::size_t settle_recompute_debt(const Model& model, KvCache& cache, TokenStates& states);

// Mean K or V cosine similarity between a strategy cache and a backbone
// shadow cache, bucketed by (exit layer of the position, cache layer).
struct Heatmap {
    std::size_t n_layers = 0;
    std::vector<double> sum;          // (n_layers + 1) x n_layers
    std::vector<std::size_t> count;

    explicit Heatmap(std::size_t layers = 0);
    void add(std::size_t exit_layer, std::size_t layer, double value);
    std::optional<double> mean(std::size_t exit_layer, std::size_t layer) const;
};

struct FidelityReport {
    double mean_kl = 0.0;
    double match_rate = 1.0;
    std::size_t compared = 0;
    Heatmap keys;
    Heatmap values;
};

inline constexpr double kKlProbabilityFloor = 1e-9;

// KL(p || q) of softmax(p_logits) and softmax(q_logits), each floored at 1e-9
// and renormalised.
double kl_divergence(std::span<const float> p_logits, std::span<const float> q_logits);

struct ShadowRun {
    KvCache cache;
    std::vector<Vector> logits;  // one per position of the input sequence
};

// Full-backbone run over a fixed token sequence (teacher forcing).
ShadowRun run_shadow(const Model& model, std::span<const TokenId> sequence);

// Compares a finished strategy run against a teacher-forced backbone shadow
// fed the same tokens. The run must have been generated with record_logits.
FidelityReport fidelity_against_backbone(const Model& model, std::span<const TokenId> prompt,
                                         const GenerationRun& run);

FidelityReport compare_with_backbone(const Model& model, const ExitRiver* river,
                                     const Strategy& strategy, std::span<const TokenId> prompt,
                                     std::size_t max_new_tokens, const ExitPolicy& policy);

struct ProfiledToken {
    std::size_t position = 0;
    TokenId token = 0;  // backbone prediction
    std::size_t optimal_exit = 0;
};

struct ProfileResult {
    std::vector<ProfiledToken> tokens;
    std::vector<std::size_t> histogram;  // size L + 1
};

// Shallowest depth l in [1, L] whose LM-head argmax already equals the
// full-depth prediction, for every emitted token of a full-backbone run.
ProfileResult profile_optimal_exit(const Model& model, std::span<const TokenId> prompt,
                                   std::size_t continuation_len);

struct MemoryOptions {
    bool with_river = false;
    std::size_t entry_layer = 1;
    QuantConfig quant;
    std::size_t offload_depth = 0;  // deepest backbone blocks evicted; 0 = none
};

struct MemoryRow {
    std::uint64_t seq_len = 0;
    std::uint64_t parameter_bytes = 0;
    std::uint64_t kv_bytes = 0;
    std::uint64_t activation_bytes = 0;
    std::uint64_t total_bytes = 0;
};

// fp16 working set for one decode step, independent of sequence length:
// 2 bytes * (3d + q_dim + 2 kv_dim + 2 ffn + vocab).
std::uint64_t activation_bytes(const ModelConfig& config);

std::vector<MemoryRow> memory_report(const ModelConfig& config,
                                     std::span<const std::uint64_t> seq_lens,
                                     const MemoryOptions& options);

// Share of step wall time spent inside exit decisions.
double decision_overhead_share(const GenerationTrace& trace);

}  // namespace river
