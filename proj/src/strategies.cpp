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

#include "river/strategies.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "river/kernels.hpp"

namespace river {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point since) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

float min_similarity(std::span<const Vector> prev, std::span<const Vector> curr) {
    float m = 1.0f;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        m = std::min(m, kernels::cosine_similarity(prev[i], curr[i]));
    }
    return m;
}

// Past positions (before `before`) with no entry at `layer`.
std::vector<std::size_t> missing_at(const KvCache& cache, std::size_t layer, std::size_t before) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < before; ++p) {
        if (!cache.present(layer, p)) out.push_back(p);
    }
    return out;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::FullBackbone: return "full";
        case StrategyKind::River: return "river";
        case StrategyKind::BatchingRecompute: return "recompute";
        case StrategyKind::StatePropagation: return "propagate";
        case StrategyKind::KvMask: return "mask";
        case StrategyKind::MonoDecreasing: return "mono";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (auto kind : {StrategyKind::FullBackbone, StrategyKind::River,
                      StrategyKind::BatchingRecompute, StrategyKind::StatePropagation,
                      StrategyKind::KvMask, StrategyKind::MonoDecreasing}) {
        if (to_string(kind) == name) return Strategy{kind};
    }
    throw ConfigError("unknown strategy '" + std::string(name) +
                      "' (expected full|river|recompute|propagate|mask|mono)");
}

std::size_t effective_min_exit(const Strategy& strategy, const ModelConfig& config) {
    if (strategy.min_exit_layer != 0) return strategy.min_exit_layer;
    return std::max<std::size_t>(1, config.n_layers / 2);
}

void validate(const Strategy& strategy, const ModelConfig& config, const ExitPolicy& policy,
              const ExitRiver* river) {
    if (!strategy.can_exit()) return;
    validate_exit_params(config, policy.entry_layer, policy.tau);
    if (strategy.kind == StrategyKind::River) {
        if (river == nullptr) throw ConfigError("river strategy requires an exit river");
        if (river->entry_layer != policy.entry_layer ||
            river->mirrors.size() != config.n_layers - river->entry_layer) {
            throw ConfigError("exit river does not match the exit policy entry layer");
        }
    }
    if (strategy.kind == StrategyKind::KvMask) {
        const std::size_t m = effective_min_exit(strategy, config);
        if (m < 1 || m >= config.n_layers) {
            throw ConfigError("min exit layer must be in [1, " + std::to_string(config.n_layers) +
                              ")");
        }
    }
}

BatchStepResult forward_positions(const Strategy& strategy, DecodeContext& ctx,
                                  std::span<const TokenId> tokens,
                                  std::span<const std::size_t> positions) {
    const auto t_start = Clock::now();
    const Model& model = ctx.model;
    const ModelConfig& cfg = model.config;
    const std::size_t L = cfg.n_layers;
    if (tokens.empty() || tokens.size() != positions.size()) {
        throw ConfigError("forward_positions: need one position per token");
    }
    for (std::size_t i = 1; i < positions.size(); ++i) {
        if (positions[i] <= positions[i - 1]) {
            throw ConfigError("forward_positions: positions must be strictly increasing");
        }
    }
    if (positions.back() >= ctx.cache.max_positions()) {
        throw CapacityError("position " + std::to_string(positions.back()) +
                            " exceeds context capacity " +
                            std::to_string(ctx.cache.max_positions()));
    }
    if (ctx.states.records.size() <= positions.back()) {
        ctx.states.records.resize(positions.back() + 1);
    }

    const StrategyKind kind = strategy.kind;
    std::size_t lowest_exit = ctx.policy.entry_layer;
    if (kind == StrategyKind::KvMask) {
        lowest_exit = std::max(lowest_exit, effective_min_exit(strategy, cfg));
    }
    std::size_t cap = L;
    if (kind == StrategyKind::MonoDecreasing && ctx.states.last_exit) cap = *ctx.states.last_exit;

    BatchStepResult out;
    StepReport& rep = out.report;
    std::vector<Vector> h;
    h.reserve(tokens.size());
    for (TokenId t : tokens) h.push_back(embed(model, t));

    std::size_t exit = L;
    for (std::size_t l = 0; l < L; ++l) {
        if (l == cap) {
            exit = cap;
            break;
        }
        if (kind == StrategyKind::BatchingRecompute) {
            const auto missing = missing_at(ctx.cache, l, positions.front());
            rep.recompute_units +=
                recompute_missing(model, ctx.cache, ctx.states, l, missing);
        }
        std::vector<Vector> prev = h;
        for (std::size_t i = 0; i < h.size(); ++i) {
            h[i] = block_forward(cfg, model.blocks[l], l, prev[i], positions[i], ctx.cache,
                                 SourceTag::Backbone);
        }
        const std::size_t depth = l + 1;
        if (strategy.can_exit() && depth >= lowest_exit && depth < L) {
            const auto t_gate = Clock::now();
            const ExitDecision d = exit_decision(prev, h, ctx.policy.tau);
            rep.decision_ns += elapsed_ns(t_gate);
            rep.similarities.push_back(d.min_similarity);
            if (d.exit) {
                exit = depth;
                break;
            }
        } else {
            rep.similarities.push_back(min_similarity(prev, h));
        }
    }
    rep.s_min = rep.similarities.empty() ? -1.0f : rep.similarities.back();

    rep.exit_layer = exit;
    rep.backbone_blocks = exit;
    if (exit < L) {
        switch (kind) {
            case StrategyKind::River:
                h = river_complete(*ctx.river, model, h, positions, exit, ctx.cache);
                rep.river_blocks = L - exit;
                break;
            case StrategyKind::StatePropagation:
                for (std::size_t i = 0; i < h.size(); ++i) {
                    propagate_state(model, ctx.cache, h[i], exit, positions[i]);
                }
                break;
            case StrategyKind::BatchingRecompute:
                for (std::size_t i = 0; i < h.size(); ++i) {
                    ctx.states.records[positions[i]].saved = SavedState{h[i], exit};
                }
                break;
            case StrategyKind::KvMask:
            case StrategyKind::MonoDecreasing:
            case StrategyKind::FullBackbone:
                break;
        }
    }
    for (std::size_t p : positions) ctx.states.records[p].exit_layer = exit;
    ctx.states.last_exit = exit;

    out.exit_layer = exit;
    out.logits.reserve(h.size());
    for (const auto& v : h) out.logits.push_back(lm_head(model, v));
    rep.step_ns = elapsed_ns(t_start);
    return out;
}

StepResult decode_step(const Strategy& strategy, DecodeContext& ctx, std::size_t position,
                       TokenId input_token) {
    const TokenId tok[] = {input_token};
    const std::size_t pos[] = {position};
    BatchStepResult b = forward_positions(strategy, ctx, tok, pos);
    StepResult r;
    r.logits = std::move(b.logits.front());
    r.next_token = argmax(r.logits);
    r.exit_layer = b.exit_layer;
    r.report = std::move(b.report);
    return r;
}

std::size_t recompute_missing(const Model& model, KvCache& cache, TokenStates& states,
                              std::size_t layer, std::span<const std::size_t> positions) {
    if (positions.empty()) return 0;
    std::vector<std::size_t> order(positions.begin(), positions.end());
    std::sort(order.begin(), order.end());
    std::size_t first_layer = layer + 1;
    for (std::size_t p : order) {
        if (p >= states.records.size() || !states.records[p].saved) {
            throw StateError("recompute: position " + std::to_string(p) + " has no saved state");
        }
        first_layer = std::min(first_layer, states.records[p].saved->layer);
    }
    std::size_t units = 0;
    for (std::size_t j = first_layer; j <= layer; ++j) {
        for (std::size_t p : order) {
            SavedState& s = *states.records[p].saved;
            if (s.layer != j) continue;
            s.hidden = block_forward(model.config, model.blocks[j], j, s.hidden, p, cache,
                                     SourceTag::Recomputed, WriteMode::Overwrite);
            s.layer = j + 1;
            ++units;
        }
    }
    return units;
}

void propagate_state(const Model& model, KvCache& cache, std::span<const float> h_exit,
                     std::size_t exit_layer, std::size_t position) {
    const std::size_t L = model.config.n_layers;
    for (std::size_t l = exit_layer; l < L; ++l) {
        if (cache.present(l, position)) {
            throw StateError("propagate_state: layer " + std::to_string(l) +
                             " already cached at position " + std::to_string(position));
        }
    }
    for (std::size_t l = exit_layer; l < L; ++l) {
        const KvPair kv = project_kv(model.config, model.blocks[l], h_exit, position);
        cache.append(l, position, kv.key, kv.value, SourceTag::Propagated);
    }
}

}  // namespace river
