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

#include "river/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "river/kernels.hpp"

namespace river {

namespace {

using Clock = std::chrono::steady_clock;

TraceRow make_row(std::size_t position, TokenId in_id, const StepReport& rep) {
    TraceRow row;
    row.position = position;
    row.in_id = in_id;
    row.exit_layer = rep.exit_layer;
    row.s_min = rep.s_min;
    row.backbone_blocks = rep.backbone_blocks;
    row.river_blocks = rep.river_blocks;
    row.recompute_units = rep.recompute_units;
    row.similarities = rep.similarities;
    row.decision_ns = rep.decision_ns;
    row.step_ns = rep.step_ns;
    return row;
}

void check_request(const ModelConfig& config, std::span<const TokenId> prompt,
                   std::size_t max_new_tokens) {
    if (prompt.empty()) throw ConfigError("prompt must contain at least one token");
    if (prompt.size() + max_new_tokens > config.max_positions) {
        throw CapacityError("prompt (" + std::to_string(prompt.size()) + ") + new tokens (" +
                            std::to_string(max_new_tokens) + ") exceeds max_positions " +
                            std::to_string(config.max_positions));
    }
    for (TokenId t : prompt) {
        if (t >= config.vocab_size) {
            throw ConfigError("prompt token " + std::to_string(t) + " outside vocabulary");
        }
    }
}

std::vector<double> softmax_f64(std::span<const float> logits) {
    const float max = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - max);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

void floor_and_renormalise(std::vector<double>& p) {
    double sum = 0.0;
    for (double& v : p) {
        v = std::max(v, kKlProbabilityFloor);
        sum += v;
    }
    for (double& v : p) v /= sum;
}

std::uint64_t block_bytes_fp16(const ModelConfig& c) { return 2 * count_block_parameters(c); }

std::uint64_t river_block_bytes(const ModelConfig& c, const WeightQuantizer& q) {
    const std::uint64_t d = c.hidden_dim;
    const std::uint64_t matrices[] = {d * c.q_dim(),  d * c.kv_dim(),     d * c.kv_dim(),
                                      c.q_dim() * d,  d * c.ffn_dim,      d * c.ffn_dim,
                                      c.ffn_dim * d};
    std::uint64_t bytes = 2 * (2 * d);  // norm gains stay fp16
    for (std::uint64_t n : matrices) bytes += q.storage_bytes(n);
    return bytes;
}

}  // namespace

double GenerationTrace::mean_exit_depth() const {
    if (rows.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : rows) sum += static_cast<double>(r.exit_layer);
    return sum / static_cast<double>(rows.size());
}

std::vector<std::size_t> GenerationTrace::exit_histogram() const {
    std::vector<std::size_t> h(n_layers + 1, 0);
    for (const auto& r : rows) ++h.at(r.exit_layer);
    return h;
}

double GenerationTrace::cost_units() const {
    double c = 0.0;
    for (const auto& r : rows) {
        c += static_cast<double>(r.backbone_blocks) +
             river_cost_factor * static_cast<double>(r.river_blocks) +
             static_cast<double>(r.recompute_units);
    }
    return c;
}

std::size_t GenerationTrace::total_backbone_blocks() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.backbone_blocks;
    return n;
}

std::size_t GenerationTrace::total_river_blocks() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.river_blocks;
    return n;
}

std::size_t GenerationTrace::total_recompute_units() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.recompute_units;
    return n;
}

PrefillResult prefill(DecodeContext& ctx, const Strategy& strategy, std::span<const TokenId> prompt) {
    if (prompt.empty()) throw ConfigError("prefill: empty prompt");
    if (prompt.size() > ctx.cache.max_positions()) {
        throw CapacityError("prefill: prompt of " + std::to_string(prompt.size()) +
                            " tokens exceeds max_positions " +
                            std::to_string(ctx.cache.max_positions()));
    }
    std::vector<std::size_t> positions(prompt.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    BatchStepResult b = forward_positions(strategy, ctx, prompt, positions);

    PrefillResult out;
    out.depth = b.exit_layer;
    out.logits = std::move(b.logits);
    StepReport per_row = b.report;
    per_row.decision_ns = 0;
    per_row.step_ns = 0;
    for (std::size_t i = 0; i < prompt.size(); ++i) {
        const bool last = i + 1 == prompt.size();
        TraceRow row = make_row(i, prompt[i], last ? b.report : per_row);
        row.prefill = true;
        out.rows.push_back(std::move(row));
    }
    return out;
}

GenerationRun generate(const Model& model, const ExitRiver* river, const Strategy& strategy,
                       std::span<const TokenId> prompt, std::size_t max_new_tokens,
                       const ExitPolicy& policy, const GenerateOptions& options) {
    const auto t_start = Clock::now();
    const ModelConfig& cfg = model.config;
    validate(strategy, cfg, policy, river);
    check_request(cfg, prompt, max_new_tokens);

    GenerationRun run{GenerationTrace{}, KvCache(cfg), TokenStates{}, {}};
    GenerationTrace& trace = run.trace;
    trace.n_layers = cfg.n_layers;
    trace.river_cost_factor = river ? river->cost_factor : kDefaultRiverCostFactor;
    DecodeContext ctx{model, river, run.cache, run.states, policy};

    PrefillResult pre = prefill(ctx, strategy, prompt);
    trace.prefill_depth = pre.depth;
    if (max_new_tokens > 0) {
        const TokenId first = argmax(pre.logits.back());
        pre.rows.back().out_id = first;
        trace.generated.push_back(first);
        if (options.record_logits) run.output_logits.push_back(std::move(pre.logits.back()));
    }
    for (auto& row : pre.rows) trace.rows.push_back(std::move(row));
    if (options.on_step) options.on_step(trace.rows.back(), run.cache);

    for (std::size_t k = 1; k < max_new_tokens; ++k) {
        const std::size_t position = prompt.size() + k - 1;
        const TokenId input = trace.generated.back();
        StepResult step = decode_step(strategy, ctx, position, input);
        TraceRow row = make_row(position, input, step.report);
        row.out_id = step.next_token;
        trace.generated.push_back(step.next_token);
        if (options.record_logits) run.output_logits.push_back(std::move(step.logits));
        trace.rows.push_back(std::move(row));
        if (options.on_step) options.on_step(trace.rows.back(), run.cache);
    }
    trace.wall_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t_start).count();
    return run;
}

std::size_t settle_recompute_debt(const Model& model, KvCache& cache, TokenStates& states) {
    std::size_t units = 0;
    const std::size_t n = cache.seq_len();
    for (std::size_t l = 0; l < model.config.n_layers; ++l) {
        std::vector<std::size_t> missing;
        for (std::size_t p = 0; p < n; ++p) {
            if (!cache.present(l, p)) missing.push_back(p);
        }
        units += recompute_missing(model, cache, states, l, missing);
    }
    return units;
}

Heatmap::Heatmap(std::size_t layers)
    : n_layers(layers), sum((layers + 1) * layers, 0.0), count((layers + 1) * layers, 0) {}

void Heatmap::add(std::size_t exit_layer, std::size_t layer, double value) {
    const std::size_t i = exit_layer * n_layers + layer;
    sum.at(i) += value;
    ++count.at(i);
}

std::optional<double> Heatmap::mean(std::size_t exit_layer, std::size_t layer) const {
    const std::size_t i = exit_layer * n_layers + layer;
    if (count.at(i) == 0) return std::nullopt;
    return sum[i] / static_cast<double>(count[i]);
}

double kl_divergence(std::span<const float> p_logits, std::span<const float> q_logits) {
    if (p_logits.size() != q_logits.size() || p_logits.empty()) {
        throw DimensionError("kl_divergence: logit vectors differ in length");
    }
    std::vector<double> p = softmax_f64(p_logits);
    std::vector<double> q = softmax_f64(q_logits);
    floor_and_renormalise(p);
    floor_and_renormalise(q);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
    return std::max(0.0, kl);
}

ShadowRun run_shadow(const Model& model, std::span<const TokenId> sequence) {
    ShadowRun shadow{KvCache(model.config), {}};
    TokenStates states;
    DecodeContext ctx{model, nullptr, shadow.cache, states, ExitPolicy{}};
    const Strategy full = Strategy::full();
    shadow.logits.reserve(sequence.size());
    for (std::size_t p = 0; p < sequence.size(); ++p) {
        shadow.logits.push_back(decode_step(full, ctx, p, sequence[p]).logits);
    }
    return shadow;
}

FidelityReport fidelity_against_backbone(const Model& model, std::span<const TokenId> prompt,
                                         const GenerationRun& run) {
    const GenerationTrace& trace = run.trace;
    if (run.output_logits.size() != trace.generated.size()) {
        throw ConfigError("fidelity: run was generated without recorded logits");
    }
    std::vector<TokenId> sequence(prompt.begin(), prompt.end());
    if (!trace.generated.empty()) {
        sequence.insert(sequence.end(), trace.generated.begin(), trace.generated.end() - 1);
    }
    if (sequence.size() != trace.rows.size()) {
        throw ConfigError("fidelity: trace does not match the prompt");
    }
    const ShadowRun shadow = run_shadow(model, sequence);

    const std::size_t L = model.config.n_layers;
    FidelityReport rep{0.0, 1.0, 0, Heatmap(L), Heatmap(L)};
    double kl_sum = 0.0;
    std::size_t matches = 0;
    for (std::size_t k = 0; k < run.output_logits.size(); ++k) {
        const std::size_t pos = prompt.size() - 1 + k;
        const Vector& reference = shadow.logits[pos];
        const Vector& candidate = run.output_logits[k];
        kl_sum += kl_divergence(reference, candidate);
        if (argmax(reference) == argmax(candidate)) ++matches;
    }
    rep.compared = run.output_logits.size();
    if (rep.compared > 0) {
        rep.mean_kl = kl_sum / static_cast<double>(rep.compared);
        rep.match_rate = static_cast<double>(matches) / static_cast<double>(rep.compared);
    }
    for (const TraceRow& row : trace.rows) {
        for (std::size_t l = 0; l < L; ++l) {
            if (!run.cache.present(l, row.position)) continue;
            rep.keys.add(row.exit_layer, l,
                         kernels::cosine_similarity(run.cache.key(l, row.position),
                                                    shadow.cache.key(l, row.position)));
            rep.values.add(row.exit_layer, l,
                           kernels::cosine_similarity(run.cache.value(l, row.position),
                                                      shadow.cache.value(l, row.position)));
        }
    }
    return rep;
}

FidelityReport compare_with_backbone(const Model& model, const ExitRiver* river,
                                     const Strategy& strategy, std::span<const TokenId> prompt,
                                     std::size_t max_new_tokens, const ExitPolicy& policy) {
    GenerateOptions opts;
    opts.record_logits = true;
    const GenerationRun run = generate(model, river, strategy, prompt, max_new_tokens, policy, opts);
    return fidelity_against_backbone(model, prompt, run);
}

ProfileResult profile_optimal_exit(const Model& model, std::span<const TokenId> prompt,
                                   std::size_t continuation_len) {
    const ModelConfig& cfg = model.config;
    check_request(cfg, prompt, continuation_len);
    const std::size_t L = cfg.n_layers;
    ProfileResult out;
    out.histogram.assign(L + 1, 0);
    if (continuation_len == 0) return out;

    KvCache cache(cfg);
    std::vector<TokenId> generated;
    const std::size_t n_positions = prompt.size() + continuation_len - 1;
    for (std::size_t p = 0; p < n_positions; ++p) {
        const TokenId tok = p < prompt.size() ? prompt[p] : generated[p - prompt.size()];
        std::vector<Vector> states{embed(model, tok)};
        for (std::size_t l = 0; l < L; ++l) {
            states.push_back(
                block_forward(cfg, model.blocks[l], l, states.back(), p, cache, SourceTag::Backbone));
        }
        if (p + 1 < prompt.size()) continue;
        const TokenId reference = argmax(lm_head(model, states[L]));
        std::size_t optimal = L;
        for (std::size_t l = 1; l < L; ++l) {
            if (argmax(lm_head(model, states[l])) == reference) {
                optimal = l;
                break;
            }
        }
        out.tokens.push_back({p, reference, optimal});
        ++out.histogram[optimal];
        generated.push_back(reference);
    }
    return out;
}

std::uint64_t activation_bytes(const ModelConfig& c) {
    const std::uint64_t elems = 3ull * c.hidden_dim + c.q_dim() + 2 * c.kv_dim() +
                                2ull * c.ffn_dim + c.vocab_size;
    return 2 * elems;
}

std::vector<MemoryRow> memory_report(const ModelConfig& config,
                                     std::span<const std::uint64_t> seq_lens,
                                     const MemoryOptions& options) {
    validate(config);
    const std::size_t L = config.n_layers;
    if (options.offload_depth > L) {
        throw ConfigError("offload depth must be in [0, " + std::to_string(L) + "]");
    }
    const std::uint64_t d = config.hidden_dim;
    const std::uint64_t v = config.vocab_size;
    // embedding + LM head + final norm
    std::uint64_t params = 2 * (2 * v * d + d);
    params += (L - options.offload_depth) * block_bytes_fp16(config);
    if (options.with_river) {
        validate_exit_params(config, options.entry_layer, 0.0f);
        if (options.quant.enabled) validate(options.quant);
        const auto quantizer = make_quantizer(options.quant);
        params += (L - options.entry_layer) * river_block_bytes(config, *quantizer);
    }
    const std::uint64_t act = activation_bytes(config);
    std::vector<MemoryRow> rows;
    for (std::uint64_t s : seq_lens) {
        MemoryRow r;
        r.seq_len = s;
        r.parameter_bytes = params;
        r.kv_bytes = memory_bytes(config, s, 2);
        r.activation_bytes = act;
        r.total_bytes = r.parameter_bytes + r.kv_bytes + r.activation_bytes;
        rows.push_back(r);
    }
    return rows;
}

double decision_overhead_share(const GenerationTrace& trace) {
    std::int64_t decision = 0;
    std::int64_t step = 0;
    for (const auto& r : trace.rows) {
        decision += r.decision_ns;
        step += r.step_ns;
    }
    if (step <= 0 || decision <= 0) return 0.0;
    return static_cast<double>(decision) / static_cast<double>(step);
}

}  // namespace river
