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

#include "river/exit_river.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "river/kernels.hpp"

namespace river {

const DecoderBlock& ExitRiver::mirror(std::size_t layer) const {
    if (layer < entry_layer || layer - entry_layer >= mirrors.size()) {
        throw ConfigError("exit river has no mirror for layer " + std::to_string(layer));
    }
    return mirrors[layer - entry_layer];
}

void validate_exit_params(const ModelConfig& config, std::size_t entry_layer, float tau) {
    if (entry_layer < 1 || entry_layer >= config.n_layers) {
        throw ConfigError("entry layer must be in [1, " + std::to_string(config.n_layers) +
                          "), got " + std::to_string(entry_layer));
    }
    if (!(tau >= -1.0f && tau <= 1.0f)) {
        throw ConfigError("tau must be in [-1, 1]");
    }
}

ExitRiver build_exit_river(const Model& model, std::size_t entry_layer, float tau,
                           const QuantConfig& quant) {
    return build_exit_river(model, entry_layer, tau, quant, *make_quantizer(quant));
}

ExitRiver build_exit_river(const Model& model, std::size_t entry_layer, float tau,
                           const QuantConfig& quant, const WeightQuantizer& quantizer) {
    validate_exit_params(model.config, entry_layer, tau);
    if (quant.enabled) validate(quant);
    ExitRiver river;
    river.entry_layer = entry_layer;
    river.tau = tau;
    river.quant = quant;
    for (std::size_t l = entry_layer; l < model.blocks.size(); ++l) {
        const DecoderBlock& src = model.blocks[l];
        DecoderBlock m;
        m.attn_norm = src.attn_norm;
        m.ffn_norm = src.ffn_norm;
        m.wq = quantizer.quantize_dequantize(src.wq);
        m.wk = quantizer.quantize_dequantize(src.wk);
        m.wv = quantizer.quantize_dequantize(src.wv);
        m.wo = quantizer.quantize_dequantize(src.wo);
        m.w_gate = quantizer.quantize_dequantize(src.w_gate);
        m.w_up = quantizer.quantize_dequantize(src.w_up);
        m.w_down = quantizer.quantize_dequantize(src.w_down);
        river.mirrors.push_back(std::move(m));
    }
    return river;
}

ExitDecision exit_decision(std::span<const Vector> h_prev, std::span<const Vector> h_curr,
                           float tau) {
    if (h_prev.empty() || h_prev.size() != h_curr.size()) {
        throw DimensionError("exit_decision: batch sizes must match and be non-empty");
    }
    ExitDecision d;
    d.similarities.reserve(h_prev.size());
    d.min_similarity = 1.0f;
    for (std::size_t b = 0; b < h_prev.size(); ++b) {
        const float s = kernels::cosine_similarity(h_prev[b], h_curr[b]);
        d.similarities.push_back(s);
        d.min_similarity = std::min(d.min_similarity, s);
    }
    d.exit = d.min_similarity > tau;
    return d;
}

std::vector<Vector> river_complete(const ExitRiver& river, const Model& model,
                                   std::span<const Vector> hidden,
                                   std::span<const std::size_t> positions, std::size_t from_layer,
                                   KvCache& cache) {
    const std::size_t L = model.config.n_layers;
    if (from_layer < river.entry_layer || from_layer >= L) {
        throw ConfigError("river_forward: from_layer " + std::to_string(from_layer) +
                          " outside [" + std::to_string(river.entry_layer) + ", " +
                          std::to_string(L) + ")");
    }
    if (hidden.size() != positions.size()) {
        throw DimensionError("river_forward: hidden/position counts differ");
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (i > 0 && positions[i] <= positions[i - 1]) {
            throw ConfigError("river_forward: positions must be strictly increasing");
        }
        for (std::size_t l = from_layer; l < L; ++l) {
            if (cache.present(l, positions[i])) {
                throw StateError("river_forward: layer " + std::to_string(l) +
                                 " already cached at position " + std::to_string(positions[i]));
            }
        }
    }
    std::vector<Vector> h(hidden.begin(), hidden.end());
    for (std::size_t l = from_layer; l < L; ++l) {
        const DecoderBlock& block = river.mirror(l);
        for (std::size_t i = 0; i < h.size(); ++i) {
            h[i] = block_forward(model.config, block, l, h[i], positions[i], cache, SourceTag::River);
        }
    }
    return h;
}

std::vector<Vector> river_forward(const ExitRiver& river, const Model& model,
                                  std::span<const Vector> hidden,
                                  std::span<const std::size_t> positions, std::size_t from_layer,
                                  KvCache& cache) {
    std::vector<Vector> h = river_complete(river, model, hidden, positions, from_layer, cache);
    for (auto& v : h) v = lm_head(model, v);
    return h;
}

Vector river_forward(const ExitRiver& river, const Model& model, const Vector& hidden,
                     std::size_t from_layer, std::size_t position, KvCache& cache) {
    const std::size_t pos[] = {position};
    return std::move(river_forward(river, model, std::span(&hidden, 1), pos, from_layer, cache)[0]);
}

}  // namespace river
