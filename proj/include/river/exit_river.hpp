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

#include <span>
#include <vector>

#include "river/forward.hpp"
#include "river/kv_cache.hpp"
#include "river/model.hpp"
#include "river/quantizer.hpp"

namespace river {

// Accounting cost of one river block relative to one backbone block: the
// reciprocal of the 2.4x W4A16 throughput gain.
inline constexpr double kDefaultRiverCostFactor = 1.0 / 2.4;

// Quantized mirrors of backbone blocks [entry_layer, L). Mirror for layer l
// writes cache layer l, the same address the backbone block would use, so
// a token that leaves the backbone at depth e still fills layers e..L-1.
struct ExitRiver {
    std::size_t entry_layer = 1;
    float tau = 0.5f;
    double cost_factor = kDefaultRiverCostFactor;
    QuantConfig quant;
    std::vector<DecoderBlock> mirrors;  // mirrors[i] mirrors backbone layer entry_layer + i

    const DecoderBlock& mirror(std::size_t layer) const;
};

void validate_exit_params(const ModelConfig& config, std::size_t entry_layer, float tau);

// Copies the backbone blocks from entry_layer on and quantizes their seven
// projection matrices; norm gains stay in full precision.
ExitRiver build_exit_river(const Model& model, std::size_t entry_layer, float tau,
                           const QuantConfig& quant);
ExitRiver build_exit_river(const Model& model, std::size_t entry_layer, float tau,
                           const QuantConfig& quant, const WeightQuantizer& quantizer);

struct ExitDecision {
    bool exit = false;
    float min_similarity = -1.0f;
    std::vector<float> similarities;  // one per batch item
};

// Exit iff min over the batch of cos(h_prev_b, h_curr_b) is strictly greater than tau.
ExitDecision exit_decision(std::span<const Vector> h_prev, std::span<const Vector> h_curr,
                           float tau);

// Runs mirror blocks from_layer..L-1 for each item (tag River), layer-major so
// that items at increasing positions see each other causally. Returns the
// final hidden states. Positions must be strictly increasing.
std::vector<Vector> river_complete(const ExitRiver& river, const Model& model,
                                   std::span<const Vector> hidden,
                                   std::span<const std::size_t> positions, std::size_t from_layer,
                                   KvCache& cache);

// river_complete followed by the shared LM head.
std::vector<Vector> river_forward(const ExitRiver& river, const Model& model,
                                  std::span<const Vector> hidden,
                                  std::span<const std::size_t> positions, std::size_t from_layer,
                                  KvCache& cache);

Vector river_forward(const ExitRiver& river, const Model& model, const Vector& hidden,
                     std::size_t from_layer, std::size_t position, KvCache& cache);

}  // namespace river
