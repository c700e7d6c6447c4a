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

#include "river/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace river {

namespace {

double max_level(std::uint32_t bits) { return std::ldexp(1.0, static_cast<int>(bits) - 1) - 1.0; }

}  // namespace

void validate(const QuantConfig& q) {
    if (q.bits < 2 || q.bits > 8) {
        throw ConfigError("quant bits must be in [2, 8], got " + std::to_string(q.bits));
    }
    if (q.group_size < 1) throw ConfigError("quant group size must be >= 1");
}

RoundToNearestQuantizer::RoundToNearestQuantizer(QuantConfig config) : config_(config) {
    validate(config_);
}

std::vector<double> RoundToNearestQuantizer::group_scales(const Matrix& weights) const {
    const auto flat = weights.flat();
    const std::size_t g = config_.group_size;
    const double qmax = max_level(config_.bits);
    std::vector<double> scales;
    scales.reserve((flat.size() + g - 1) / g);
    for (std::size_t start = 0; start < flat.size(); start += g) {
        const std::size_t end = std::min(flat.size(), start + g);
        float amax = 0.0f;
        for (std::size_t i = start; i < end; ++i) amax = std::max(amax, std::fabs(flat[i]));
        scales.push_back(static_cast<double>(amax) / qmax);
    }
    return scales;
}

Matrix RoundToNearestQuantizer::quantize_dequantize(const Matrix& weights) const {
    Matrix out = weights;
    auto flat = out.flat();
    const std::size_t g = config_.group_size;
    const double qmax = max_level(config_.bits);
    for (std::size_t start = 0; start < flat.size(); start += g) {
        const std::size_t end = std::min(flat.size(), start + g);
        float amax = 0.0f;
        for (std::size_t i = start; i < end; ++i) amax = std::max(amax, std::fabs(flat[i]));
        if (amax == 0.0f) continue;
        const double scale = static_cast<double>(amax) / qmax;
        for (std::size_t i = start; i < end; ++i) {
            // x * qmax / amax rather than x / scale: exact for on-grid ratios
            // such as the half-way points that decide the rounding direction.
            const double level =
                std::clamp(std::round(static_cast<double>(flat[i]) * qmax / amax), -qmax, qmax);
            flat[i] = static_cast<float>(scale * level);
        }
    }
    return out;
}

std::uint64_t RoundToNearestQuantizer::storage_bytes(std::uint64_t elements) const {
    const std::uint64_t groups = (elements + config_.group_size - 1) / config_.group_size;
    return (elements * config_.bits + 7) / 8 + 2 * groups;
}

std::unique_ptr<WeightQuantizer> make_quantizer(const QuantConfig& q) {
    if (!q.enabled) return std::make_unique<IdentityQuantizer>();
    return std::make_unique<RoundToNearestQuantizer>(q);
}

Matrix quantize_dequantize(const Matrix& weights, const QuantConfig& q) {
    if (!q.enabled) throw ConfigError("quantize_dequantize called with quantization disabled");
    return RoundToNearestQuantizer(q).quantize_dequantize(weights);
}

}  // namespace river
