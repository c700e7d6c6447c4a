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
#include <memory>
#include <string_view>
#include <vector>

#include "river/tensor.hpp"

namespace river {

// Weight-only quantization settings for the exit river.
// Scheme is fixed: symmetric per-group, round half away from zero.
struct QuantConfig {
    bool enabled = true;
    std::uint32_t bits = 4;
    std::uint32_t group_size = 64;

    bool operator==(const QuantConfig&) const = default;
};

void validate(const QuantConfig& q);

// Seam for swapping in other post-training quantizers. Implementations
// return the dequantized fp32 matrix; compute stays in fp32.
class WeightQuantizer {
public:
    virtual ~WeightQuantizer() = default;

    virtual std::string_view name() const = 0;
    virtual Matrix quantize_dequantize(const Matrix& weights) const = 0;
    // Resident bytes for a matrix of `elements` weights, scales included.
    virtual std::uint64_t storage_bytes(std::uint64_t elements) const = 0;
};

// Symmetric round-to-nearest over groups of `group_size` consecutive
// row-major elements:
//   scale = max|x| / (2^(bits-1) - 1)
//   x'    = scale * clamp(round_half_away(x / scale), -qmax, qmax)
// A group whose elements are all zero is passed through unchanged.
class RoundToNearestQuantizer final : public WeightQuantizer {
public:
    explicit RoundToNearestQuantizer(QuantConfig config);

    std::string_view name() const override { return "rtn"; }
    Matrix quantize_dequantize(const Matrix& weights) const override;
    // bits/8 per weight plus one fp16 scale per group.
    std::uint64_t storage_bytes(std::uint64_t elements) const override;

    // Per-group scales of `weights` (0 for all-zero groups).
    std::vector<double> group_scales(const Matrix& weights) const;

    const QuantConfig& config() const noexcept { return config_; }

private:
    QuantConfig config_;
};

// Pass-through used when quantization is disabled; accounts fp16 storage.
class IdentityQuantizer final : public WeightQuantizer {
public:
    std::string_view name() const override { return "none"; }
    Matrix quantize_dequantize(const Matrix& weights) const override { return weights; }
    std::uint64_t storage_bytes(std::uint64_t elements) const override { return 2 * elements; }
};

std::unique_ptr<WeightQuantizer> make_quantizer(const QuantConfig& q);

// Convenience wrapper over RoundToNearestQuantizer. Requires q.enabled.
Matrix quantize_dequantize(const Matrix& weights, const QuantConfig& q);

}  // namespace river
