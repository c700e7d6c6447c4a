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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "river/model.hpp"

namespace river {

// Who wrote a cache entry. Metadata only: numerics never depend on it.
enum class SourceTag : std::uint8_t { Backbone = 0, River = 1, Propagated = 2, Recomputed = 3 };
inline constexpr std::size_t kSourceTagCount = 4;

std::string_view to_string(SourceTag tag);

enum class WriteMode { Append, Overwrite };

// Rows visible to attention at one layer over positions [0, up_to].
struct PresentRows {
    std::vector<bool> mask;                   // size up_to + 1
    std::vector<std::size_t> positions;       // present positions, ascending
    std::vector<std::span<const float>> keys;    // one row per present position
    std::vector<std::span<const float>> values;
};

// One preallocated K/V store shared by every writer (backbone blocks, river
// mirrors, strategy recovery paths), addressed by (layer, position).
// Presence is monotone: entries are never evicted.
class KvCache {
public:
    explicit KvCache(const ModelConfig& config);

    std::size_t n_layers() const noexcept { return n_layers_; }
    std::size_t max_positions() const noexcept { return max_positions_; }
    std::size_t kv_dim() const noexcept { return kv_dim_; }

    // Highest present position + 1 over all layers.
    std::size_t seq_len() const noexcept { return seq_len_; }

    void append(std::size_t layer, std::size_t position, std::span<const float> key,
                std::span<const float> value, SourceTag tag, WriteMode mode = WriteMode::Append);

    bool present(std::size_t layer, std::size_t position) const;
    std::optional<SourceTag> tag(std::size_t layer, std::size_t position) const;

    // Throw StateError when the slot is absent.
    std::span<const float> key(std::size_t layer, std::size_t position) const;
    std::span<const float> value(std::size_t layer, std::size_t position) const;

    PresentRows read_present(std::size_t layer, std::size_t up_to) const;

private:
    std::size_t slot(std::size_t layer, std::size_t position) const;
    void check_layer(std::size_t layer) const;

    std::size_t n_layers_;
    std::size_t max_positions_;
    std::size_t kv_dim_;
    std::size_t seq_len_ = 0;
    std::vector<float> keys_;
    std::vector<float> values_;
    std::vector<std::uint8_t> presence_;
    std::vector<SourceTag> tags_;
};

struct IntegrityReport {
    std::size_t seq_len = 0;
    std::vector<std::size_t> absences_per_layer;
    std::array<std::size_t, kSourceTagCount> tag_counts{};

    std::size_t total_absences() const;
    bool intact() const { return total_absences() == 0; }
};

IntegrityReport integrity_report(const KvCache& cache, std::size_t seq_len);

// Layers with no entry at `position`, ascending.
std::vector<std::size_t> absent_layers(const KvCache& cache, std::size_t position);

// Bytes of one full K/V set: 2 * L * n_kv_heads * head_dim * seq_len * element_bytes.
// element_bytes must be 2 (fp16 accounting) or 4.
std::uint64_t memory_bytes(const ModelConfig& config, std::uint64_t seq_len,
                           std::uint32_t kv_element_bytes);

}  // namespace river
