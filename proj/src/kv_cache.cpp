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

#include "river/kv_cache.hpp"

#include <algorithm>
#include <string>

namespace river {

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::Backbone: return "backbone";
        case SourceTag::River: return "river";
        case SourceTag::Propagated: return "propagated";
        case SourceTag::Recomputed: return "recomputed";
    }
    return "unknown";
}

KvCache::KvCache(const ModelConfig& config)
    : n_layers_(config.n_layers),
      max_positions_(config.max_positions),
      kv_dim_(config.kv_dim()),
      keys_(n_layers_ * max_positions_ * kv_dim_),
      values_(n_layers_ * max_positions_ * kv_dim_),
      presence_(n_layers_ * max_positions_, 0),
      tags_(n_layers_ * max_positions_, SourceTag::Backbone) {}

void KvCache::check_layer(std::size_t layer) const {
    if (layer >= n_layers_) {
        throw ConfigError("kv cache: layer " + std::to_string(layer) + " out of range");
    }
}

std::size_t KvCache::slot(std::size_t layer, std::size_t position) const {
    check_layer(layer);
    if (position >= max_positions_) {
        throw CapacityError("kv cache: position " + std::to_string(position) +
                            " exceeds capacity " + std::to_string(max_positions_));
    }
    return layer * max_positions_ + position;
}

void KvCache::append(std::size_t layer, std::size_t position, std::span<const float> key,
                     std::span<const float> value, SourceTag tag, WriteMode mode) {
    const std::size_t s = slot(layer, position);
    if (key.size() != kv_dim_ || value.size() != kv_dim_) {
        throw DimensionError("kv cache: key/value width mismatch");
    }
    if (presence_[s] && mode != WriteMode::Overwrite) {
        throw StateError("kv cache: slot (" + std::to_string(layer) + ", " +
                         std::to_string(position) + ") already written");
    }
    std::copy(key.begin(), key.end(), keys_.begin() + s * kv_dim_);
    std::copy(value.begin(), value.end(), values_.begin() + s * kv_dim_);
    presence_[s] = 1;
    tags_[s] = tag;
    seq_len_ = std::max(seq_len_, position + 1);
}

bool KvCache::present(std::size_t layer, std::size_t position) const {
    check_layer(layer);
    if (position >= max_positions_) return false;
    return presence_[layer * max_positions_ + position] != 0;
}

std::optional<SourceTag> KvCache::tag(std::size_t layer, std::size_t position) const {
    if (!present(layer, position)) return std::nullopt;
    return tags_[layer * max_positions_ + position];
}

std::span<const float> KvCache::key(std::size_t layer, std::size_t position) const {
    const std::size_t s = slot(layer, position);
    if (!presence_[s]) throw StateError("kv cache: read of absent key");
    return {keys_.data() + s * kv_dim_, kv_dim_};
}

std::span<const float> KvCache::value(std::size_t layer, std::size_t position) const {
    const std::size_t s = slot(layer, position);
    if (!presence_[s]) throw StateError("kv cache: read of absent value");
    return {values_.data() + s * kv_dim_, kv_dim_};
}

PresentRows KvCache::read_present(std::size_t layer, std::size_t up_to) const {
    check_layer(layer);
    if (up_to >= max_positions_) {
        throw CapacityError("kv cache: read beyond capacity");
    }
    PresentRows rows;
    rows.mask.assign(up_to + 1, false);
    const std::size_t base = layer * max_positions_;
    for (std::size_t p = 0; p <= up_to; ++p) {
        if (!presence_[base + p]) continue;
        rows.mask[p] = true;
        rows.positions.push_back(p);
        rows.keys.emplace_back(keys_.data() + (base + p) * kv_dim_, kv_dim_);
        rows.values.emplace_back(values_.data() + (base + p) * kv_dim_, kv_dim_);
    }
    return rows;
}

std::size_t IntegrityReport::total_absences() const {
    std::size_t n = 0;
    for (std::size_t a : absences_per_layer) n += a;
    return n;
}

IntegrityReport integrity_report(const KvCache& cache, std::size_t seq_len) {
    IntegrityReport r;
    r.seq_len = seq_len;
    r.absences_per_layer.assign(cache.n_layers(), 0);
    for (std::size_t l = 0; l < cache.n_layers(); ++l) {
        for (std::size_t p = 0; p < seq_len; ++p) {
            if (auto t = cache.tag(l, p)) {
                ++r.tag_counts[static_cast<std::size_t>(*t)];
            } else {
                ++r.absences_per_layer[l];
            }
        }
    }
    return r;
}

std::vector<std::size_t> absent_layers(const KvCache& cache, std::size_t position) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < cache.n_layers(); ++l) {
        if (!cache.present(l, position)) out.push_back(l);
    }
    return out;
}

std::uint64_t memory_bytes(const ModelConfig& config, std::uint64_t seq_len,
                           std::uint32_t kv_element_bytes) {
    if (kv_element_bytes != 2 && kv_element_bytes != 4) {
        throw ConfigError("memory_bytes: element size must be 2 or 4 bytes");
    }
    return 2ull * config.n_layers * config.n_kv_heads * config.head_dim * seq_len *
           kv_element_bytes;
}

}  // namespace river
