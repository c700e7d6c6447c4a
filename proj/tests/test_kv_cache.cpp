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

#include "doctest.h"
#include "river/kv_cache.hpp"
#include "support/gen.hpp"

using namespace river;

namespace {

ModelConfig cfg() {
    ModelConfig c = *find_preset("toy-8");
    c.max_positions = 16;
    return c;
}

Vector filled(std::size_t n, float v) { return Vector(n, v); }

}  // namespace

TEST_CASE("append then read round trips") {
    const ModelConfig c = cfg();
    KvCache cache(c);
    river::testing::Gen g(1);
    const Vector k = g.vec(c.kv_dim()), v = g.vec(c.kv_dim());
    cache.append(3, 5, k, v, SourceTag::River);
    CHECK(cache.present(3, 5));
    CHECK(cache.tag(3, 5) == SourceTag::River);
    CHECK(Vector(cache.key(3, 5).begin(), cache.key(3, 5).end()) == k);
    CHECK(Vector(cache.value(3, 5).begin(), cache.value(3, 5).end()) == v);
    CHECK(cache.seq_len() == 6);
    CHECK_FALSE(cache.tag(3, 4).has_value());
    CHECK_THROWS_AS(cache.key(3, 4), StateError);
}

TEST_CASE("double write needs overwrite mode") {
    const ModelConfig c = cfg();
    KvCache cache(c);
    cache.append(0, 0, filled(c.kv_dim(), 1), filled(c.kv_dim(), 2), SourceTag::River);
    CHECK_THROWS_AS(
        cache.append(0, 0, filled(c.kv_dim(), 3), filled(c.kv_dim(), 4), SourceTag::Backbone),
        StateError);
    cache.append(0, 0, filled(c.kv_dim(), 5), filled(c.kv_dim(), 6), SourceTag::Recomputed,
                 WriteMode::Overwrite);
    CHECK(cache.tag(0, 0) == SourceTag::Recomputed);
    CHECK(cache.key(0, 0)[0] == 5.0f);
    CHECK(cache.value(0, 0)[0] == 6.0f);
}

TEST_CASE("capacity and shape errors") {
    const ModelConfig c = cfg();
    KvCache cache(c);
    CHECK_THROWS_AS(cache.append(0, c.max_positions, filled(c.kv_dim(), 0), filled(c.kv_dim(), 0),
                                 SourceTag::Backbone),
                    CapacityError);
    CHECK_THROWS_AS(cache.append(c.n_layers, 0, filled(c.kv_dim(), 0), filled(c.kv_dim(), 0),
                                 SourceTag::Backbone),
                    ConfigError);
    CHECK_THROWS_AS(cache.append(0, 0, filled(c.kv_dim() - 1, 0), filled(c.kv_dim(), 0),
                                 SourceTag::Backbone),
                    DimensionError);
}

TEST_CASE("read_present masks") {
    const ModelConfig c = cfg();
    KvCache cache(c);
    const PresentRows fresh = cache.read_present(1, 4);
    CHECK(fresh.mask == std::vector<bool>(5, false));
    CHECK(fresh.keys.empty());

    for (std::size_t p = 0; p < 4; ++p) {
        cache.append(2, p, filled(c.kv_dim(), float(p)), filled(c.kv_dim(), -float(p)),
                     SourceTag::Backbone);
    }
    const PresentRows four = cache.read_present(2, 3);
    CHECK(four.keys.size() == 4);
    CHECK(four.positions == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(four.values[3][0] == -3.0f);

    KvCache mixed(c);
    mixed.append(4, 0, filled(c.kv_dim(), 10), filled(c.kv_dim(), 11), SourceTag::Backbone);
    mixed.append(4, 2, filled(c.kv_dim(), 12), filled(c.kv_dim(), 13), SourceTag::Propagated);
    const PresentRows rows = mixed.read_present(4, 2);
    CHECK(rows.mask == std::vector<bool>{true, false, true});
    CHECK(rows.positions == std::vector<std::size_t>{0, 2});
    CHECK(rows.keys[1][0] == 12.0f);
}

TEST_CASE("integrity report and absent layers") {
    const ModelConfig c = cfg();
    KvCache cache(c);
    const std::size_t exit_at = 3;
    for (std::size_t p = 0; p < 3; ++p) {
        const std::size_t depth = p == 1 ? exit_at : c.n_layers;
        for (std::size_t l = 0; l < depth; ++l) {
            cache.append(l, p, filled(c.kv_dim(), 0), filled(c.kv_dim(), 0), SourceTag::Backbone);
        }
    }
    const IntegrityReport r = integrity_report(cache, 3);
    CHECK(r.total_absences() == c.n_layers - exit_at);
    CHECK_FALSE(r.intact());
    for (std::size_t l = 0; l < c.n_layers; ++l) CHECK(r.absences_per_layer[l] == (l >= exit_at ? 1u : 0u));
    CHECK(r.tag_counts[0] == 3 * c.n_layers - (c.n_layers - exit_at));
    CHECK(absent_layers(cache, 1) == std::vector<std::size_t>{3, 4, 5, 6, 7});
    CHECK(absent_layers(cache, 0).empty());
    CHECK(integrity_report(KvCache(c), 0).intact());
}

TEST_CASE("kv memory bytes") {
    const ModelConfig big = *find_preset("llama3.1-8b-shape");
    CHECK(memory_bytes(big, 4096, 2) == 536870912ull);
    CHECK(memory_bytes(big, 8192, 2) == 1024ull * 1024 * 1024);
    CHECK(memory_bytes(big, 0, 2) == 0);
    CHECK(memory_bytes(big, 4096, 4) == 2 * 536870912ull);
    CHECK_THROWS_AS(memory_bytes(big, 4096, 3), ConfigError);
}

TEST_CASE("source tag names") {
    CHECK(to_string(SourceTag::Backbone) == "backbone");
    CHECK(to_string(SourceTag::River) == "river");
    CHECK(to_string(SourceTag::Propagated) == "propagated");
    CHECK(to_string(SourceTag::Recomputed) == "recomputed");
}
