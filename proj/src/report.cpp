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

#include "river/report.hpp"

#include <fmt/format.h>

namespace river::report {

using nlohmann::json;

std::string trace_csv(const GenerationTrace& trace) {
    std::string out =
        "position,in_id,out_id,exit_layer,s_min,backbone_blocks,river_blocks,recompute_units\n";
    for (const auto& r : trace.rows) {
        out += fmt::format("{},{},{},{},{:.9g},{},{},{}\n", r.position, r.in_id, r.out_id,
                           r.exit_layer, r.s_min, r.backbone_blocks, r.river_blocks,
                           r.recompute_units);
    }
    return out;
}

std::string heatmap_csv(const Heatmap& map) {
    std::string out = "exit_layer";
    for (std::size_t l = 0; l < map.n_layers; ++l) out += fmt::format(",layer_{}", l);
    out += '\n';
    for (std::size_t e = 0; e <= map.n_layers; ++e) {
        bool any = false;
        for (std::size_t l = 0; l < map.n_layers; ++l) any = any || map.mean(e, l).has_value();
        if (!any) continue;
        out += fmt::format("{}", e);
        for (std::size_t l = 0; l < map.n_layers; ++l) {
            const auto m = map.mean(e, l);
            out += m ? fmt::format(",{:.9g}", *m) : std::string(",");
        }
        out += '\n';
    }
    return out;
}

std::string profile_csv(const ProfileResult& profile) {
    std::string out = "position,token,optimal_exit\n";
    for (const auto& t : profile.tokens) {
        out += fmt::format("{},{},{}\n", t.position, t.token, t.optimal_exit);
    }
    return out;
}

json integrity_json(const IntegrityReport& r) {
    json tags = json::object();
    for (std::size_t t = 0; t < kSourceTagCount; ++t) {
        tags[std::string(to_string(static_cast<SourceTag>(t)))] = r.tag_counts[t];
    }
    return {{"schema", kIntegritySchema},
            {"seq_len", r.seq_len},
            {"absences_per_layer", r.absences_per_layer},
            {"total_absences", r.total_absences()},
            {"tag_histogram", tags}};
}

json heatmap_json(const Heatmap& map) {
    json rows = json::array();
    for (std::size_t e = 0; e <= map.n_layers; ++e) {
        json cells = json::array();
        bool any = false;
        for (std::size_t l = 0; l < map.n_layers; ++l) {
            const auto m = map.mean(e, l);
            any = any || m.has_value();
            cells.push_back(m ? json(*m) : json(nullptr));
        }
        if (any) rows.push_back({{"exit_layer", e}, {"mean_cosine", cells}});
    }
    return rows;
}

json fidelity_json(const FidelityReport& r) {
    return {{"schema", kFidelitySchema},
            {"mean_kl", r.mean_kl},
            {"match_rate", r.match_rate},
            {"compared_tokens", r.compared},
            {"key_similarity", heatmap_json(r.keys)},
            {"value_similarity", heatmap_json(r.values)}};
}

json memory_json(const std::vector<MemoryRow>& rows) {
    constexpr double kMiB = 1024.0 * 1024.0;
    constexpr double kGiB = kMiB * 1024.0;
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"seq_len", r.seq_len},
                       {"parameter_bytes", r.parameter_bytes},
                       {"kv_bytes", r.kv_bytes},
                       {"activation_bytes", r.activation_bytes},
                       {"total_bytes", r.total_bytes},
                       {"parameter_gib", static_cast<double>(r.parameter_bytes) / kGiB},
                       {"kv_mib", static_cast<double>(r.kv_bytes) / kMiB},
                       {"activation_mib", static_cast<double>(r.activation_bytes) / kMiB},
                       {"total_gib", static_cast<double>(r.total_bytes) / kGiB}});
    }
    return {{"schema", kMemorySchema}, {"rows", arr}};
}

json profile_json(const ProfileResult& profile) {
    double mean = 0.0;
    for (const auto& t : profile.tokens) mean += static_cast<double>(t.optimal_exit);
    if (!profile.tokens.empty()) mean /= static_cast<double>(profile.tokens.size());
    return {{"schema", kProfileSchema},
            {"tokens", profile.tokens.size()},
            {"mean_optimal_exit", mean},
            {"histogram", profile.histogram}};
}

json trace_summary_json(const GenerationTrace& trace) {
    return {{"n_layers", trace.n_layers},
            {"tokens_processed", trace.rows.size()},
            {"generated", trace.generated},
            {"prefill_depth", trace.prefill_depth},
            {"mean_exit_depth", trace.mean_exit_depth()},
            {"exit_histogram", trace.exit_histogram()},
            {"cost_units", trace.cost_units()},
            {"river_cost_factor", trace.river_cost_factor},
            {"backbone_blocks", trace.total_backbone_blocks()},
            {"river_blocks", trace.total_river_blocks()},
            {"recompute_units", trace.total_recompute_units()}};
}

}  // namespace river::report
