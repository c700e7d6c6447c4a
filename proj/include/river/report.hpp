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

#include <string>

#include "json.hpp"
#include "river/engine.hpp"
#include "river/kv_cache.hpp"

// Machine-readable outputs. Every writer is byte-deterministic for equal
// inputs; wall-clock fields are never serialized here.
namespace river::report {

inline constexpr const char* kRunSchema = "river.run.v1";
inline constexpr const char* kCompareSchema = "river.compare.v1";
inline constexpr const char* kProfileSchema = "river.profile.v1";
inline constexpr const char* kMemorySchema = "river.memory.v1";
inline constexpr const char* kFidelitySchema = "river.fidelity.v1";
inline constexpr const char* kIntegritySchema = "river.integrity.v1";

// position,in_id,out_id,exit_layer,s_min,backbone_blocks,river_blocks,recompute_units
std::string trace_csv(const GenerationTrace& trace);

// exit_layer,layer_0..layer_{L-1}; one row per exit layer with data, empty
// cells where no position contributed.
std::string heatmap_csv(const Heatmap& map);

// position,token,optimal_exit
std::string profile_csv(const ProfileResult& profile);

nlohmann::json integrity_json(const IntegrityReport& r);
nlohmann::json fidelity_json(const FidelityReport& r);
nlohmann::json heatmap_json(const Heatmap& map);
nlohmann::json memory_json(const std::vector<MemoryRow>& rows);
nlohmann::json profile_json(const ProfileResult& profile);
// Aggregates shared by run and compare outputs.
nlohmann::json trace_summary_json(const GenerationTrace& trace);

}  // namespace river::report
