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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "river/cli.hpp"
#include "river/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path tmp_dir() {
    const char* env = std::getenv("RIVER_TEST_TMP");
    fs::path dir = env ? fs::path(env) : fs::temp_directory_path() / "river_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string tmp(const std::string& name) { return (tmp_dir() / name).string(); }

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    const int code = river::cli::run(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

const std::string& toy_model() {
    static const std::string path = [] {
        const std::string p = tmp("toy.rvr");
        REQUIRE(invoke({"gen-model", "--preset", "toy-8", "--seed", "1", "--model", p}).code == 0);
        return p;
    }();
    return path;
}

json run_json(std::vector<std::string> args) {
    const Outcome o = invoke(std::move(args));
    REQUIRE_MESSAGE(o.code == 0, o.err);
    return json::parse(o.out);
}

std::vector<std::string> column(const std::string& csv, std::size_t index) {
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> out;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        for (std::size_t i = 0; i <= index; ++i) std::getline(row, cell, ',');
        out.push_back(cell);
    }
    return out;
}

}  // namespace

TEST_CASE("gen-model") {
    const std::string a = tmp("a.rvr"), b = tmp("b.rvr");
    const Outcome first = invoke({"gen-model", "--seed", "5", "--model", a});
    REQUIRE(first.code == 0);
    REQUIRE(invoke({"gen-model", "--seed", "5", "--model", b}).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(first.out.find("parameters: " +
                         std::to_string(river::count_parameters(*river::find_preset("toy-8")))) !=
          std::string::npos);
    CHECK(first.out.find("bytes: " + std::to_string(fs::file_size(a))) != std::string::npos);

    CHECK(invoke({"gen-model", "--layers", "0", "--model", tmp("bad.rvr")}).code == 2);
    CHECK(invoke({"gen-model", "--preset", "nope", "--model", tmp("bad.rvr")}).code == 2);
    CHECK(invoke({"gen-model", "--model", "/nonexistent_dir/x.rvr"}).code == 3);

    const std::string small = tmp("small.rvr");
    REQUIRE(invoke({"gen-model", "--layers", "2", "--hidden", "32", "--heads", "2", "--kv-heads", "1",
                    "--model", small})
                .code == 0);
    const river::Model m = river::load_model(small);
    CHECK(m.config.n_layers == 2);
    CHECK(m.config.head_dim == 16);
}

TEST_CASE("help prints defaults and unknown flags fail") {
    const Outcome help = invoke({"run", "--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("[0.5]") != std::string::npos);
    CHECK(help.out.find("--shadow [false]") != std::string::npos);
    CHECK(invoke({"run", "--model", toy_model(), "--bogus"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"launch"}).code == 2);
}

TEST_CASE("run summaries") {
    const json full = run_json({"run", "--model", toy_model(), "--strategy", "full", "--max-new", "16"});
    CHECK(full["schema"] == "river.run.v1");
    CHECK(full["mean_exit_depth"] == 8.0);
    CHECK(full["integrity"]["total_absences"] == 0);
    CHECK_FALSE(full.contains("fidelity"));

    const json early = run_json({"run", "--model", toy_model(), "--strategy", "river", "--tau", "-1",
                                 "--entry-layer", "3", "--max-new", "16"});
    CHECK(early["mean_exit_depth"] == 3.0);

    const json shadow = run_json({"run", "--model", toy_model(), "--strategy", "river", "--no-quant",
                                  "--tau", "0.97", "--max-new", "16", "--shadow"});
    CHECK(shadow["fidelity"]["match_rate"] == 1.0);
    CHECK(shadow["fidelity"]["schema"] == "river.fidelity.v1");
}

TEST_CASE("run writes trace and heatmap files") {
    const std::string trace = tmp("trace.csv"), summary = tmp("summary.json"), heat = tmp("heat");
    const Outcome o = invoke({"run", "--model", toy_model(), "--strategy", "mask", "--tau", "0.9",
                              "--prompt", "1,2,3", "--max-new", "8", "--shadow", "--out-trace", trace,
                              "--out-summary", summary, "--out-heatmap", heat});
    REQUIRE(o.code == 0);
    CHECK(o.out.empty());
    const std::string csv = slurp(trace);
    CHECK(csv.rfind("position,in_id,out_id,exit_layer,s_min,backbone_blocks,river_blocks,recompute_units\n", 0) == 0);
    CHECK(column(csv, 0).size() == 3 + 7);
    CHECK(column(csv, 2)[0] == "-1");
    const json s = json::parse(slurp(summary));
    CHECK(s["min_exit_layer"] == 4);
    CHECK(slurp(heat + "_keys.csv").rfind("exit_layer,layer_0", 0) == 0);
    CHECK(fs::exists(heat + "_values.csv"));
}

TEST_CASE("recompute at tau 1 emits the full backbone tokens") {
    const std::string a = tmp("full.csv"), b = tmp("rec.csv");
    REQUIRE(invoke({"run", "--model", toy_model(), "--strategy", "full", "--max-new", "24",
                    "--out-trace", a, "--out-summary", tmp("x.json")})
                .code == 0);
    REQUIRE(invoke({"run", "--model", toy_model(), "--strategy", "recompute", "--tau", "1",
                    "--max-new", "24", "--out-trace", b, "--out-summary", tmp("y.json")})
                .code == 0);
    CHECK(column(slurp(a), 2) == column(slurp(b), 2));
}

TEST_CASE("run outputs are byte-deterministic") {
    for (const char* strategy : {"river", "recompute", "mono"}) {
        std::string traces[2], summaries[2];
        for (int i = 0; i < 2; ++i) {
            const std::string t = tmp("det_trace" + std::to_string(i)),
                              s = tmp("det_summary" + std::to_string(i));
            REQUIRE(invoke({"run", "--model", toy_model(), "--strategy", strategy, "--tau", "0.97",
                            "--prompt-len", "6", "--seed", "3", "--max-new", "20", "--shadow",
                            "--out-trace", t, "--out-summary", s})
                        .code == 0);
            traces[i] = slurp(t);
            summaries[i] = slurp(s);
        }
        CHECK(traces[0] == traces[1]);
        CHECK(summaries[0] == summaries[1]);
    }
}

TEST_CASE("run error categories") {
    CHECK(invoke({"run", "--model", tmp("missing.rvr")}).code == 3);
    CHECK(invoke({"run", "--model", toy_model(), "--max-new", "100000"}).code == 4);
    CHECK(invoke({"run", "--model", toy_model(), "--strategy", "skip"}).code == 2);
    CHECK(invoke({"run", "--model", toy_model(), "--tau", "1.5"}).code == 2);
    CHECK(invoke({"run", "--model", toy_model(), "--entry-layer", "8"}).code == 2);
    CHECK(invoke({"run", "--model", toy_model(), "--prompt", "1,x"}).code == 2);
    CHECK(invoke({"run", "--model", toy_model(), "--prompt", "256"}).code == 2);
    CHECK(invoke({"run", "--model", toy_model(), "--prompt-file", tmp("no_prompt.txt")}).code == 3);
    const std::string garbage = tmp("garbage.rvr");
    std::ofstream(garbage) << "not a model";
    CHECK(invoke({"run", "--model", garbage}).code == 3);
}

TEST_CASE("prompt file") {
    const std::string p = tmp("prompt.txt");
    std::ofstream(p) << "4 8\n15, 16\n";
    const json s = run_json({"run", "--model", toy_model(), "--prompt-file", p, "--max-new", "2"});
    CHECK(s["prompt"] == json::array({4, 8, 15, 16}));
}

TEST_CASE("compare matrix") {
    const json c = run_json({"compare", "--model", toy_model(), "--strategy", "full,river,recompute",
                             "--tau", "0.99,0.98,0.97,0.95", "--max-new", "32"});
    CHECK(c["schema"] == "river.compare.v1");
    const auto& cells = c["cells"];
    REQUIRE(cells.size() == 12);
    CHECK(cells[0]["strategy"] == "full");
    CHECK(cells[4]["strategy"] == "river");
    CHECK(cells[5]["tau"] == 0.98);
    for (int i = 0; i < 4; ++i) {
        CHECK(cells[i]["kl"] == 0.0);
        CHECK(cells[i]["match_rate"] == 1.0);
    }
    for (int i = 5; i < 8; ++i) {
        CHECK(cells[i]["cost_units"].get<double>() < cells[i - 1]["cost_units"].get<double>());
    }

    const json lossless = run_json({"compare", "--model", toy_model(), "--strategy", "river",
                                    "--no-quant", "--tau", "-1,0,0.5,0.9,0.97", "--max-new", "24"});
    for (const auto& cell : lossless["cells"]) CHECK(cell["match_rate"] == 1.0);

    CHECK(invoke({"compare", "--model", toy_model(), "--strategy", "river,bogus"}).code == 2);
}

TEST_CASE("profile") {
    const json p = run_json({"profile", "--model", toy_model(), "--max-new", "20", "--out-trace",
                             tmp("profile.csv")});
    CHECK(p["schema"] == "river.profile.v1");
    CHECK(p["tokens"] == 20);
    std::size_t total = 0;
    for (const auto& v : p["histogram"]) total += v.get<std::size_t>();
    CHECK(total == 20);
    CHECK(column(slurp(tmp("profile.csv")), 0).size() == 20);
}

TEST_CASE("mem-report") {
    const json m = run_json({"mem-report"});
    CHECK(m["schema"] == "river.memory.v1");
    const double kv[] = {512, 1024, 2048, 4096, 8192};
    REQUIRE(m["rows"].size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(m["rows"][i]["kv_mib"] == kv[i]);
    CHECK(m["rows"][0]["parameter_gib"].get<double>() == doctest::Approx(14.96).epsilon(0.02 / 14.96));

    const json off = run_json({"mem-report", "--offload-depth", "32", "--seq-lens", "4096"});
    CHECK(off["rows"].size() == 1);
    CHECK(off["rows"][0]["parameter_gib"].get<double>() < 2.0);

    const json with_river = run_json({"mem-report", "--strategy", "river", "--entry-layer", "16"});
    CHECK(with_river["rows"][0]["parameter_bytes"].get<double>() >
          m["rows"][0]["parameter_bytes"].get<double>());

    const Outcome table = invoke({"mem-report", "--out-summary", tmp("mem.json")});
    CHECK(table.code == 0);
    CHECK(table.out.find("seq 4096") != std::string::npos);
    CHECK(invoke({"mem-report", "--offload-depth", "33"}).code == 2);
    CHECK(invoke({"mem-report", "--model", toy_model(), "--seq-lens", "16"}).code == 0);
}
