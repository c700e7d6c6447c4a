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

#include "river/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "river/engine.hpp"
#include "river/exit_river.hpp"
#include "river/model.hpp"
#include "river/report.hpp"
#include "river/strategies.hpp"

namespace river::cli {

namespace {

using nlohmann::json;

struct RiverFlags {
    std::size_t entry_layer = 1;
    std::uint32_t quant_bits = 4;
    std::uint32_t quant_group = 64;
    bool no_quant = false;
    std::size_t min_exit_layer = 0;

    QuantConfig quant() const { return {!no_quant, quant_bits, quant_group}; }
};

struct PromptFlags {
    std::string prompt;
    std::string prompt_file;
    std::size_t prompt_len = 8;
    std::uint64_t seed = 0;
};

struct OutputFlags {
    std::string trace;
    std::string summary;
    std::string heatmap;
};

std::shared_ptr<spdlog::logger> logger() {
    if (auto l = spdlog::get("river")) return l;
    auto l = spdlog::stderr_color_mt("river");
    const char* env = std::getenv("RIVER_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open output file: " + path);
    f << content;
    if (!f) throw IoError("failed writing output file: " + path);
}

void emit_json(const std::string& path, const json& j) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        std::cout << text;
    } else {
        write_file(path, text);
    }
}

std::vector<TokenId> parse_ids(const std::string& text, const std::string& origin) {
    std::string cleaned = text;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    std::vector<TokenId> ids;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size() || v > 0xffffffffull) throw std::invalid_argument(tok);
            ids.push_back(static_cast<TokenId>(v));
        } catch (const std::exception&) {
            throw ConfigError("invalid token id '" + tok + "' in " + origin);
        }
    }
    return ids;
}

std::vector<TokenId> resolve_prompt(const PromptFlags& flags, const ModelConfig& config) {
    if (!flags.prompt.empty() && !flags.prompt_file.empty()) {
        throw ConfigError("--prompt and --prompt-file are mutually exclusive");
    }
    std::vector<TokenId> ids;
    if (!flags.prompt_file.empty()) {
        std::ifstream f(flags.prompt_file);
        if (!f) throw IoError("cannot open prompt file: " + flags.prompt_file);
        const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        ids = parse_ids(text, flags.prompt_file);
    } else if (!flags.prompt.empty()) {
        ids = parse_ids(flags.prompt, "--prompt");
    } else {
        if (flags.prompt_len == 0) throw ConfigError("--prompt-len must be >= 1");
        std::mt19937_64 rng(flags.seed);
        for (std::size_t i = 0; i < flags.prompt_len; ++i) {
            ids.push_back(static_cast<TokenId>(rng() % config.vocab_size));
        }
    }
    if (ids.empty()) throw ConfigError("prompt is empty");
    for (TokenId t : ids) {
        if (t >= config.vocab_size) {
            throw ConfigError("prompt token " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(config.vocab_size));
        }
    }
    return ids;
}

void add_river_flags(CLI::App* app, RiverFlags& f) {
    app->add_option("--entry-layer", f.entry_layer, "First depth at which a token may exit");
    app->add_option("--quant-bits", f.quant_bits, "Exit river weight bits")->check(CLI::Range(2, 8));
    app->add_option("--quant-group", f.quant_group, "Exit river quantization group size")
        ->check(CLI::PositiveNumber);
    app->add_flag("--no-quant", f.no_quant, "Full-precision exit river (lossless mirror)");
    app->add_option("--min-exit-layer", f.min_exit_layer,
                    "Lowest exit depth for the mask strategy (0 = L/2)");
}

void add_prompt_flags(CLI::App* app, PromptFlags& f) {
    app->add_option("--prompt", f.prompt, "Inline prompt token ids, comma separated");
    app->add_option("--prompt-file", f.prompt_file, "File of whitespace/comma separated token ids");
    app->add_option("--prompt-len", f.prompt_len, "Length of the seeded random prompt");
    app->add_option("--seed", f.seed, "Seed for the random prompt");
}

std::unique_ptr<ExitRiver> maybe_build_river(const Model& model, const Strategy& strategy,
                                             const RiverFlags& flags, float tau) {
    if (strategy.kind != StrategyKind::River) return nullptr;
    return std::make_unique<ExitRiver>(
        build_exit_river(model, flags.entry_layer, tau, flags.quant()));
}

json quant_json(const QuantConfig& q) {
    return {{"enabled", q.enabled}, {"bits", q.bits}, {"group_size", q.group_size}};
}

// ---- gen-model --------------------------------------------------------------

struct GenModelFlags {
    std::string preset = "toy-8";
    std::uint32_t layers = 0, hidden = 0, heads = 0, kv_heads = 0, head_dim = 0, ffn = 0,
                  vocab = 0, max_positions = 0;
    std::uint64_t seed = 0;
    std::string out;
    const CLI::App* cmd = nullptr;
};

int cmd_gen_model(const GenModelFlags& f) {
    auto preset = find_preset(f.preset);
    if (!preset) throw ConfigError("unknown preset '" + f.preset + "'");
    ModelConfig c = *preset;
    auto override_field = [&f](std::uint32_t& field, std::uint32_t v, const char* flag) {
        if (f.cmd->count(flag) > 0) field = v;
    };
    override_field(c.n_layers, f.layers, "--layers");
    override_field(c.hidden_dim, f.hidden, "--hidden");
    override_field(c.n_heads, f.heads, "--heads");
    override_field(c.n_kv_heads, f.kv_heads, "--kv-heads");
    override_field(c.head_dim, f.head_dim, "--head-dim");
    override_field(c.ffn_dim, f.ffn, "--ffn");
    override_field(c.vocab_size, f.vocab, "--vocab");
    override_field(c.max_positions, f.max_positions, "--max-positions");
    if (f.cmd->count("--head-dim") == 0 && (f.cmd->count("--hidden") + f.cmd->count("--heads")) > 0) {
        c.head_dim = c.n_heads == 0 ? 0 : c.hidden_dim / c.n_heads;
    }
    validate(c);
    const Model model = generate_random_model(c, f.seed);
    save_model(model, f.out);
    const std::uint64_t params = count_parameters(c);
    std::cout << "parameters: " << params << "\n"
              << "bytes: " << encode_model(model).size() << "\n";
    return kOk;
}

// ---- run --------------------------------------------------------------------

struct RunFlags {
    std::string model;
    std::string strategy = "river";
    double tau = 0.5;
    std::size_t max_new = 32;
    bool shadow = false;
    RiverFlags river;
    PromptFlags prompt;
    OutputFlags out;
};

int cmd_run(const RunFlags& f) {
    const Model model = load_model(f.model);
    Strategy strategy = parse_strategy(f.strategy);
    strategy.min_exit_layer = f.river.min_exit_layer;
    const auto prompt = resolve_prompt(f.prompt, model.config);
    const ExitPolicy policy{f.river.entry_layer, static_cast<float>(f.tau)};
    const auto river = maybe_build_river(model, strategy, f.river, policy.tau);

    GenerateOptions opts;
    opts.record_logits = f.shadow;
    const GenerationRun run =
        generate(model, river.get(), strategy, prompt, f.max_new, policy, opts);

    json summary = {{"schema", report::kRunSchema},
                    {"strategy", to_string(strategy.kind)},
                    {"tau", f.tau},
                    {"entry_layer", f.river.entry_layer},
                    {"quant", quant_json(f.river.quant())},
                    {"prompt", prompt},
                    {"max_new", f.max_new}};
    if (strategy.kind == StrategyKind::KvMask) {
        summary["min_exit_layer"] = effective_min_exit(strategy, model.config);
    }
    summary.update(report::trace_summary_json(run.trace));
    summary["integrity"] = report::integrity_json(integrity_report(run.cache, run.trace.rows.size()));
    if (f.shadow) {
        const FidelityReport fid = fidelity_against_backbone(model, prompt, run);
        summary["fidelity"] = report::fidelity_json(fid);
        if (!f.out.heatmap.empty()) {
            write_file(f.out.heatmap + "_keys.csv", report::heatmap_csv(fid.keys));
            write_file(f.out.heatmap + "_values.csv", report::heatmap_csv(fid.values));
        }
    }
    if (!f.out.trace.empty()) write_file(f.out.trace, report::trace_csv(run.trace));
    emit_json(f.out.summary, summary);

    logger()->info("run: {} tokens in {:.3f} ms, decision overhead {:.4f}%", run.trace.rows.size(),
                   static_cast<double>(run.trace.wall_ns) / 1e6,
                   100.0 * decision_overhead_share(run.trace));
    return kOk;
}

// ---- compare ----------------------------------------------------------------

struct CompareFlags {
    std::string model;
    std::vector<std::string> strategies = {"full", "river", "recompute", "propagate", "mask", "mono"};
    std::vector<double> taus = {0.3, 0.5, 0.7, 0.9};
    std::size_t max_new = 32;
    RiverFlags river;
    PromptFlags prompt;
    OutputFlags out;
};

int cmd_compare(const CompareFlags& f) {
    const Model model = load_model(f.model);
    const auto prompt = resolve_prompt(f.prompt, model.config);
    std::vector<Strategy> strategies;
    for (const auto& name : f.strategies) {
        Strategy s = parse_strategy(name);
        s.min_exit_layer = f.river.min_exit_layer;
        strategies.push_back(s);
    }
    // Validate every cell up front so configuration errors surface before work starts.
    for (const auto& s : strategies) {
        for (double tau : f.taus) {
            const ExitPolicy policy{f.river.entry_layer, static_cast<float>(tau)};
            if (s.kind == StrategyKind::River) {
                validate_exit_params(model.config, policy.entry_layer, policy.tau);
                validate(f.river.quant());
            } else {
                validate(s, model.config, policy, nullptr);
            }
        }
    }

    // Cells are independent streams over a read-only model.
    std::vector<std::future<json>> cells;
    for (const auto& s : strategies) {
        for (double tau : f.taus) {
            cells.push_back(std::async(std::launch::async, [&model, &prompt, &f, s, tau] {
                const ExitPolicy policy{f.river.entry_layer, static_cast<float>(tau)};
                const auto river = maybe_build_river(model, s, f.river, policy.tau);
                GenerateOptions opts;
                opts.record_logits = true;
                const GenerationRun run =
                    generate(model, river.get(), s, prompt, f.max_new, policy, opts);
                const FidelityReport fid = fidelity_against_backbone(model, prompt, run);
                return json{{"strategy", to_string(s.kind)},
                            {"tau", tau},
                            {"cost_units", run.trace.cost_units()},
                            {"mean_exit_depth", run.trace.mean_exit_depth()},
                            {"kl", fid.mean_kl},
                            {"match_rate", fid.match_rate}};
            }));
        }
    }
    json matrix = json::array();
    for (auto& c : cells) matrix.push_back(c.get());
    emit_json(f.out.summary, {{"schema", report::kCompareSchema},
                              {"entry_layer", f.river.entry_layer},
                              {"quant", quant_json(f.river.quant())},
                              {"prompt", prompt},
                              {"max_new", f.max_new},
                              {"cells", matrix}});
    return kOk;
}

// ---- profile ----------------------------------------------------------------

struct ProfileFlags {
    std::string model;
    std::size_t max_new = 32;
    PromptFlags prompt;
    OutputFlags out;
};

int cmd_profile(const ProfileFlags& f) {
    const Model model = load_model(f.model);
    const auto prompt = resolve_prompt(f.prompt, model.config);
    const ProfileResult profile = profile_optimal_exit(model, prompt, f.max_new);
    if (!f.out.trace.empty()) write_file(f.out.trace, report::profile_csv(profile));
    emit_json(f.out.summary, report::profile_json(profile));
    return kOk;
}

// ---- mem-report -------------------------------------------------------------

struct MemFlags {
    std::string model;
    std::string preset = "llama3.1-8b-shape";
    std::string strategy = "full";
    std::size_t offload_depth = 0;
    std::vector<std::uint64_t> seq_lens = {4096, 8192, 16384, 32768, 65536};
    RiverFlags river;
    OutputFlags out;
};

int cmd_mem_report(const MemFlags& f) {
    ModelConfig config;
    if (!f.model.empty()) {
        config = load_model(f.model).config;
    } else {
        auto preset = find_preset(f.preset);
        if (!preset) throw ConfigError("unknown preset '" + f.preset + "'");
        config = *preset;
    }
    const Strategy strategy = parse_strategy(f.strategy);
    MemoryOptions opts;
    opts.with_river = strategy.kind == StrategyKind::River;
    opts.entry_layer = f.river.entry_layer;
    opts.quant = f.river.quant();
    opts.offload_depth = f.offload_depth;
    const auto rows = memory_report(config, f.seq_lens, opts);
    json j = report::memory_json(rows);
    j["strategy"] = to_string(strategy.kind);
    j["offload_depth"] = f.offload_depth;
    if (opts.with_river) {
        j["entry_layer"] = opts.entry_layer;
        j["quant"] = quant_json(opts.quant);
    }
    emit_json(f.out.summary, j);
    if (!f.out.summary.empty()) {
        for (const auto& r : j["rows"]) {
            std::cout << "seq " << r["seq_len"] << ": params " << r["parameter_gib"].get<double>()
                      << " GiB, kv " << r["kv_mib"].get<double>() << " MiB, total "
                      << r["total_gib"].get<double>() << " GiB\n";
        }
    }
    return kOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return kConfigError;
        case ErrorKind::Io: return kIoError;
        case ErrorKind::Capacity: return kCapacityError;
        case ErrorKind::State: return kInternalError;
    }
    return kInternalError;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"river: early-exit decoding benchmark with a KV-shared exit river", "river"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    GenModelFlags gen;
    auto* gen_cmd = app.add_subcommand("gen-model", "Write a seeded random model file");
    gen_cmd->add_option("--preset", gen.preset, "Architecture preset (toy-8, llama3.2-1b-shape, llama3.1-8b-shape)");
    gen.cmd = gen_cmd;
    struct Override {
        const char* flag;
        std::uint32_t* field;
        const char* help;
    };
    const Override overrides[] = {
        {"--layers", &gen.layers, "Number of decoder blocks"},
        {"--hidden", &gen.hidden, "Hidden width"},
        {"--heads", &gen.heads, "Query heads"},
        {"--kv-heads", &gen.kv_heads, "Key/value heads"},
        {"--head-dim", &gen.head_dim, "Per-head width (default hidden / heads when those change)"},
        {"--ffn", &gen.ffn, "FFN inner width"},
        {"--vocab", &gen.vocab, "Vocabulary size"},
        {"--max-positions", &gen.max_positions, "Context capacity"}};
    for (const auto& o : overrides) {
        gen_cmd->add_option(o.flag, *o.field, o.help)->default_str("preset");
    }
    gen_cmd->add_option("--seed", gen.seed, "Weight seed");
    gen_cmd->add_option("--model", gen.out, "Output model path")->required();

    RunFlags runf;
    auto* run_cmd = app.add_subcommand("run", "Generate with one strategy; write trace and summary");
    run_cmd->add_option("--model", runf.model, "Model file")->required();
    run_cmd->add_option("--strategy", runf.strategy, "full|river|recompute|propagate|mask|mono");
    run_cmd->add_option("--tau", runf.tau, "Exit threshold")->check(CLI::Range(-1.0, 1.0));
    run_cmd->add_option("--max-new", runf.max_new, "Tokens to generate");
    run_cmd->add_flag("--shadow", runf.shadow, "Compare against a teacher-forced backbone shadow");
    run_cmd->add_option("--out-trace", runf.out.trace, "Per-token trace CSV");
    run_cmd->add_option("--out-summary", runf.out.summary, "Summary JSON (stdout when empty)");
    run_cmd->add_option("--out-heatmap", runf.out.heatmap,
                        "Prefix for K/V similarity heatmap CSVs (needs --shadow)");
    add_river_flags(run_cmd, runf.river);
    add_prompt_flags(run_cmd, runf.prompt);

    CompareFlags cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Strategy x tau matrix of cost and fidelity");
    cmp_cmd->add_option("--model", cmp.model, "Model file")->required();
    cmp_cmd->add_option("--strategy", cmp.strategies, "Comma-separated strategies")->delimiter(',');
    cmp_cmd->add_option("--tau", cmp.taus, "Comma-separated thresholds")
        ->delimiter(',')
        ->check(CLI::Range(-1.0, 1.0));
    cmp_cmd->add_option("--max-new", cmp.max_new, "Tokens to generate per cell");
    cmp_cmd->add_option("--out-summary", cmp.out.summary, "Matrix JSON (stdout when empty)");
    add_river_flags(cmp_cmd, cmp.river);
    add_prompt_flags(cmp_cmd, cmp.prompt);

    ProfileFlags prof;
    auto* prof_cmd = app.add_subcommand("profile", "Optimal per-token exit depth of the backbone");
    prof_cmd->add_option("--model", prof.model, "Model file")->required();
    prof_cmd->add_option("--max-new", prof.max_new, "Continuation length");
    prof_cmd->add_option("--out-trace", prof.out.trace, "Per-token CSV");
    prof_cmd->add_option("--out-summary", prof.out.summary, "Histogram JSON (stdout when empty)");
    add_prompt_flags(prof_cmd, prof.prompt);

    MemFlags mem;
    auto* mem_cmd = app.add_subcommand("mem-report", "Peak memory accounting table");
    mem_cmd->add_option("--model", mem.model, "Take the architecture from a model file");
    mem_cmd->add_option("--preset", mem.preset, "Architecture preset when --model is absent");
    mem_cmd->add_option("--strategy", mem.strategy, "full (backbone only) or river (adds the exit river)");
    mem_cmd->add_option("--offload-depth", mem.offload_depth, "Deepest backbone blocks evicted (0 = none)");
    mem_cmd->add_option("--seq-lens", mem.seq_lens, "Comma-separated context lengths")->delimiter(',');
    mem_cmd->add_option("--out-summary", mem.out.summary, "Memory JSON (stdout when empty)");
    add_river_flags(mem_cmd, mem.river);

    // Show a default for every flag, including switches and optional paths.
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        for (CLI::Option* opt : sub->get_options()) {
            if (opt->get_name() == "--help" || opt->get_required() || !opt->get_default_str().empty()) {
                continue;
            }
            opt->default_str(opt->get_expected_max() == 0 ? "false" : "none");
        }
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*gen_cmd) return cmd_gen_model(gen);
        if (*run_cmd) return cmd_run(runf);
        if (*cmp_cmd) return cmd_compare(cmp);
        if (*prof_cmd) return cmd_profile(prof);
        if (*mem_cmd) return cmd_mem_report(mem);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternalError;
    }
    return kConfigError;
}

}  // namespace river::cli
