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

#include "river/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace river {

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'I', 'V', 'R'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model file I/O assumes a little-endian host");

struct Preset {
    std::string_view name;
    ModelConfig config;
};

constexpr std::array kPresets = {
    Preset{"toy-8", ModelConfig{8, 64, 4, 2, 16, 128, 256, 10000.0f, 1e-5f, 512}},
    Preset{"llama3.2-1b-shape",
           ModelConfig{16, 2048, 32, 8, 64, 8192, 128256, 500000.0f, 1e-5f, 131072}},
    Preset{"llama3.1-8b-shape",
           ModelConfig{32, 4096, 32, 8, 128, 14336, 128256, 500000.0f, 1e-5f, 131072}},
};

// Visits every tensor in canonical file order.
template <typename ModelT, typename VecFn, typename MatFn>
void for_each_tensor(ModelT& m, VecFn&& on_vec, MatFn&& on_mat) {
    on_mat(m.embedding);
    for (auto& b : m.blocks) {
        on_vec(b.attn_norm);
        on_mat(b.wq);
        on_mat(b.wk);
        on_mat(b.wv);
        on_mat(b.wo);
        on_vec(b.ffn_norm);
        on_mat(b.w_gate);
        on_mat(b.w_up);
        on_mat(b.w_down);
    }
    on_vec(m.final_norm);
    on_mat(m.head);
}

Model make_zero_model(const ModelConfig& c) {
    Model m;
    m.config = c;
    m.embedding = Matrix(c.vocab_size, c.hidden_dim);
    m.blocks.assign(c.n_layers, make_zero_block(c));
    m.final_norm.assign(c.hidden_dim, 1.0f);
    m.head = Matrix(c.hidden_dim, c.vocab_size);
    return m;
}

class ByteWriter {
public:
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void floats(std::span<const float> v) { raw(v.data(), v.size_bytes()); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& in) : in_(in) {}

    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        raw(&v, sizeof v, what);
        return v;
    }
    float f32(const char* what) {
        float v;
        raw(&v, sizeof v, what);
        return v;
    }
    void floats(std::span<float> v, const char* what) { raw(v.data(), v.size_bytes(), what); }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    void raw(void* p, std::size_t n, const char* what) {
        if (remaining() < n) {
            throw FormatError(FormatFault::Truncated,
                              std::string("model file truncated while reading ") + what);
        }
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

}  // namespace

void validate(const ModelConfig& c) {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(std::string("invalid model config: ") + msg);
    };
    require(c.n_layers >= 1, "n_layers must be >= 1");
    require(c.hidden_dim >= 1, "hidden_dim must be >= 1");
    require(c.n_heads >= 1, "n_heads must be >= 1");
    require(c.n_kv_heads >= 1, "n_kv_heads must be >= 1");
    require(c.head_dim >= 1, "head_dim must be >= 1");
    require(c.ffn_dim >= 1, "ffn_dim must be >= 1");
    require(c.vocab_size >= 1, "vocab_size must be >= 1");
    require(c.max_positions >= 1, "max_positions must be >= 1");
    require(c.n_heads % c.n_kv_heads == 0, "n_heads must be a multiple of n_kv_heads");
    require(std::uint64_t{c.n_heads} * c.head_dim == c.hidden_dim,
            "hidden_dim must equal n_heads * head_dim");
    require(c.head_dim % 2 == 0, "head_dim must be even for rotary embedding");
    require(std::isfinite(c.rope_base) && c.rope_base > 0.0f, "rope_base must be positive");
    require(std::isfinite(c.norm_eps) && c.norm_eps > 0.0f, "norm_eps must be positive");
}

std::optional<ModelConfig> find_preset(std::string_view name) {
    for (const auto& p : kPresets) {
        if (p.name == name) return p.config;
    }
    return std::nullopt;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& p : kPresets) names.emplace_back(p.name);
    return names;
}

std::uint64_t count_block_parameters(const ModelConfig& c) {
    const std::uint64_t d = c.hidden_dim;
    const std::uint64_t q = c.q_dim();
    const std::uint64_t kv = c.kv_dim();
    const std::uint64_t f = c.ffn_dim;
    return 2 * d + d * q + 2 * d * kv + q * d + 3 * d * f;
}

std::uint64_t count_parameters(const ModelConfig& c) {
    validate(c);
    const std::uint64_t d = c.hidden_dim;
    const std::uint64_t v = c.vocab_size;
    return v * d + c.n_layers * count_block_parameters(c) + d + d * v;
}

DecoderBlock make_zero_block(const ModelConfig& c) {
    DecoderBlock b;
    b.attn_norm.assign(c.hidden_dim, 1.0f);
    b.wq = Matrix(c.hidden_dim, c.q_dim());
    b.wk = Matrix(c.hidden_dim, c.kv_dim());
    b.wv = Matrix(c.hidden_dim, c.kv_dim());
    b.wo = Matrix(c.q_dim(), c.hidden_dim);
    b.ffn_norm.assign(c.hidden_dim, 1.0f);
    b.w_gate = Matrix(c.hidden_dim, c.ffn_dim);
    b.w_up = Matrix(c.hidden_dim, c.ffn_dim);
    b.w_down = Matrix(c.ffn_dim, c.hidden_dim);
    return b;
}

Model generate_random_model(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    Model m = make_zero_model(config);
    std::mt19937_64 rng(seed);
    auto draw = [&rng](float scale) {
        const double u = static_cast<double>(rng() >> 40) * 0x1.0p-24;
        return static_cast<float>((2.0 * u - 1.0) * scale);
    };
    const auto* embedding = &m.embedding;
    for_each_tensor(
        m, [](Vector&) {},
        [&](Matrix& w) {
            const float scale =
                &w == embedding ? 1.0f : 1.0f / std::sqrt(static_cast<float>(w.rows()));
            for (float& x : w.flat()) x = draw(scale);
        });
    return m;
}

std::vector<std::uint8_t> encode_model(const Model& model) {
    const ModelConfig& c = model.config;
    ByteWriter out;
    const std::uint32_t magic = std::bit_cast<std::uint32_t>(kMagic);
    out.u32(magic);
    out.u32(kFormatVersion);
    for (std::uint32_t v : {c.n_layers, c.hidden_dim, c.n_heads, c.n_kv_heads, c.head_dim,
                            c.ffn_dim, c.vocab_size, c.max_positions}) {
        out.u32(v);
    }
    out.f32(c.rope_base);
    out.f32(c.norm_eps);
    for_each_tensor(
        model, [&](const Vector& v) { out.floats(v); },
        [&](const Matrix& m) { out.floats(m.flat()); });
    return out.take();
}

Model decode_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader in(bytes);
    if (bytes.size() < kMagic.size() ||
        std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(FormatFault::BadMagic, "bad magic: not a RIVR model file");
    }
    in.u32("magic");
    const std::uint32_t version = in.u32("version");
    if (version != kFormatVersion) {
        throw FormatError(FormatFault::VersionMismatch,
                          "unsupported model format version " + std::to_string(version));
    }
    ModelConfig c;
    c.n_layers = in.u32("n_layers");
    c.hidden_dim = in.u32("hidden_dim");
    c.n_heads = in.u32("n_heads");
    c.n_kv_heads = in.u32("n_kv_heads");
    c.head_dim = in.u32("head_dim");
    c.ffn_dim = in.u32("ffn_dim");
    c.vocab_size = in.u32("vocab_size");
    c.max_positions = in.u32("max_positions");
    c.rope_base = in.f32("rope_base");
    c.norm_eps = in.f32("norm_eps");
    try {
        validate(c);
    } catch (const ConfigError& e) {
        throw FormatError(FormatFault::ShapeMismatch, e.what());
    }
    const std::uint64_t expected = count_parameters(c) * sizeof(float);
    if (in.remaining() < expected) {
        throw FormatError(FormatFault::Truncated, "model file truncated mid-tensor");
    }
    if (in.remaining() > expected) {
        throw FormatError(FormatFault::ShapeMismatch,
                          "model file has trailing bytes beyond the declared shapes");
    }
    Model m = make_zero_model(c);
    for_each_tensor(
        m, [&](Vector& v) { in.floats(v, "tensor"); },
        [&](Matrix& w) { in.floats(w.flat(), "tensor"); });
    return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    const auto bytes = encode_model(model);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open model file for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing model file: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace river
