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

#include "river/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace river::kernels {

namespace {

// Below these sizes the fork/join cost dominates; the region runs serially.
constexpr std::size_t kParallelVecmatWork = 1u << 15;
constexpr std::size_t kParallelAttentionWork = 1u << 14;
constexpr std::size_t kColumnAlign = 16;

void check_vecmat(std::span<const float> x, const Matrix& w) {
    if (x.size() != w.rows()) {
        throw DimensionError("vecmat: input length " + std::to_string(x.size()) +
                             " does not match matrix rows " + std::to_string(w.rows()));
    }
}

void check_matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + ")");
    }
}

// y[j0, j1) = x * w[:, j0, j1); i is the outer loop so each y_j sums in i order.
void vecmat_columns(std::span<const float> x, const Matrix& w, float* y, std::size_t j0,
                    std::size_t j1) {
    std::fill(y + j0, y + j1, 0.0f);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float xi = x[i];
        const float* wrow = w.row(i).data();
        for (std::size_t j = j0; j < j1; ++j) y[j] += xi * wrow[j];
    }
}

void check_attention(std::span<const float> q, std::span<const std::span<const float>> keys,
                     std::span<const std::span<const float>> values, const AttentionShape& s) {
    if (s.n_heads == 0 || s.n_kv_heads == 0 || s.head_dim == 0 || s.n_heads % s.n_kv_heads != 0) {
        throw DimensionError("attention: invalid head layout");
    }
    if (q.size() != s.n_heads * s.head_dim) throw DimensionError("attention: query size");
    if (keys.size() != values.size()) throw DimensionError("attention: key/value row counts differ");
    const std::size_t kv_width = s.n_kv_heads * s.head_dim;
    for (std::size_t r = 0; r < keys.size(); ++r) {
        if (keys[r].size() != kv_width || values[r].size() != kv_width) {
            throw DimensionError("attention: key/value row width");
        }
    }
}

void attention_head(std::size_t h, std::span<const float> q,
                    std::span<const std::span<const float>> keys,
                    std::span<const std::span<const float>> values, const AttentionShape& s,
                    float* out) {
    const std::size_t hd = s.head_dim;
    const std::size_t group = s.n_heads / s.n_kv_heads;
    const std::size_t kv_off = (h / group) * hd;
    const float* qh = q.data() + h * hd;
    float* oh = out + h * hd;
    std::fill(oh, oh + hd, 0.0f);
    if (keys.empty()) return;

    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    std::vector<float> scores(keys.size());
    for (std::size_t r = 0; r < keys.size(); ++r) {
        const float* k = keys[r].data() + kv_off;
        float dot = 0.0f;
        for (std::size_t i = 0; i < hd; ++i) dot += qh[i] * k[i];
        scores[r] = dot * scale;
    }
    const Vector probs = softmax(scores);
    for (std::size_t r = 0; r < values.size(); ++r) {
        const float* v = values[r].data() + kv_off;
        const float p = probs[r];
        for (std::size_t i = 0; i < hd; ++i) oh[i] += p * v[i];
    }
}

}  // namespace

namespace serial {

Vector vecmat(std::span<const float> x, const Matrix& w) {
    check_vecmat(x, w);
    Vector y(w.cols());
    vecmat_columns(x, w, y.data(), 0, w.cols());
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul(a, b);
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        vecmat_columns(a.row(i), b, c.row(i).data(), 0, b.cols());
    }
    return c;
}

Vector attention(std::span<const float> q, std::span<const std::span<const float>> keys,
                 std::span<const std::span<const float>> values, const AttentionShape& shape) {
    check_attention(q, keys, values, shape);
    Vector out(shape.n_heads * shape.head_dim);
    for (std::size_t h = 0; h < shape.n_heads; ++h) {
        attention_head(h, q, keys, values, shape, out.data());
    }
    return out;
}

}  // namespace serial

Vector vecmat(std::span<const float> x, const Matrix& w) {
    check_vecmat(x, w);
    Vector y(w.cols());
    const std::size_t cols = w.cols();
    float* out = y.data();
    // One contiguous column range per thread; partitioning never changes a column's sum order.
#pragma omp parallel if (w.size() >= kParallelVecmatWork)
    {
        const auto nt = static_cast<std::size_t>(omp_get_num_threads());
        const auto t = static_cast<std::size_t>(omp_get_thread_num());
        std::size_t chunk = (cols + nt - 1) / nt;
        chunk = (chunk + kColumnAlign - 1) / kColumnAlign * kColumnAlign;
        const std::size_t j0 = std::min(cols, t * chunk);
        const std::size_t j1 = std::min(cols, j0 + chunk);
        if (j0 < j1) vecmat_columns(x, w, out, j0, j1);
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_matmul(a, b);
    Matrix c(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.rows() * b.size() >= kParallelVecmatWork)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        vecmat_columns(a.row(i), b, c.row(i).data(), 0, b.cols());
    }
    return c;
}

Vector attention(std::span<const float> q, std::span<const std::span<const float>> keys,
                 std::span<const std::span<const float>> values, const AttentionShape& shape) {
    check_attention(q, keys, values, shape);
    Vector out(shape.n_heads * shape.head_dim);
    const auto heads = static_cast<std::ptrdiff_t>(shape.n_heads);
    const std::size_t work = shape.n_heads * shape.head_dim * keys.size();
#pragma omp parallel for schedule(static) if (work >= kParallelAttentionWork)
    for (std::ptrdiff_t h = 0; h < heads; ++h) {
        attention_head(static_cast<std::size_t>(h), q, keys, values, shape, out.data());
    }
    return out;
}

Vector softmax(std::span<const float> x) {
    if (x.empty()) throw DimensionError("softmax: empty input");
    const float max = *std::max_element(x.begin(), x.end());
    std::vector<double> e(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(static_cast<double>(x[i]) - static_cast<double>(max));
        sum += e[i];
    }
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(e[i] / sum);
    return y;
}

Vector rms_norm(std::span<const float> x, std::span<const float> gain, float eps) {
    if (x.size() != gain.size()) throw DimensionError("rms_norm: gain length mismatch");
    if (x.empty()) return {};
    double sum_sq = 0.0;
    for (float v : x) sum_sq += static_cast<double>(v) * v;
    const double denom = std::sqrt(sum_sq / static_cast<double>(x.size()) + eps);
    Vector y(x.size(), 0.0f);
    if (denom == 0.0) return y;
    const double inv = 1.0 / denom;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = static_cast<float>(static_cast<double>(gain[i]) * x[i] * inv);
    }
    return y;
}

Vector apply_rope(std::span<const float> x, std::size_t position, float base) {
    if (x.size() % 2 != 0) throw DimensionError("apply_rope: odd head dimension");
    Vector y(x.size());
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size() / 2; ++i) {
        const double theta =
            static_cast<double>(position) * std::pow(static_cast<double>(base), -2.0 * i / n);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double x0 = x[2 * i];
        const double x1 = x[2 * i + 1];
        y[2 * i] = static_cast<float>(x0 * c - x1 * s);
        y[2 * i + 1] = static_cast<float>(x0 * s + x1 * c);
    }
    return y;
}

float cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return -1.0f;
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): keeps cos(x, x) == 1 exactly.
    const double c = dot / std::sqrt(na * nb);
    return static_cast<float>(std::clamp(c, -1.0, 1.0));
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

}  // namespace river::kernels
