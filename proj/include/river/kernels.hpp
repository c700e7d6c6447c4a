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

#include <cstddef>
#include <span>
#include <vector>

#include "river/tensor.hpp"

// Dense fp32 kernels.
//
// Every kernel has a fixed accumulation order: each output element is a
// left-to-right sum over its inputs. The OpenMP versions in this namespace
// only split work across *independent* output elements (rows, columns,
// heads), so they are bit-identical to the single-threaded versions in
// `kernels::serial`, which are kept as the test reference and benchmark
// baseline.
namespace river::kernels {

struct AttentionShape {
    std::size_t n_heads = 0;
    std::size_t n_kv_heads = 0;
    std::size_t head_dim = 0;
};

// a[m x k] * b[k x n].
Matrix matmul(const Matrix& a, const Matrix& b);

// Row vector times matrix: x[in] * w[in x out] -> y[out].
Vector vecmat(std::span<const float> x, const Matrix& w);

// Causal attention of one query token over the given key/value rows.
// `q` holds n_heads * head_dim values; each key/value row holds
// n_kv_heads * head_dim values. Query head h reads kv head h / (n_heads / n_kv_heads).
// Rows are consumed in the order given; an empty row set yields zeros.
Vector attention(std::span<const float> q, std::span<const std::span<const float>> keys,
                 std::span<const std::span<const float>> values, const AttentionShape& shape);

// Max-subtracted softmax. Throws on empty input.
Vector softmax(std::span<const float> x);

// y_i = gain_i * x_i / sqrt(mean(x^2) + eps). An all-zero input maps to zeros
// even with eps = 0.
Vector rms_norm(std::span<const float> x, std::span<const float> gain, float eps);

// Rotates consecutive pairs (x[2i], x[2i+1]) by position * base^(-2i / n).
Vector apply_rope(std::span<const float> x, std::size_t position, float base);

// Cosine of the angle between a and b, clamped to [-1, 1].
// Returns -1 when either input has zero norm.
float cosine_similarity(std::span<const float> a, std::span<const float> b);

float silu(float x);

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);
Vector vecmat(std::span<const float> x, const Matrix& w);
Vector attention(std::span<const float> q, std::span<const std::span<const float>> keys,
                 std::span<const std::span<const float>> values, const AttentionShape& shape);

}  // namespace serial

}  // namespace river::kernels
