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

#include <omp.h>

#include <cmath>

#include "doctest.h"
#include "river/kernels.hpp"
#include "support/gen.hpp"
#include "support/reference_forward.hpp"

using namespace river;
using river::testing::Gen;

namespace {

std::vector<std::span<const float>> spans_of(const std::vector<Vector>& rows) {
    return {rows.begin(), rows.end()};
}

}  // namespace

TEST_CASE("matmul small cases") {
    const Matrix b(3, 2, std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(kernels::matmul(Matrix::identity(3), b) == b);

    const Matrix a(2, 3, std::vector<float>{1, -2, 3, 4, 5, -6});
    CHECK(kernels::matmul(a, Matrix(3, 4)) == Matrix(2, 4));

    const Matrix m(2, 2, std::vector<float>{1, 2, 3, 4});
    const Matrix v(2, 1, std::vector<float>{5, 6});
    CHECK(kernels::matmul(m, v) == Matrix(2, 1, std::vector<float>{17, 39}));
}

TEST_CASE("matmul rejects mismatched shapes") {
    CHECK_THROWS_AS(kernels::matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
    const Vector x(4);
    CHECK_THROWS_AS(kernels::vecmat(x, Matrix(3, 2)), DimensionError);
}

TEST_CASE("softmax examples") {
    const Vector half = kernels::softmax(Vector{0.0f, 0.0f});
    CHECK(half[0] == 0.5f);
    CHECK(half[1] == 0.5f);

    const Vector p = kernels::softmax(Vector{0.0f, static_cast<float>(std::log(3.0))});
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-6));

    CHECK_THROWS(kernels::softmax(Vector{}));
}

TEST_CASE("softmax is shift invariant and normalised") {
    for (std::uint64_t c = 0; c < 200; ++c) {
        Gen g(c);
        const Vector x = g.vec(g.size(1, 50), -10.0f, 10.0f);
        const float shift = g.real(-20.0f, 20.0f);
        Vector shifted(x);
        for (auto& v : shifted) v += shift;
        const Vector p = kernels::softmax(x), q = kernels::softmax(shifted);
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-5));
            CHECK(p[i] >= 0.0f);
            total += p[i];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("rms_norm examples") {
    const Vector ones4(4, 1.0f), ones2(2, 1.0f);
    CHECK(kernels::rms_norm(Vector(4, 0.0f), ones4, 0.0f) == Vector(4, 0.0f));
    CHECK(kernels::rms_norm(Vector(4, 0.0f), ones4, 1e-5f) == Vector(4, 0.0f));
    CHECK(kernels::rms_norm(Vector{2, 2, 2, 2}, ones4, 0.0f) == ones4);

    const Vector y = kernels::rms_norm(Vector{3, 4}, ones2, 0.0f);
    const double r = std::sqrt(12.5);
    CHECK(y[0] == doctest::Approx(3.0 / r).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(4.0 / r).epsilon(1e-6));
    CHECK(y[0] == doctest::Approx(0.8485).epsilon(1e-4));
    CHECK(y[1] == doctest::Approx(1.1314).epsilon(1e-4));
}

TEST_CASE("rope examples and norm preservation") {
    const Vector x{1.5f, -2.0f, 0.25f, 4.0f};
    CHECK(kernels::apply_rope(x, 0, 10000.0f) == x);

    const Vector r = kernels::apply_rope(Vector{1.0f, 0.0f}, 1, 10000.0f);
    CHECK(r[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-6));
    CHECK(r[1] == doctest::Approx(std::sin(1.0)).epsilon(1e-6));
    CHECK(r[0] == doctest::Approx(0.5403).epsilon(1e-4));
    CHECK(r[1] == doctest::Approx(0.8415).epsilon(1e-4));

    for (std::uint64_t c = 0; c < 200; ++c) {
        Gen g(1000 + c);
        const Vector v = g.vec(2 * g.size(1, 64));
        const Vector out = kernels::apply_rope(v, g.size(0, 100000), 10000.0f);
        double n0 = 0.0, n1 = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            n0 += double(v[i]) * v[i];
            n1 += double(out[i]) * out[i];
        }
        CHECK(std::sqrt(n1) == doctest::Approx(std::sqrt(n0)).epsilon(1e-6));
    }
}

TEST_CASE("cosine similarity examples") {
    CHECK(kernels::cosine_similarity(Vector{1, 0}, Vector{1, 0}) == 1.0f);
    CHECK(kernels::cosine_similarity(Vector{1, 0}, Vector{0, 1}) == 0.0f);
    CHECK(kernels::cosine_similarity(Vector{1, 2, 2}, Vector{2, 1, 2}) ==
          doctest::Approx(8.0 / 9.0).epsilon(1e-7));
    CHECK(kernels::cosine_similarity(Vector{0, 0}, Vector{1, 0}) == -1.0f);
}

TEST_CASE("cosine similarity is bounded, symmetric and exact on self") {
    for (std::uint64_t c = 0; c < 300; ++c) {
        Gen g(5000 + c);
        const std::size_t n = g.size(1, 128);
        const Vector a = g.vec(n, -100.0f, 100.0f), b = g.vec(n, -100.0f, 100.0f);
        const float s = kernels::cosine_similarity(a, b);
        CHECK(s >= -1.0f);
        CHECK(s <= 1.0f);
        CHECK(s == kernels::cosine_similarity(b, a));
        CHECK(kernels::cosine_similarity(a, a) == 1.0f);
    }
}

TEST_CASE("vecmat matches a plain-loop oracle") {
    for (std::uint64_t c = 0; c < 50; ++c) {
        Gen g(9000 + c);
        const Matrix w = g.mat(g.size(1, 200), g.size(1, 300));
        const Vector x = g.vec(w.rows());
        const Vector y = kernels::vecmat(x, w);
        const Vector ref = river::testing::ref_vecmat(x, w);
        for (std::size_t j = 0; j < y.size(); ++j) CHECK(y[j] == doctest::Approx(ref[j]).epsilon(1e-5));
    }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    // Oversubscribe so the parallel path splits work even on a single core.
    omp_set_num_threads(4);
    for (std::uint64_t c = 0; c < 30; ++c) {
        Gen g(12000 + c);
        const Matrix a = g.mat(g.size(1, 96), g.size(64, 260));
        const Matrix b = g.mat(a.cols(), g.size(128, 700));
        CHECK(kernels::matmul(a, b) == kernels::serial::matmul(a, b));

        const Vector x = g.vec(b.rows());
        CHECK(kernels::vecmat(x, b) == kernels::serial::vecmat(x, b));

        const std::size_t kv_heads = g.size(1, 4), group = g.size(1, 4), hd = 2 * g.size(1, 32);
        const kernels::AttentionShape shape{kv_heads * group, kv_heads, hd};
        std::vector<Vector> keys, values;
        for (std::size_t t = 0, n = g.size(0, 300); t < n; ++t) {
            keys.push_back(g.vec(kv_heads * hd));
            values.push_back(g.vec(kv_heads * hd));
        }
        const Vector q = g.vec(shape.n_heads * hd);
        const auto ks = spans_of(keys), vs = spans_of(values);
        CHECK(kernels::attention(q, ks, vs, shape) == kernels::serial::attention(q, ks, vs, shape));
    }
}

TEST_CASE("attention over one row returns that row's values per head group") {
    const kernels::AttentionShape shape{4, 2, 2};
    const std::vector<Vector> keys{{0.3f, -1.0f, 2.0f, 0.5f}};
    const std::vector<Vector> values{{1.0f, 2.0f, 3.0f, 4.0f}};
    const Vector q{1, 1, 1, 1, 1, 1, 1, 1};
    const Vector out = kernels::attention(q, spans_of(keys), spans_of(values), shape);
    CHECK(out == Vector{1, 2, 1, 2, 3, 4, 3, 4});

    const std::vector<Vector> none;
    CHECK(kernels::attention(q, spans_of(none), spans_of(none), shape) == Vector(8, 0.0f));
}

TEST_CASE("silu") {
    CHECK(kernels::silu(0.0f) == 0.0f);
    CHECK(kernels::silu(2.0f) == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))).epsilon(1e-6));
}
