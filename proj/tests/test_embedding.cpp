// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "doctest.h"

#include "emsq/data.hpp"
#include "emsq/embedding.hpp"
#include "emsq/rng.hpp"
#include "emsq/svd.hpp"

using namespace emsq;

namespace {

EmbeddingTable random_table(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    EmbeddingTable t;
    t.weights = DenseMatrix(rows, cols);
    for (std::size_t i = 0; i < t.weights.size(); ++i) {
        t.weights.data()[i] = rng.uniform(-1.0, 1.0);
    }
    return t;
}

}  // namespace

TEST_CASE("choose_rank follows the parameter budget") {
    CHECK(choose_rank(0.5, 300, 300).k == 75);
    CHECK(choose_rank(0.1, 10000, 300).k == 29);
    CHECK(choose_rank(0.1, 200, 50).k == 4);
    CHECK(choose_rank(0.1, 500, 64).k == 5);
    // Budget floor: tiny fractions clamp to rank 1.
    CHECK(choose_rank(0.001, 10, 10).k == 1);
    CHECK_THROWS_AS(choose_rank(0.0, 10, 10), std::invalid_argument);
    CHECK_THROWS_AS(choose_rank(1.5, 10, 10), std::invalid_argument);

    const CompressionPlan plan = choose_rank(0.1, 500, 64);
    CHECK(plan.factored_params() == 5u * 564u);
    CHECK(plan.original_params() == 32000u);
    CHECK(plan.r_pct == doctest::Approx(0.9));
}

TEST_CASE("chosen rank never exceeds the retained parameter budget") {
    Rng rng(40);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 2 + rng.next_below(200);
        const std::size_t n = 2 + rng.next_below(200);
        const double p = rng.uniform(0.01, 1.0);
        const CompressionPlan plan = choose_rank(p, m, n);
        CHECK(plan.k >= 1);
        if (plan.k > 1) {
            CHECK(static_cast<double>(plan.factored_params()) <=
                  p * static_cast<double>(plan.original_params()) + 1e-9);
        }
    }
}

TEST_CASE("factorize splits into U and Sigma Vt factors") {
    EmbeddingTable table = random_table(30, 12, 7);
    FactorizedEmbedding f = factorize(table, 0.5);
    const CompressionPlan plan = choose_rank(0.5, 30, 12);
    CHECK(f.k == plan.k);
    CHECK(f.w_a.rows() == 30);
    CHECK(f.w_a.cols() == f.k);
    CHECK(f.w_b.rows() == f.k);
    CHECK(f.w_b.cols() == 12);

    // w_a carries orthonormal columns; w_b carries the scale.
    DenseMatrix gram = matmul(f.w_a.transpose(), f.w_a);
    CHECK(max_abs_diff(gram, DenseMatrix::identity(f.k)) <= 1e-10);
}

TEST_CASE("factorizing a low rank table at matching rank is lossless") {
    const std::size_t m = 40, n = 16, r = 3;
    EmbeddingTable a = random_table(m, r, 50);
    EmbeddingTable b = random_table(r, n, 51);
    EmbeddingTable table;
    table.weights = matmul(a.weights, b.weights);

    // Pick p so the rank budget lands exactly on r.
    const double p = (static_cast<double>(r) + 0.5) * (m + n) / (m * n);
    REQUIRE(choose_rank(p, m, n).k == r);
    FactorizedEmbedding f = factorize(table, p);
    DenseMatrix approx = matmul(f.w_a, f.w_b);
    CHECK(max_abs_diff(approx, table.weights) <= 1e-10);

    for (std::size_t tok = 0; tok < m; ++tok) {
        const auto effective = f.effective_lookup(tok);
        const auto original = table.lookup(tok);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(std::abs(effective[j] - original[j]) <= 1e-10);
        }
    }
}

TEST_CASE("factorization error shrinks as p grows") {
    EmbeddingTable table = random_table(50, 20, 8);
    double prev = 1e300;
    for (const double p : {0.1, 0.3, 0.6, 1.0}) {
        FactorizedEmbedding f = factorize(table, p);
        DenseMatrix approx = matmul(f.w_a, f.w_b);
        DenseMatrix resid = table.weights;
        resid.axpy(-1.0, approx);
        const double err = frobenius_norm(resid);
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
}

TEST_CASE("offline compression keeps the top singular energy in k columns") {
    EmbeddingTable table = random_table(40, 10, 9);
    EmbeddingTable low = offline_compress(table, 0.4);
    const CompressionPlan plan = choose_rank(0.4, 40, 10);
    CHECK(low.vocab_size() == 40);
    CHECK(low.dim() == plan.k);

    // The output norm must equal the kept share of the spectrum energy.
    EmbeddingTable full = offline_compress(table, 1.0);
    CHECK(full.dim() == choose_rank(1.0, 40, 10).k);
    SvdResult s = svd(table.weights);
    double full_energy = 0.0;
    for (const double v : s.sigma) full_energy += v * v;
    double kept = 0.0;
    for (std::size_t i = 0; i < low.dim(); ++i) kept += s.sigma[i] * s.sigma[i];
    CHECK(frobenius_norm(low.weights) ==
          doctest::Approx(std::sqrt(kept)).epsilon(1e-8));
    CHECK(frobenius_norm(table.weights) ==
          doctest::Approx(std::sqrt(full_energy)).epsilon(1e-8));
}

TEST_CASE("random_init is seeded and scale bounded") {
    EmbeddingTable a = random_init(20, 8, 3);
    EmbeddingTable b = random_init(20, 8, 3);
    EmbeddingTable c = random_init(20, 8, 4);
    CHECK(a.weights == b.weights);
    CHECK(a.weights != c.weights);
    const double bound = 0.5 / 8;
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        CHECK(std::abs(a.weights.data()[i]) <= bound);
    }
}

TEST_CASE("glove loader fills found rows and randomizes the rest") {
    Vocabulary vocab;
    vocab.add("alpha");
    vocab.add("beta");
    const std::string path =
        (std::filesystem::temp_directory_path() / "emsq_glove.txt").string();
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "alpha 1.0 2.0\n";
        out << "gamma 5.0 6.0\n";
        out << "beta 3.0 4.0\n";
    }
    GloveLoad g = load_glove_text(path, vocab, 0);
    CHECK(g.table.vocab_size() == 3);
    CHECK(g.table.dim() == 2);
    CHECK(g.found == 2);
    CHECK(g.coverage == doctest::Approx(2.0 / 3.0));
    const std::size_t alpha = static_cast<std::size_t>(vocab.lookup("alpha"));
    const std::size_t beta = static_cast<std::size_t>(vocab.lookup("beta"));
    CHECK(g.table.weights(alpha, 0) == 1.0);
    CHECK(g.table.weights(alpha, 1) == 2.0);
    CHECK(g.table.weights(beta, 0) == 3.0);
    CHECK(g.table.weights(beta, 1) == 4.0);
    // The UNK row is random init, bounded by 0.5/dim.
    CHECK(std::abs(g.table.weights(0, 0)) <= 0.25);
    std::remove(path.c_str());
}

TEST_CASE("glove loader keeps the last duplicate and rejects ragged rows") {
    Vocabulary vocab;
    vocab.add("tok");
    const std::string path =
        (std::filesystem::temp_directory_path() / "emsq_glove2.txt").string();
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "tok 1.0 1.0\n";
        out << "tok 9.0 9.0\n";
    }
    GloveLoad g = load_glove_text(path, vocab, 0);
    CHECK(g.table.weights(1, 0) == 9.0);

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "tok 1.0 1.0\n";
        out << "other 2.0\n";
    }
    CHECK_THROWS_AS(load_glove_text(path, vocab, 0), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("embedding layer variant reports shape for both forms") {
    EmbeddingTable table = random_table(10, 6, 1);
    EmbeddingLayer plain{table};
    CHECK(embedding_vocab_size(plain) == 10);
    CHECK(embedding_output_dim(plain) == 6);
    CHECK_FALSE(embedding_is_factorized(plain));

    EmbeddingLayer fact{factorize(table, 0.5)};
    CHECK(embedding_vocab_size(fact) == 10);
    CHECK(embedding_output_dim(fact) == 6);
    CHECK(embedding_is_factorized(fact));
}
