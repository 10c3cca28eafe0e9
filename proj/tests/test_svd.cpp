// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "emsq/matrix.hpp"
#include "emsq/rng.hpp"
#include "emsq/svd.hpp"

using namespace emsq;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform(-1.0, 1.0);
    }
    return m;
}

double orthonormality_residual(const DenseMatrix& cols_matrix) {
    DenseMatrix gram = matmul(cols_matrix.transpose(), cols_matrix);
    return max_abs_diff(gram, DenseMatrix::identity(gram.rows()));
}

}  // namespace

TEST_CASE("svd reconstructs a fixed small matrix") {
    DenseMatrix w{{4.0, 0.0}, {3.0, -5.0}};
    SvdResult s = svd(w);
    CHECK(s.sigma.size() == 2);
    CHECK(s.sigma[0] >= s.sigma[1]);
    CHECK(s.sigma[1] >= 0.0);
    CHECK(max_abs_diff(svd_reconstruct(s), w) <= 1e-12);
    CHECK(orthonormality_residual(s.u) <= 1e-12);
    CHECK(orthonormality_residual(s.vt.transpose()) <= 1e-12);
}

TEST_CASE("svd singular values of a diagonal matrix") {
    DenseMatrix w{{-2.0, 0.0, 0.0}, {0.0, 7.0, 0.0}, {0.0, 0.0, 0.5}};
    SvdResult s = svd(w);
    CHECK(s.sigma[0] == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(s.sigma[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.sigma[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("svd handles random rectangular matrices in both orientations") {
    for (const auto [rows, cols] : {std::pair<std::size_t, std::size_t>{12, 7}, {7, 12}}) {
        DenseMatrix w = random_matrix(rows, cols, 1000 + rows);
        SvdResult s = svd(w);
        CHECK(s.u.rows() == rows);
        CHECK(s.vt.cols() == cols);
        CHECK(s.sigma.size() == std::min(rows, cols));
        const double scale = frobenius_norm(w);
        CHECK(max_abs_diff(svd_reconstruct(s), w) / scale <= 1e-10);
        CHECK(orthonormality_residual(s.u) <= 1e-10);
        CHECK(orthonormality_residual(s.vt.transpose()) <= 1e-10);
        for (std::size_t i = 1; i < s.sigma.size(); ++i) {
            CHECK(s.sigma[i - 1] >= s.sigma[i]);
        }
    }
}

TEST_CASE("svd recovers an exactly low rank matrix") {
    const std::size_t m = 20, n = 15, r = 5;
    DenseMatrix a = random_matrix(m, r, 77);
    DenseMatrix b = random_matrix(r, n, 78);
    DenseMatrix w = matmul(a, b);
    SvdResult s = svd(w);
    for (std::size_t i = r; i < s.sigma.size(); ++i) {
        CHECK(s.sigma[i] <= 1e-10 * s.sigma[0]);
    }
    SvdResult t = truncate_svd(s, r);
    CHECK(max_abs_diff(svd_reconstruct(t), w) <= 1e-8);
}

TEST_CASE("svd of the zero matrix") {
    DenseMatrix w(6, 4, 0.0);
    SvdResult s = svd(w);
    for (const double v : s.sigma) {
        CHECK(v == 0.0);
    }
    CHECK(orthonormality_residual(s.u) <= 1e-12);
    CHECK(orthonormality_residual(s.vt.transpose()) <= 1e-12);
    CHECK(max_abs_diff(svd_reconstruct(s), w) == 0.0);
}

TEST_CASE("svd is deterministic") {
    DenseMatrix w = random_matrix(9, 6, 5);
    SvdResult a = svd(w);
    SvdResult b = svd(w);
    CHECK(a.u == b.u);
    CHECK(a.sigma == b.sigma);
    CHECK(a.vt == b.vt);
}

TEST_CASE("truncate_svd keeps the leading components") {
    DenseMatrix w = random_matrix(8, 8, 31);
    SvdResult s = svd(w);
    SvdResult t = truncate_svd(s, 3);
    CHECK(t.sigma.size() == 3);
    CHECK(t.u.cols() == 3);
    CHECK(t.vt.rows() == 3);
    CHECK(t.sigma[0] == s.sigma[0]);
    CHECK(t.sigma[2] == s.sigma[2]);
    CHECK_THROWS_AS(truncate_svd(s, 0), std::invalid_argument);
    CHECK_THROWS_AS(truncate_svd(s, 9), std::invalid_argument);
}

TEST_CASE("truncation error equals the dropped spectrum energy") {
    DenseMatrix w = random_matrix(10, 10, 99);
    SvdResult s = svd(w);
    const std::size_t k = 4;
    DenseMatrix approx = svd_reconstruct(truncate_svd(s, k));
    DenseMatrix resid = w;
    resid.axpy(-1.0, approx);
    double tail = 0.0;
    for (std::size_t i = k; i < s.sigma.size(); ++i) {
        tail += s.sigma[i] * s.sigma[i];
    }
    CHECK(frobenius_norm(resid) == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));
}
