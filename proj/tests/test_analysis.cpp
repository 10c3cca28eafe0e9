// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <stdexcept>

#include "doctest.h"

#include "emsq/analysis.hpp"
#include "emsq/embedding.hpp"
#include "emsq/matrix.hpp"
#include "emsq/rng.hpp"

using namespace emsq;

TEST_CASE("dense flop count matches the closed form and the counter") {
    CHECK(flops_dense(300, 100) == 59900);
    CHECK(flops_dense(1, 1) == 1);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.next_below(40);
        const std::size_t n = 1 + rng.next_below(40);
        DenseMatrix x(1, m, 1.0);
        DenseMatrix w(m, n, 1.0);
        FlopCounter counter;
        matmul(x, w, &counter);
        const auto multiplies = static_cast<std::int64_t>(counter.multiply_adds);
        const std::int64_t adds = static_cast<std::int64_t>(m - 1) * static_cast<std::int64_t>(n);
        CHECK(multiplies + adds == flops_dense(static_cast<std::int64_t>(m),
                                               static_cast<std::int64_t>(n)));
    }
}

TEST_CASE("factorized flop count matches the counter over both products") {
    CHECK(flops_factorized(300, 300, 75) == 89625);

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.next_below(40);
        const std::size_t n = 1 + rng.next_below(40);
        const std::size_t k = 1 + rng.next_below(20);
        DenseMatrix x(1, m, 1.0);
        DenseMatrix wa(m, k, 1.0);
        DenseMatrix wb(k, n, 1.0);
        FlopCounter counter;
        DenseMatrix mid = matmul(x, wa, &counter);
        matmul(mid, wb, &counter);
        const auto multiplies = static_cast<std::int64_t>(counter.multiply_adds);
        const std::int64_t adds = static_cast<std::int64_t>(m - 1) * static_cast<std::int64_t>(k) +
                                  static_cast<std::int64_t>(k - 1) * static_cast<std::int64_t>(n);
        CHECK(multiplies + adds == flops_factorized(static_cast<std::int64_t>(m),
                                                    static_cast<std::int64_t>(n),
                                                    static_cast<std::int64_t>(k)));
    }
}

TEST_CASE("fewer-flops condition at the integer boundary") {
    // m = n = 2: exact threshold is k < 8/7, so k = 1 holds and k = 2 fails.
    FewerFlopsCheck c1 = fewer_flops_condition(2, 2, 1);
    CHECK(c1.exact.holds);
    CHECK(c1.exact.lhs == doctest::Approx(1.0));
    CHECK(c1.exact.rhs == doctest::Approx(8.0 / 7.0));
    // The k < mn/(m+n) simplification is stricter: 1 < 1 fails.
    CHECK_FALSE(c1.approx.holds);

    FewerFlopsCheck c2 = fewer_flops_condition(2, 2, 2);
    CHECK_FALSE(c2.exact.holds);

    CHECK_THROWS_AS(fewer_flops_condition(0, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(fewer_flops_condition(2, 2, 0), std::invalid_argument);
}

TEST_CASE("fewer-flops condition agrees with direct flop comparison") {
    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng.next_below(200));
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.next_below(200));
        const std::int64_t k = 1 + static_cast<std::int64_t>(rng.next_below(150));
        FewerFlopsCheck c = fewer_flops_condition(m, n, k);
        CHECK(c.exact.holds == (flops_factorized(m, n, k) < flops_dense(m, n)));
        CHECK(c.approx.holds == (k * (m + n) < m * n));
    }
}

TEST_CASE("space condition compares p against the bit ratio") {
    HardwareCostModel hw;
    CHECK(space_condition(0.1, hw).holds);
    CHECK(space_condition(0.2499, hw).holds);
    CHECK_FALSE(space_condition(0.25, hw).holds);
    CHECK_FALSE(space_condition(0.5, hw).holds);
    ConditionCheck c = space_condition(0.1, hw);
    CHECK(c.lhs == doctest::Approx(0.1));
    CHECK(c.rhs == doctest::Approx(0.25));
}

TEST_CASE("latency condition exact and approximate forms") {
    HardwareCostModel hw;
    LatencyCheck c = latency_condition(10000, 300, 29, hw);
    CHECK(c.exact.lhs == doctest::Approx(5999700.0 * 0.25));
    CHECK(c.exact.rhs == doctest::Approx(597071.0));
    CHECK(c.exact.holds);
    CHECK(c.approx.lhs == doctest::Approx(29.0 * 10300.0 / 3000000.0));
    CHECK(c.approx.rhs == doctest::Approx(0.25));
    CHECK(c.approx.holds);

    // A nearly full-rank factorization loses: F_S exceeds F_Q * t_q/t_s.
    LatencyCheck lose = latency_condition(100, 100, 90, hw);
    CHECK_FALSE(lose.exact.holds);
}

TEST_CASE("hardware model for_bits scales time with width") {
    HardwareCostModel h8 = HardwareCostModel::for_bits(8);
    CHECK(h8.b_q == doctest::Approx(8.0));
    CHECK(h8.t_q == doctest::Approx(0.25));
    HardwareCostModel h16 = HardwareCostModel::for_bits(16);
    CHECK(h16.b_q == doctest::Approx(16.0));
    CHECK(h16.t_q == doctest::Approx(0.5));
    CHECK_THROWS_AS(HardwareCostModel::for_bits(5), std::invalid_argument);

    HardwareCostModel bad;
    bad.t_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = HardwareCostModel{};
    bad.b_q = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("analyze_point ties the pieces together") {
    HardwareCostModel hw;
    FlopReport r = analyze_point(10000, 300, 0.1, hw);
    CHECK(r.m == 10000);
    CHECK(r.n == 300);
    CHECK(r.k == 29);
    CHECK(r.f_q == 5999700);
    CHECK(r.f_s == 597071);
    CHECK(r.flops.exact.holds);
    CHECK(r.space.holds);
    CHECK(r.latency.exact.holds);
    CHECK(r.latency.approx.lhs == doctest::Approx(29.0 * 10300.0 / 3000000.0));

    // At p = 0.5 the space condition flips while flops still win.
    FlopReport r2 = analyze_point(10000, 300, 0.5, hw);
    CHECK(r2.k == 145);
    CHECK_FALSE(r2.space.holds);
    CHECK(r2.flops.exact.holds);
}

TEST_CASE("time_inference reports positive spread statistics") {
    EmbeddingTable table = random_init(12, 6, 3);
    DanModel dan(EmbeddingLayer{table}, 2, 5);
    Dataset data;
    data.num_classes = 2;
    data.sentences = {{{0, 1, 2}, 0}, {{3, 4}, 1}, {{5, 6, 7}, 0}};

    TimingResult t = time_inference(dan, data, 3);
    CHECK(t.repeats == 3);
    CHECK(t.mean_s > 0.0);
    CHECK(t.median_s > 0.0);
    CHECK(t.stddev_s >= 0.0);

    CHECK_THROWS_AS(time_inference(dan, data, 0), std::invalid_argument);
    Dataset empty;
    empty.num_classes = 2;
    CHECK_THROWS_AS(time_inference(dan, empty, 3), std::invalid_argument);
}
