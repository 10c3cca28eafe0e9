// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "emsq/data.hpp"
#include "emsq/models.hpp"

namespace emsq {

/// Abstract hardware parameters for the trade-off conditions: storage bits
/// per weight and time per FLOP at each precision.
struct HardwareCostModel {
    double b_s = 32.0;  // full-precision bits
    double b_q = 8.0;   // quantized bits
    double t_s = 1.0;   // time per full-precision FLOP, arbitrary units
    double t_q = 0.25;  // time per quantized FLOP

    /// b_q = bits; t_q scales with bits/b_s, modeling FLOP time as
    /// proportional to operand width.
    static HardwareCostModel for_bits(int bits);
    void validate() const;
};

/// FLOPs of a 1 x m by m x n product (multiplies plus adds): (2m - 1) * n.
std::int64_t flops_dense(std::int64_t m, std::int64_t n);

/// FLOPs through the factor pair: (2m-1)k + (2k-1)n = 2(m+n)k - (n+k).
std::int64_t flops_factorized(std::int64_t m, std::int64_t n, std::int64_t k);

/// One inequality evaluation; the meaning of lhs/rhs is per check.
struct ConditionCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// k < 2mn / (2(m+n) - 1), decided in exact integer arithmetic, and the
/// k < mn/(m+n) simplification alongside it.
struct FewerFlopsCheck {
    ConditionCheck exact;
    ConditionCheck approx;
};

FewerFlopsCheck fewer_flops_condition(std::int64_t m, std::int64_t n, std::int64_t k);

/// Factorization beats quantized storage iff p < b_q / b_s (strict).
ConditionCheck space_condition(double p, const HardwareCostModel& hw);

/// Factorization beats quantized inference time iff F_Q*t_q > F_S*t_s
/// (exact), approximated by k(m+n)/(mn) < t_q/t_s.
struct LatencyCheck {
    ConditionCheck exact;
    ConditionCheck approx;
};

LatencyCheck latency_condition(std::int64_t m, std::int64_t n, std::int64_t k,
                               const HardwareCostModel& hw);

/// All calculator outputs for one (m, n, p) operating point.
struct FlopReport {
    std::int64_t m = 0;
    std::int64_t n = 0;
    std::int64_t k = 0;
    double p = 1.0;
    std::int64_t f_q = 0;
    std::int64_t f_s = 0;
    FewerFlopsCheck flops;
    ConditionCheck space;
    LatencyCheck latency;
};

/// Derives k from (p, m, n) and evaluates every condition.
FlopReport analyze_point(std::size_t m, std::size_t n, double p, const HardwareCostModel& hw);

struct TimingResult {
    double mean_s = 0.0;
    double stddev_s = 0.0;
    double median_s = 0.0;
    std::size_t repeats = 0;
};

/// Wall-clock forward passes over the dataset (eval mode, single thread),
/// one warmup pass then `repeats` timed passes.
TimingResult time_inference(const Model& model, const Dataset& data, std::size_t repeats);

}  // namespace emsq
