// SPDX-License-Identifier: Apache-2.0
#include "emsq/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "emsq/embedding.hpp"

namespace emsq {

HardwareCostModel HardwareCostModel::for_bits(int bits) {
    if (bits != 8 && bits != 16) {
        throw std::invalid_argument("HardwareCostModel: bits must be 8 or 16");
    }
    HardwareCostModel hw;
    hw.b_q = static_cast<double>(bits);
    hw.t_q = hw.t_s * hw.b_q / hw.b_s;
    return hw;
}

void HardwareCostModel::validate() const {
    if (!(b_q < b_s)) {
        throw std::invalid_argument("HardwareCostModel: b_q must be below b_s");
    }
    if (!(t_q <= t_s)) {
        throw std::invalid_argument("HardwareCostModel: t_q must not exceed t_s");
    }
    if (!(b_q > 0.0) || !(t_q > 0.0)) {
        throw std::invalid_argument("HardwareCostModel: bits and times must be positive");
    }
}

namespace {

void check_dims(std::int64_t m, std::int64_t n, std::int64_t k) {
    if (m < 1 || n < 1 || k < 1) {
        throw std::invalid_argument("dimensions must be at least 1");
    }
}

}  // namespace

std::int64_t flops_dense(std::int64_t m, std::int64_t n) {
    check_dims(m, n, 1);
    return (2 * m - 1) * n;
}

std::int64_t flops_factorized(std::int64_t m, std::int64_t n, std::int64_t k) {
    check_dims(m, n, k);
    return 2 * (m + n) * k - (n + k);
}

FewerFlopsCheck fewer_flops_condition(std::int64_t m, std::int64_t n, std::int64_t k) {
    check_dims(m, n, k);
    FewerFlopsCheck out;
    const std::int64_t denom = 2 * (m + n) - 1;
    out.exact.lhs = static_cast<double>(k);
    out.exact.rhs = 2.0 * static_cast<double>(m) * static_cast<double>(n) /
                    static_cast<double>(denom);
    out.exact.holds = k * denom < 2 * m * n;
    out.approx.lhs = static_cast<double>(k);
    out.approx.rhs = static_cast<double>(m) * static_cast<double>(n) /
                     static_cast<double>(m + n);
    out.approx.holds = k * (m + n) < m * n;
    return out;
}

ConditionCheck space_condition(double p, const HardwareCostModel& hw) {
    if (!(p > 0.0) || p > 1.0) {
        throw std::invalid_argument("space_condition: p must be in (0, 1]");
    }
    hw.validate();
    ConditionCheck out;
    out.lhs = p;
    out.rhs = hw.b_q / hw.b_s;
    out.holds = out.lhs < out.rhs;
    return out;
}

LatencyCheck latency_condition(std::int64_t m, std::int64_t n, std::int64_t k,
                               const HardwareCostModel& hw) {
    check_dims(m, n, k);
    hw.validate();
    LatencyCheck out;
    out.exact.lhs = static_cast<double>(flops_dense(m, n)) * hw.t_q;
    out.exact.rhs = static_cast<double>(flops_factorized(m, n, k)) * hw.t_s;
    out.exact.holds = out.exact.lhs > out.exact.rhs;
    out.approx.lhs = static_cast<double>(k) * static_cast<double>(m + n) /
                     (static_cast<double>(m) * static_cast<double>(n));
    out.approx.rhs = hw.t_q / hw.t_s;
    out.approx.holds = out.approx.lhs < out.approx.rhs;
    return out;
}

FlopReport analyze_point(std::size_t m, std::size_t n, double p, const HardwareCostModel& hw) {
    const CompressionPlan plan = choose_rank(p, m, n);
    FlopReport r;
    r.m = static_cast<std::int64_t>(m);
    r.n = static_cast<std::int64_t>(n);
    r.k = static_cast<std::int64_t>(plan.k);
    r.p = p;
    r.f_q = flops_dense(r.m, r.n);
    r.f_s = flops_factorized(r.m, r.n, r.k);
    r.flops = fewer_flops_condition(r.m, r.n, r.k);
    r.space = space_condition(p, hw);
    r.latency = latency_condition(r.m, r.n, r.k, hw);
    return r;
}

TimingResult time_inference(const Model& model, const Dataset& data, std::size_t repeats) {
    if (repeats < 1) {
        throw std::invalid_argument("time_inference: repeats must be at least 1");
    }
    if (data.sentences.empty()) {
        throw std::invalid_argument("time_inference: empty dataset");
    }

    // The prediction sum keeps the optimizer from discarding the passes.
    volatile std::int64_t sink = 0;
    const auto pass = [&] {
        std::int64_t total = 0;
        for (const Sentence& s : data.sentences) {
            total += model.predict(s);
        }
        sink = sink + total;
    };

    pass();  // warmup

    std::vector<double> seconds;
    seconds.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        pass();
        const auto stop = std::chrono::steady_clock::now();
        seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }

    TimingResult out;
    out.repeats = repeats;
    double sum = 0.0;
    for (const double s : seconds) {
        sum += s;
    }
    out.mean_s = sum / static_cast<double>(repeats);
    double var = 0.0;
    for (const double s : seconds) {
        var += (s - out.mean_s) * (s - out.mean_s);
    }
    out.stddev_s = std::sqrt(var / static_cast<double>(repeats));
    std::sort(seconds.begin(), seconds.end());
    const std::size_t mid = repeats / 2;
    out.median_s = repeats % 2 == 1 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
    return out;
}

}  // namespace emsq
