// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace emsq {

/// Counts scalar multiplies performed inside matmul. Disabled counters cost
/// one branch per matmul call, not per element.
struct FlopCounter {
    std::uint64_t multiply_adds = 0;
    bool enabled = true;

    void reset() { multiply_adds = 0; }
};

/// Dense row-major matrix of 64-bit reals. The single weight/activation
/// carrier used everywhere in this project.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    DenseMatrix transpose() const;

    void fill(double v);
    /// this += alpha * other; shapes must match.
    void axpy(double alpha, const DenseMatrix& other);
    /// this *= alpha.
    void scale(double alpha);

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;

    /// True iff every entry is finite.
    bool all_finite() const;
    /// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
    void require_finite(const std::string& what) const;

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product a*b. If `counter` is non-null and enabled, multiply_adds
/// grows by exactly a.rows*a.cols*b.cols. Throws on dimension mismatch or a
/// non-finite result.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, FlopCounter* counter = nullptr);

double frobenius_norm(const DenseMatrix& m);

/// max |a(i,j) - b(i,j)|; shapes must match.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace emsq
