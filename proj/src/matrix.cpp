// SPDX-License-Identifier: Apache-2.0
#include "emsq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace emsq {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("DenseMatrix dimensions must be positive");
    }
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("DenseMatrix dimensions must be positive");
    }
    if (data_.size() != rows * cols) {
        std::ostringstream oss;
        oss << "DenseMatrix data length " << data_.size() << " does not match " << rows << "x"
            << cols;
        throw std::invalid_argument(oss.str());
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    if (rows_ == 0) {
        throw std::invalid_argument("DenseMatrix needs at least one row");
    }
    cols_ = rows.begin()->size();
    if (cols_ == 0) {
        throw std::invalid_argument("DenseMatrix needs at least one column");
    }
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw std::invalid_argument("DenseMatrix rows have inconsistent lengths");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            t(j, i) = (*this)(i, j);
        }
    }
    return t;
}

void DenseMatrix::fill(double v) {
    for (auto& x : data_) {
        x = v;
    }
}

void DenseMatrix::axpy(double alpha, const DenseMatrix& other) {
    if (!same_shape(other)) {
        throw std::invalid_argument("axpy shape mismatch: " + shape_str() + " vs " +
                                    other.shape_str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += alpha * other.data_[i];
    }
}

void DenseMatrix::scale(double alpha) {
    for (auto& x : data_) {
        x *= alpha;
    }
}

std::string DenseMatrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool DenseMatrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

void DenseMatrix::require_finite(const std::string& what) const {
    if (!all_finite()) {
        throw std::runtime_error(what + " contains a non-finite entry");
    }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, FlopCounter* counter) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul dimension mismatch: " + a.shape_str() + " * " +
                                    b.shape_str());
    }
    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    const std::size_t n = b.cols();
    DenseMatrix c(m, n, 0.0);

    // i-k-j order: the inner loop streams contiguous rows of b and c, which
    // the compiler vectorizes, and each c(i,j) is accumulated in a fixed
    // order over k, so results are bit-deterministic.
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    if (counter != nullptr && counter->enabled) {
        counter->multiply_adds += static_cast<std::uint64_t>(m) * k * n;
    }
    c.require_finite("matmul result");
    return c;
}

double frobenius_norm(const DenseMatrix& m) {
    double sum = 0.0;
    for (double x : m.values()) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff shape mismatch: " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        best = std::max(best, std::abs(a.values()[i] - b.values()[i]));
    }
    return best;
}

}  // namespace emsq
