// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "emsq/matrix.hpp"

namespace emsq {

/// W = u * diag(sigma) * vt with r = min(rows, cols) retained components.
/// sigma is non-negative and descending; u columns and vt rows are
/// orthonormal.
struct SvdResult {
    DenseMatrix u;              // m x r
    std::vector<double> sigma;  // length r
    DenseMatrix vt;             // r x n

    std::size_t rank_retained() const { return sigma.size(); }
};

struct SvdConvergenceError : std::runtime_error {
    SvdConvergenceError(std::size_t sweeps, double residual);
    std::size_t sweeps;
    double residual;
};

/// One-sided Jacobi SVD. Deterministic for a fixed input: fixed sweep order,
/// no randomization. Sweeps stop once the largest off-diagonal column-pair
/// dot product falls to 1e-12 * ||W||_F^2; throws SvdConvergenceError after
/// 60 sweeps. Inputs with rows < cols are transposed internally.
SvdResult svd(const DenseMatrix& w);

/// Keeps the k leading components. 1 <= k <= sigma.size().
SvdResult truncate_svd(const SvdResult& s, std::size_t k);

/// u * diag(sigma) * vt.
DenseMatrix svd_reconstruct(const SvdResult& s);

}  // namespace emsq
