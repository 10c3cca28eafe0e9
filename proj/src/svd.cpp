// SPDX-License-Identifier: Apache-2.0
#include "emsq/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace emsq {

namespace {

constexpr std::size_t kMaxSweeps = 60;
constexpr double kStopFactor = 1e-12;  // sweep stop: max pair dot <= 1e-12 * ||W||_F^2

struct JacobiWork {
    std::size_t m = 0;
    std::size_t n = 0;
    std::vector<double> a;  // column-major m x n, columns orthogonalized in place
    std::vector<double> v;  // column-major n x n, accumulated rotations
};

void rotate_pair(double* x, double* y, std::size_t len, double c, double s) {
    for (std::size_t t = 0; t < len; ++t) {
        const double xt = x[t];
        const double yt = y[t];
        x[t] = c * xt - s * yt;
        y[t] = s * xt + c * yt;
    }
}

/// One-sided Jacobi on a tall matrix (m >= n). Returns the largest
/// off-diagonal column dot seen in the final sweep.
double jacobi_sweeps(JacobiWork& w, double fro_sq, std::size_t* sweeps_used) {
    const std::size_t m = w.m;
    const std::size_t n = w.n;
    const double stop = kStopFactor * fro_sq;
    double off = 0.0;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        off = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double* ai = w.a.data() + i * m;
                double* aj = w.a.data() + j * m;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t t = 0; t < m; ++t) {
                    alpha += ai[t] * ai[t];
                    beta += aj[t] * aj[t];
                    gamma += ai[t] * aj[t];
                }
                off = std::max(off, std::abs(gamma));
                // Rotate on any relative residual above roundoff; the sweep
                // stop rule below is what terminates iteration.
                if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) {
                    continue;
                }
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double sign = zeta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_pair(ai, aj, m, c, s);
                rotate_pair(w.v.data() + i * n, w.v.data() + j * n, n, c, s);
            }
        }
        *sweeps_used = sweep + 1;
        if (off <= stop) {
            return off;
        }
    }
    throw SvdConvergenceError(kMaxSweeps, off);
}

/// Fills U columns whose singular value is negligible with unit vectors
/// orthogonal to every other column, so U stays orthonormal for
/// rank-deficient inputs.
void complete_basis(DenseMatrix& u, const std::vector<bool>& needs_fill) {
    const std::size_t m = u.rows();
    const std::size_t r = u.cols();
    for (std::size_t col = 0; col < r; ++col) {
        if (!needs_fill[col]) {
            continue;
        }
        for (std::size_t cand = 0; cand < m; ++cand) {
            std::vector<double> e(m, 0.0);
            e[cand] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < r; ++k) {
                    if (k == col || (needs_fill[k] && k > col)) {
                        continue;  // only project against columns already set
                    }
                    double dot = 0.0;
                    for (std::size_t t = 0; t < m; ++t) {
                        dot += e[t] * u(t, k);
                    }
                    for (std::size_t t = 0; t < m; ++t) {
                        e[t] -= dot * u(t, k);
                    }
                }
            }
            double norm = std::sqrt(std::inner_product(e.begin(), e.end(), e.begin(), 0.0));
            if (norm > 0.5) {
                for (std::size_t t = 0; t < m; ++t) {
                    u(t, col) = e[t] / norm;
                }
                break;
            }
        }
    }
}

SvdResult svd_tall(const DenseMatrix& w) {
    const std::size_t m = w.rows();
    const std::size_t n = w.cols();

    JacobiWork work;
    work.m = m;
    work.n = n;
    work.a.resize(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            work.a[j * m + i] = w(i, j);
        }
    }
    work.v.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        work.v[j * n + j] = 1.0;
    }

    const double fro = frobenius_norm(w);
    std::size_t sweeps = 0;
    jacobi_sweeps(work, fro * fro, &sweeps);

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            const double x = work.a[j * m + t];
            s += x * x;
        }
        norms[j] = std::sqrt(s);
    }

    // Descending singular values; stable order breaks ties by sweep output.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    SvdResult out;
    out.sigma.resize(n);
    out.u = DenseMatrix(m, n, 0.0);
    out.vt = DenseMatrix(n, n, 0.0);
    const double tiny = fro * 1e-12;
    std::vector<bool> needs_fill(n, false);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        const double sv = norms[src];
        out.sigma[col] = sv;
        if (sv <= tiny) {
            needs_fill[col] = true;
        } else {
            for (std::size_t t = 0; t < m; ++t) {
                out.u(t, col) = work.a[src * m + t] / sv;
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            out.vt(col, t) = work.v[src * n + t];
        }
    }
    complete_basis(out.u, needs_fill);
    return out;
}

}  // namespace

SvdConvergenceError::SvdConvergenceError(std::size_t sweeps_in, double residual_in)
    : std::runtime_error([&] {
          std::ostringstream oss;
          oss << "Jacobi SVD did not converge after " << sweeps_in
              << " sweeps; off-diagonal residual " << residual_in;
          return oss.str();
      }()),
      sweeps(sweeps_in),
      residual(residual_in) {}

SvdResult svd(const DenseMatrix& w) {
    w.require_finite("svd input");
    if (w.rows() >= w.cols()) {
        return svd_tall(w);
    }
    SvdResult t = svd_tall(w.transpose());
    SvdResult out;
    out.sigma = std::move(t.sigma);
    out.u = t.vt.transpose();
    out.vt = t.u.transpose();
    return out;
}

SvdResult truncate_svd(const SvdResult& s, std::size_t k) {
    if (k < 1 || k > s.sigma.size()) {
        throw std::invalid_argument("truncate_svd: k = " + std::to_string(k) +
                                    " out of range [1, " + std::to_string(s.sigma.size()) + "]");
    }
    SvdResult out;
    out.sigma.assign(s.sigma.begin(), s.sigma.begin() + static_cast<std::ptrdiff_t>(k));
    out.u = DenseMatrix(s.u.rows(), k, 0.0);
    for (std::size_t i = 0; i < s.u.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            out.u(i, j) = s.u(i, j);
        }
    }
    out.vt = DenseMatrix(k, s.vt.cols(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < s.vt.cols(); ++j) {
            out.vt(i, j) = s.vt(i, j);
        }
    }
    return out;
}

DenseMatrix svd_reconstruct(const SvdResult& s) {
    DenseMatrix us = s.u;
    for (std::size_t i = 0; i < us.rows(); ++i) {
        for (std::size_t j = 0; j < us.cols(); ++j) {
            us(i, j) *= s.sigma[j];
        }
    }
    return matmul(us, s.vt);
}

}  // namespace emsq
