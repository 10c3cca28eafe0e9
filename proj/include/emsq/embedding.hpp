// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "emsq/matrix.hpp"

namespace emsq {

class Vocabulary;

/// Token lookup table; row i is the vector for token index i.
struct EmbeddingTable {
    DenseMatrix weights;  // vocab_size x dim

    std::size_t vocab_size() const { return weights.rows(); }
    std::size_t dim() const { return weights.cols(); }
    std::span<const double> lookup(std::size_t token) const;
};

/// Low-rank pair replacing a table: lookup goes through w_a, a following
/// linear layer applies w_b.
struct FactorizedEmbedding {
    DenseMatrix w_a;  // vocab_size x k
    DenseMatrix w_b;  // k x dim
    std::size_t k = 0;

    std::size_t vocab_size() const { return w_a.rows(); }
    std::size_t dim() const { return w_b.cols(); }
    /// Effective embedding of one token: row i of w_a times w_b.
    std::vector<double> effective_lookup(std::size_t token) const;
};

/// Rank choice for an m x n matrix at retained-parameter fraction p:
/// k = max(1, floor(p*m*n/(m+n))).
struct CompressionPlan {
    std::size_t m = 0;
    std::size_t n = 0;
    double p = 1.0;      // retained fraction, in (0, 1]
    double r_pct = 0.0;  // reduction fraction, 1 - p
    std::size_t k = 1;

    std::size_t factored_params() const { return k * (m + n); }
    std::size_t original_params() const { return m * n; }
};

CompressionPlan choose_rank(double p, std::size_t m, std::size_t n);

/// Truncated-SVD split of a trained table: w_a = U_k, w_b = diag(sigma_k) * Vt_k.
FactorizedEmbedding factorize(const EmbeddingTable& table, double p);

/// Offline baseline: projects the table onto its top-k left singular
/// directions (U_k * Sigma_k), giving a k-column table. The model trained on
/// it sizes its first dense layer to k; there is no w_b.
EmbeddingTable offline_compress(const EmbeddingTable& table, double p);

EmbeddingTable random_init(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

struct GloveLoad {
    EmbeddingTable table;
    double coverage = 0.0;    // found / vocab_size
    std::size_t found = 0;
};

/// Reads `token v1 ... vd` lines (space-separated, no header). Vocabulary
/// tokens missing from the file get random-init rows.
GloveLoad load_glove_text(const std::string& path, const Vocabulary& vocab, std::uint64_t seed);

/// Either form of the embedding layer, as stored in a model.
using EmbeddingLayer = std::variant<EmbeddingTable, FactorizedEmbedding>;

std::size_t embedding_vocab_size(const EmbeddingLayer& e);
/// Width of the vector handed to the next layer: dim for both forms (w_b
/// restores dim for the factorized one).
std::size_t embedding_output_dim(const EmbeddingLayer& e);
bool embedding_is_factorized(const EmbeddingLayer& e);

}  // namespace emsq
