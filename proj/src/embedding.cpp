// SPDX-License-Identifier: Apache-2.0
#include "emsq/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "emsq/data.hpp"
#include "emsq/rng.hpp"
#include "emsq/svd.hpp"

namespace emsq {

std::span<const double> EmbeddingTable::lookup(std::size_t token) const {
    if (token >= vocab_size()) {
        throw std::out_of_range("embedding lookup: token " + std::to_string(token) +
                                " >= vocab size " + std::to_string(vocab_size()));
    }
    return weights.row(token);
}

std::vector<double> FactorizedEmbedding::effective_lookup(std::size_t token) const {
    if (token >= vocab_size()) {
        throw std::out_of_range("embedding lookup: token " + std::to_string(token) +
                                " >= vocab size " + std::to_string(vocab_size()));
    }
    std::vector<double> out(dim(), 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        const double a = w_a(token, r);
        for (std::size_t j = 0; j < dim(); ++j) {
            out[j] += a * w_b(r, j);
        }
    }
    return out;
}

CompressionPlan choose_rank(double p, std::size_t m, std::size_t n) {
    if (!(p > 0.0 && p <= 1.0)) {
        throw std::invalid_argument("choose_rank: p must be in (0, 1], got " + std::to_string(p));
    }
    if (m < 1 || n < 1) {
        throw std::invalid_argument("choose_rank: dimensions must be positive");
    }
    CompressionPlan plan;
    plan.m = m;
    plan.n = n;
    plan.p = p;
    plan.r_pct = 1.0 - p;
    const double raw = p * static_cast<double>(m) * static_cast<double>(n) /
                       static_cast<double>(m + n);
    plan.k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw)));
    return plan;
}

FactorizedEmbedding factorize(const EmbeddingTable& table, double p) {
    const CompressionPlan plan = choose_rank(p, table.vocab_size(), table.dim());
    const SvdResult full = svd(table.weights);
    const SvdResult top = truncate_svd(full, std::min(plan.k, full.sigma.size()));

    FactorizedEmbedding out;
    out.k = top.sigma.size();
    out.w_a = top.u;
    out.w_b = top.vt;
    for (std::size_t r = 0; r < out.k; ++r) {
        for (std::size_t j = 0; j < out.w_b.cols(); ++j) {
            out.w_b(r, j) *= top.sigma[r];
        }
    }
    return out;
}

EmbeddingTable offline_compress(const EmbeddingTable& table, double p) {
    const CompressionPlan plan = choose_rank(p, table.vocab_size(), table.dim());
    const SvdResult full = svd(table.weights);
    const SvdResult top = truncate_svd(full, std::min(plan.k, full.sigma.size()));

    DenseMatrix proj = top.u;  // vocab x k, scaled by sigma below
    for (std::size_t i = 0; i < proj.rows(); ++i) {
        for (std::size_t j = 0; j < proj.cols(); ++j) {
            proj(i, j) *= top.sigma[j];
        }
    }
    return EmbeddingTable{std::move(proj)};
}

EmbeddingTable random_init(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix w(vocab_size, dim, 0.0);
    const double bound = 0.5 / static_cast<double>(dim);
    for (std::size_t i = 0; i < vocab_size; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            w(i, j) = rng.uniform(-bound, bound);
        }
    }
    return EmbeddingTable{std::move(w)};
}

GloveLoad load_glove_text(const std::string& path, const Vocabulary& vocab, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open embedding file: " + path);
    }

    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    std::unordered_map<std::int32_t, std::vector<double>> hits;  // last duplicate wins
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        std::string field;
        while (ls >> field) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(field, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != field.size()) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": unreadable real '" + field + "'");
            }
            vec.push_back(v);
        }
        if (vec.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": no vector values");
        }
        if (dim == 0) {
            dim = vec.size();
        } else if (vec.size() != dim) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": vector length " + std::to_string(vec.size()) +
                                     " differs from " + std::to_string(dim));
        }
        const std::int32_t id = vocab.lookup_exact(token);
        if (id >= 0) {
            hits[id] = std::move(vec);
        }
    }
    if (dim == 0) {
        throw std::runtime_error(path + ": empty embedding file");
    }

    GloveLoad out;
    out.table = random_init(vocab.size(), dim, seed);
    for (const auto& [id, vec] : hits) {
        for (std::size_t j = 0; j < dim; ++j) {
            out.table.weights(static_cast<std::size_t>(id), j) = vec[j];
        }
    }
    out.table.weights.require_finite("embedding file " + path);
    out.found = hits.size();
    out.coverage = static_cast<double>(out.found) / static_cast<double>(vocab.size());
    return out;
}

std::size_t embedding_vocab_size(const EmbeddingLayer& e) {
    return std::visit([](const auto& x) { return x.vocab_size(); }, e);
}

std::size_t embedding_output_dim(const EmbeddingLayer& e) {
    return std::visit([](const auto& x) { return x.dim(); }, e);
}

bool embedding_is_factorized(const EmbeddingLayer& e) {
    return std::holds_alternative<FactorizedEmbedding>(e);
}

}  // namespace emsq
