// SPDX-License-Identifier: Apache-2.0
#include "emsq/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>

namespace emsq {

namespace {

const DenseMatrix& lookup_matrix(const EmbeddingLayer& e) {
    if (const auto* table = std::get_if<EmbeddingTable>(&e)) {
        return table->weights;
    }
    return std::get<FactorizedEmbedding>(e).w_a;
}

void check_token(std::int32_t id, std::size_t vocab) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        throw std::out_of_range("token id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab));
    }
}

void check_label(std::int32_t label, std::int32_t num_classes) {
    if (label < 0 || label >= num_classes) {
        throw std::out_of_range("label " + std::to_string(label) + " outside " +
                                std::to_string(num_classes) + " classes");
    }
}

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out, 0.0);
    double* p = w.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
        p[i] = rng.uniform(-limit, limit);
    }
    return w;
}

void add_bias_rows(DenseMatrix& m, const DenseMatrix& bias) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* r = m.data() + i * m.cols();
        const double* b = bias.data();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            r[j] += b[j];
        }
    }
}

void relu_inplace(DenseMatrix& m) {
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        p[i] = p[i] > 0.0 ? p[i] : 0.0;
    }
}

void sigmoid_inplace(DenseMatrix& m) {
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        p[i] = 1.0 / (1.0 + std::exp(-p[i]));
    }
}

void tanh_inplace(DenseMatrix& m) {
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        p[i] = std::tanh(p[i]);
    }
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c = a;
    double* pc = c.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < c.size(); ++i) {
        pc[i] *= pb[i];
    }
    return c;
}

/// dh masked by the active side of a ReLU output.
DenseMatrix relu_backward(const DenseMatrix& dh, const DenseMatrix& post) {
    DenseMatrix out = dh;
    double* po = out.data();
    const double* pp = post.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (pp[i] <= 0.0) {
            po[i] = 0.0;
        }
    }
    return out;
}

DenseMatrix col_sums(const DenseMatrix& m) {
    DenseMatrix out(1, m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.data() + i * m.cols();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out.data()[j] += r[j];
        }
    }
    return out;
}

/// out += weight * g for every tensor in g (inserting zero-initialized
/// tensors as needed).
void merge_scaled(Gradients& out, const Gradients& g, double weight) {
    for (const auto& [name, grad] : g.dense) {
        const auto it = out.dense.try_emplace(name, grad.rows(), grad.cols(), 0.0).first;
        it->second.axpy(weight, grad);
    }
    for (const auto& [row, grad] : g.embedding_rows) {
        out.accumulate_row(row, grad, weight);
    }
}

DenseMatrix gate_pre(const DenseMatrix& x, const DenseMatrix& h, const DenseMatrix& wx,
                     const DenseMatrix& wh, const DenseMatrix& b) {
    DenseMatrix a = matmul(x, wx);
    a.axpy(1.0, matmul(h, wh));
    a.axpy(1.0, b);
    return a;
}

}  // namespace

void Gradients::accumulate_row(std::int32_t row, std::span<const double> grad, double weight) {
    auto& v = embedding_rows.try_emplace(row, grad.size(), 0.0).first->second;
    if (v.size() != grad.size()) {
        throw std::invalid_argument("embedding row gradient length changed");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        v[i] += weight * grad[i];
    }
}

void softmax_rows(DenseMatrix& logits) {
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double* r = logits.data() + i * logits.cols();
        double mx = r[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) {
            mx = std::max(mx, r[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            r[j] /= sum;
        }
    }
}

double cross_entropy(std::span<const double> probs, std::int32_t label) {
    check_label(label, static_cast<std::int32_t>(probs.size()));
    const double p = std::max(probs[static_cast<std::size_t>(label)], 1e-12);
    return -std::log(p);
}

DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout rate must be in [0, 1)");
    }
    const double keep = 1.0 - rate;
    const double boost = 1.0 / keep;
    DenseMatrix m(rows, cols, 0.0);
    double* p = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        p[i] = rng.bernoulli(keep) ? boost : 0.0;
    }
    return m;
}

std::int32_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) {
            best = j;
        }
    }
    return static_cast<std::int32_t>(best);
}

EvalResult evaluate(const Model& model, const Dataset& data) {
    if (data.sentences.empty()) {
        throw std::invalid_argument("evaluate: empty dataset");
    }
    const auto classes = static_cast<std::size_t>(data.num_classes);
    EvalResult r;
    r.per_class_correct.assign(classes, 0);
    r.per_class_total.assign(classes, 0);
    std::size_t hits = 0;
    for (const Sentence& s : data.sentences) {
        check_label(s.label, data.num_classes);
        const std::int32_t pred = model.predict(s);
        ++r.per_class_total[static_cast<std::size_t>(s.label)];
        if (pred == s.label) {
            ++r.per_class_correct[static_cast<std::size_t>(s.label)];
            ++hits;
        }
    }
    r.accuracy = static_cast<double>(hits) / static_cast<double>(data.sentences.size());
    return r;
}

DanModel::DanModel(EmbeddingLayer embedding, std::int32_t num_classes, std::uint64_t seed)
    : embedding_(std::move(embedding)), num_classes_(num_classes) {
    if (num_classes < 2) {
        throw std::invalid_argument("DanModel: need at least 2 classes");
    }
    const std::size_t in = embedding_output_dim(embedding_);
    Rng rng(derive_seed(seed, 1));
    fc1_w = glorot(in, kHidden1, rng);
    fc1_b = DenseMatrix(1, kHidden1, 0.0);
    fc2_w = glorot(kHidden1, kHidden2, rng);
    fc2_b = DenseMatrix(1, kHidden2, 0.0);
    head_w = glorot(kHidden2, static_cast<std::size_t>(num_classes), rng);
    head_b = DenseMatrix(1, static_cast<std::size_t>(num_classes), 0.0);
}

ModelOutput DanModel::forward(const Sentence& s, double dropout, Rng* rng,
                              DanTrace* trace) const {
    return forward_batch({&s}, dropout, rng, trace);
}

ModelOutput DanModel::forward_batch(const std::vector<const Sentence*>& batch, double dropout,
                                    Rng* rng, DanTrace* trace) const {
    if (batch.empty()) {
        throw std::invalid_argument("forward_batch: empty batch");
    }
    const bool train = dropout > 0.0;
    if (train && rng == nullptr) {
        throw std::invalid_argument("forward with dropout needs an rng");
    }
    const DenseMatrix& lut = lookup_matrix(embedding_);
    const auto* fact = std::get_if<FactorizedEmbedding>(&embedding_);

    DenseMatrix xa(batch.size(), lut.cols(), 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ids = batch[b]->token_ids;
        if (ids.empty()) {
            throw std::invalid_argument("sentence has no tokens");
        }
        double* dst = xa.data() + b * xa.cols();
        for (const std::int32_t id : ids) {
            check_token(id, lut.rows());
            const double* src = lut.data() + static_cast<std::size_t>(id) * lut.cols();
            for (std::size_t j = 0; j < xa.cols(); ++j) {
                dst[j] += src[j];
            }
        }
        const double inv_t = 1.0 / static_cast<double>(ids.size());
        for (std::size_t j = 0; j < xa.cols(); ++j) {
            dst[j] *= inv_t;
        }
    }

    DenseMatrix x = fact != nullptr ? matmul(xa, fact->w_b) : xa;

    DenseMatrix h1 = matmul(x, fc1_w);
    add_bias_rows(h1, fc1_b);
    relu_inplace(h1);
    DenseMatrix m1 = train ? dropout_mask(h1.rows(), h1.cols(), dropout, *rng)
                           : DenseMatrix(h1.rows(), h1.cols(), 1.0);
    DenseMatrix h1d = train ? hadamard(h1, m1) : h1;

    DenseMatrix h2 = matmul(h1d, fc2_w);
    add_bias_rows(h2, fc2_b);
    relu_inplace(h2);
    DenseMatrix m2 = train ? dropout_mask(h2.rows(), h2.cols(), dropout, *rng)
                           : DenseMatrix(h2.rows(), h2.cols(), 1.0);
    DenseMatrix h2d = train ? hadamard(h2, m2) : h2;

    DenseMatrix logits = matmul(h2d, head_w);
    add_bias_rows(logits, head_b);
    DenseMatrix probs = logits;
    softmax_rows(probs);

    if (trace != nullptr) {
        trace->batch = batch;
        trace->factorized = fact != nullptr;
        trace->train_mode = train;
        trace->xa = std::move(xa);
        trace->x = std::move(x);
        trace->h1 = std::move(h1);
        trace->m1 = std::move(m1);
        trace->h1d = std::move(h1d);
        trace->h2 = std::move(h2);
        trace->m2 = std::move(m2);
        trace->h2d = std::move(h2d);
        trace->probs = probs;
    }
    return {std::move(logits), std::move(probs)};
}

Gradients DanModel::backward(const DanTrace& t) const {
    if (t.batch.empty() || t.probs.rows() != t.batch.size()) {
        throw std::invalid_argument("backward: trace does not match a forward batch");
    }
    const std::size_t bsz = t.batch.size();
    const double inv_b = 1.0 / static_cast<double>(bsz);

    DenseMatrix dlogits = t.probs;
    for (std::size_t b = 0; b < bsz; ++b) {
        const std::int32_t label = t.batch[b]->label;
        check_label(label, num_classes_);
        dlogits(b, static_cast<std::size_t>(label)) -= 1.0;
    }
    dlogits.scale(inv_b);

    Gradients g;
    g.dense.emplace("head.weight", matmul(t.h2d.transpose(), dlogits));
    g.dense.emplace("head.bias", col_sums(dlogits));

    DenseMatrix dh2 = matmul(dlogits, head_w.transpose());
    if (t.train_mode) {
        dh2 = hadamard(dh2, t.m2);
    }
    DenseMatrix dh2pre = relu_backward(dh2, t.h2);
    g.dense.emplace("fc2.weight", matmul(t.h1d.transpose(), dh2pre));
    g.dense.emplace("fc2.bias", col_sums(dh2pre));

    DenseMatrix dh1 = matmul(dh2pre, fc2_w.transpose());
    if (t.train_mode) {
        dh1 = hadamard(dh1, t.m1);
    }
    DenseMatrix dh1pre = relu_backward(dh1, t.h1);
    g.dense.emplace("fc1.weight", matmul(t.x.transpose(), dh1pre));
    g.dense.emplace("fc1.bias", col_sums(dh1pre));

    DenseMatrix dx = matmul(dh1pre, fc1_w.transpose());
    DenseMatrix dxa = dx;
    if (t.factorized) {
        const auto& fact = std::get<FactorizedEmbedding>(embedding_);
        g.dense.emplace("embedding.w_b", matmul(t.xa.transpose(), dx));
        dxa = matmul(dx, fact.w_b.transpose());
    }
    for (std::size_t b = 0; b < bsz; ++b) {
        const auto& ids = t.batch[b]->token_ids;
        const double inv_t = 1.0 / static_cast<double>(ids.size());
        for (const std::int32_t id : ids) {
            g.accumulate_row(id, dxa.row(b), inv_t);
        }
    }
    return g;
}

void DanModel::replace_embedding(EmbeddingLayer e) {
    if (embedding_output_dim(e) != embedding_output_dim(embedding_) ||
        embedding_vocab_size(e) != embedding_vocab_size(embedding_)) {
        throw std::invalid_argument("replacement embedding must keep vocab and output width");
    }
    embedding_ = std::move(e);
}

std::vector<NamedParam> DanModel::dense_params() {
    std::vector<NamedParam> params;
    if (auto* fact = std::get_if<FactorizedEmbedding>(&embedding_)) {
        params.push_back({"embedding.w_b", &fact->w_b});
    }
    params.push_back({"fc1.weight", &fc1_w});
    params.push_back({"fc1.bias", &fc1_b});
    params.push_back({"fc2.weight", &fc2_w});
    params.push_back({"fc2.bias", &fc2_b});
    params.push_back({"head.weight", &head_w});
    params.push_back({"head.bias", &head_b});
    return params;
}

std::vector<std::pair<std::string, const DenseMatrix*>> DanModel::named_tensors() const {
    std::vector<std::pair<std::string, const DenseMatrix*>> out;
    if (const auto* table = std::get_if<EmbeddingTable>(&embedding_)) {
        out.emplace_back("embedding.table", &table->weights);
    } else {
        const auto& fact = std::get<FactorizedEmbedding>(embedding_);
        out.emplace_back("embedding.w_a", &fact.w_a);
        out.emplace_back("embedding.w_b", &fact.w_b);
    }
    out.emplace_back("fc1.weight", &fc1_w);
    out.emplace_back("fc1.bias", &fc1_b);
    out.emplace_back("fc2.weight", &fc2_w);
    out.emplace_back("fc2.bias", &fc2_b);
    out.emplace_back("head.weight", &head_w);
    out.emplace_back("head.bias", &head_b);
    return out;
}

double DanModel::batch_gradients(const std::vector<const Sentence*>& batch, double dropout,
                                 Rng* rng, Gradients& out) {
    DanTrace trace;
    const ModelOutput o = forward_batch(batch, dropout, rng, &trace);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        loss += cross_entropy(o.probs.row(b), batch[b]->label);
    }
    out = backward(trace);
    return loss / static_cast<double>(batch.size());
}

std::int32_t DanModel::predict(const Sentence& s) const {
    const ModelOutput o = forward(s, 0.0, nullptr, nullptr);
    return argmax_row(o.probs.row(0));
}

std::unique_ptr<Model> DanModel::clone() const {
    return std::make_unique<DanModel>(*this);
}

std::size_t DanModel::num_parameters() const {
    std::size_t n = fc1_w.size() + fc1_b.size() + fc2_w.size() + fc2_b.size() + head_w.size() +
                    head_b.size();
    if (const auto* table = std::get_if<EmbeddingTable>(&embedding_)) {
        n += table->weights.size();
    } else {
        const auto& fact = std::get<FactorizedEmbedding>(embedding_);
        n += fact.w_a.size() + fact.w_b.size();
    }
    return n;
}

LstmModel::LstmModel(EmbeddingLayer embedding, std::int32_t num_classes, std::size_t hidden,
                     std::uint64_t seed, std::size_t max_len)
    : embedding_(std::move(embedding)),
      num_classes_(num_classes),
      hidden_(hidden),
      max_len_(max_len) {
    if (num_classes < 2) {
        throw std::invalid_argument("LstmModel: need at least 2 classes");
    }
    if (hidden_ == 0 || max_len_ == 0) {
        throw std::invalid_argument("LstmModel: hidden size and max_len must be positive");
    }
    const std::size_t in = embedding_output_dim(embedding_);
    Rng rng(derive_seed(seed, 2));
    wxi = glorot(in, hidden_, rng);
    whi = glorot(hidden_, hidden_, rng);
    bi = DenseMatrix(1, hidden_, 0.0);
    wxf = glorot(in, hidden_, rng);
    whf = glorot(hidden_, hidden_, rng);
    bf = DenseMatrix(1, hidden_, 1.0);  // open forget gates at init
    wxo = glorot(in, hidden_, rng);
    who = glorot(hidden_, hidden_, rng);
    bo = DenseMatrix(1, hidden_, 0.0);
    wxg = glorot(in, hidden_, rng);
    whg = glorot(hidden_, hidden_, rng);
    bg = DenseMatrix(1, hidden_, 0.0);
    head_w = glorot(hidden_, static_cast<std::size_t>(num_classes), rng);
    head_b = DenseMatrix(1, static_cast<std::size_t>(num_classes), 0.0);
}

ModelOutput LstmModel::forward(const Sentence& s, double dropout, Rng* rng,
                               LstmTrace* trace) const {
    if (s.token_ids.empty()) {
        throw std::invalid_argument("sentence has no tokens");
    }
    const bool train = dropout > 0.0;
    if (train && rng == nullptr) {
        throw std::invalid_argument("forward with dropout needs an rng");
    }
    const DenseMatrix& lut = lookup_matrix(embedding_);
    const auto* fact = std::get_if<FactorizedEmbedding>(&embedding_);

    std::vector<std::int32_t> ids(s.token_ids.begin(),
                                  s.token_ids.begin() +
                                      static_cast<std::ptrdiff_t>(
                                          std::min(s.token_ids.size(), max_len_)));

    DenseMatrix h(1, hidden_, 0.0);
    DenseMatrix c(1, hidden_, 0.0);
    if (trace != nullptr) {
        trace->sentence = &s;
        trace->ids = ids;
        trace->factorized = fact != nullptr;
        trace->train_mode = train;
        trace->xa.clear();
        trace->x.clear();
        trace->i.clear();
        trace->f.clear();
        trace->o.clear();
        trace->g.clear();
        trace->c.clear();
        trace->h.clear();
    }

    for (const std::int32_t id : ids) {
        check_token(id, lut.rows());
        DenseMatrix xr(1, lut.cols(), 0.0);
        const double* src = lut.data() + static_cast<std::size_t>(id) * lut.cols();
        std::copy(src, src + lut.cols(), xr.data());
        DenseMatrix x = fact != nullptr ? matmul(xr, fact->w_b) : xr;

        DenseMatrix gi = gate_pre(x, h, wxi, whi, bi);
        sigmoid_inplace(gi);
        DenseMatrix gf = gate_pre(x, h, wxf, whf, bf);
        sigmoid_inplace(gf);
        DenseMatrix go = gate_pre(x, h, wxo, who, bo);
        sigmoid_inplace(go);
        DenseMatrix gg = gate_pre(x, h, wxg, whg, bg);
        tanh_inplace(gg);

        DenseMatrix cn(1, hidden_, 0.0);
        DenseMatrix hn(1, hidden_, 0.0);
        for (std::size_t j = 0; j < hidden_; ++j) {
            cn(0, j) = gf(0, j) * c(0, j) + gi(0, j) * gg(0, j);
            hn(0, j) = go(0, j) * std::tanh(cn(0, j));
        }
        if (trace != nullptr) {
            if (fact != nullptr) {
                trace->xa.push_back(std::move(xr));
            }
            trace->x.push_back(std::move(x));
            trace->i.push_back(std::move(gi));
            trace->f.push_back(std::move(gf));
            trace->o.push_back(std::move(go));
            trace->g.push_back(std::move(gg));
            trace->c.push_back(cn);
            trace->h.push_back(hn);
        }
        c = std::move(cn);
        h = std::move(hn);
    }

    DenseMatrix mask = train ? dropout_mask(1, hidden_, dropout, *rng)
                             : DenseMatrix(1, hidden_, 1.0);
    DenseMatrix hd = train ? hadamard(h, mask) : h;
    DenseMatrix logits = matmul(hd, head_w);
    add_bias_rows(logits, head_b);
    DenseMatrix probs = logits;
    softmax_rows(probs);

    if (trace != nullptr) {
        trace->mask = std::move(mask);
        trace->hd = std::move(hd);
        trace->probs = probs;
    }
    return {std::move(logits), std::move(probs)};
}

Gradients LstmModel::backward(const LstmTrace& t) const {
    if (t.sentence == nullptr || t.ids.empty() || t.h.size() != t.ids.size()) {
        throw std::invalid_argument("backward: trace does not match a forward pass");
    }
    const std::size_t steps = t.ids.size();
    const std::int32_t label = t.sentence->label;
    check_label(label, num_classes_);

    DenseMatrix dlogits = t.probs;
    dlogits(0, static_cast<std::size_t>(label)) -= 1.0;

    Gradients g;
    g.dense.emplace("head.weight", matmul(t.hd.transpose(), dlogits));
    g.dense.emplace("head.bias", dlogits);

    DenseMatrix dh = matmul(dlogits, head_w.transpose());
    if (t.train_mode) {
        dh = hadamard(dh, t.mask);
    }
    DenseMatrix dc(1, hidden_, 0.0);

    const std::size_t in = embedding_output_dim(embedding_);
    DenseMatrix gwxi(in, hidden_, 0.0), gwhi(hidden_, hidden_, 0.0), gbi(1, hidden_, 0.0);
    DenseMatrix gwxf(in, hidden_, 0.0), gwhf(hidden_, hidden_, 0.0), gbf(1, hidden_, 0.0);
    DenseMatrix gwxo(in, hidden_, 0.0), gwho(hidden_, hidden_, 0.0), gbo(1, hidden_, 0.0);
    DenseMatrix gwxg(in, hidden_, 0.0), gwhg(hidden_, hidden_, 0.0), gbg(1, hidden_, 0.0);

    const auto* fact = std::get_if<FactorizedEmbedding>(&embedding_);
    DenseMatrix gwb;
    if (fact != nullptr) {
        gwb = DenseMatrix(fact->w_b.rows(), fact->w_b.cols(), 0.0);
    }

    const DenseMatrix zero(1, hidden_, 0.0);
    for (std::size_t step = steps; step-- > 0;) {
        const DenseMatrix& gi = t.i[step];
        const DenseMatrix& gf = t.f[step];
        const DenseMatrix& go = t.o[step];
        const DenseMatrix& gg = t.g[step];
        const DenseMatrix& ct = t.c[step];
        const DenseMatrix& c_prev = step > 0 ? t.c[step - 1] : zero;
        const DenseMatrix& h_prev = step > 0 ? t.h[step - 1] : zero;

        DenseMatrix dai(1, hidden_, 0.0), daf(1, hidden_, 0.0), dao(1, hidden_, 0.0),
            dag(1, hidden_, 0.0), dc_prev(1, hidden_, 0.0);
        for (std::size_t j = 0; j < hidden_; ++j) {
            const double tc = std::tanh(ct(0, j));
            const double do_j = dh(0, j) * tc;
            const double dc_j = dc(0, j) + dh(0, j) * go(0, j) * (1.0 - tc * tc);
            const double di_j = dc_j * gg(0, j);
            const double dg_j = dc_j * gi(0, j);
            const double df_j = dc_j * c_prev(0, j);
            dc_prev(0, j) = dc_j * gf(0, j);
            dai(0, j) = di_j * gi(0, j) * (1.0 - gi(0, j));
            daf(0, j) = df_j * gf(0, j) * (1.0 - gf(0, j));
            dao(0, j) = do_j * go(0, j) * (1.0 - go(0, j));
            dag(0, j) = dg_j * (1.0 - gg(0, j) * gg(0, j));
        }

        const DenseMatrix xt_t = t.x[step].transpose();
        const DenseMatrix hp_t = h_prev.transpose();
        gwxi.axpy(1.0, matmul(xt_t, dai));
        gwhi.axpy(1.0, matmul(hp_t, dai));
        gbi.axpy(1.0, dai);
        gwxf.axpy(1.0, matmul(xt_t, daf));
        gwhf.axpy(1.0, matmul(hp_t, daf));
        gbf.axpy(1.0, daf);
        gwxo.axpy(1.0, matmul(xt_t, dao));
        gwho.axpy(1.0, matmul(hp_t, dao));
        gbo.axpy(1.0, dao);
        gwxg.axpy(1.0, matmul(xt_t, dag));
        gwhg.axpy(1.0, matmul(hp_t, dag));
        gbg.axpy(1.0, dag);

        DenseMatrix dx = matmul(dai, wxi.transpose());
        dx.axpy(1.0, matmul(daf, wxf.transpose()));
        dx.axpy(1.0, matmul(dao, wxo.transpose()));
        dx.axpy(1.0, matmul(dag, wxg.transpose()));

        DenseMatrix dh_prev = matmul(dai, whi.transpose());
        dh_prev.axpy(1.0, matmul(daf, whf.transpose()));
        dh_prev.axpy(1.0, matmul(dao, who.transpose()));
        dh_prev.axpy(1.0, matmul(dag, whg.transpose()));

        if (fact != nullptr) {
            gwb.axpy(1.0, matmul(t.xa[step].transpose(), dx));
            const DenseMatrix dxa = matmul(dx, fact->w_b.transpose());
            g.accumulate_row(t.ids[step], dxa.row(0), 1.0);
        } else {
            g.accumulate_row(t.ids[step], dx.row(0), 1.0);
        }

        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
    }

    g.dense.emplace("lstm.wxi", std::move(gwxi));
    g.dense.emplace("lstm.whi", std::move(gwhi));
    g.dense.emplace("lstm.bi", std::move(gbi));
    g.dense.emplace("lstm.wxf", std::move(gwxf));
    g.dense.emplace("lstm.whf", std::move(gwhf));
    g.dense.emplace("lstm.bf", std::move(gbf));
    g.dense.emplace("lstm.wxo", std::move(gwxo));
    g.dense.emplace("lstm.who", std::move(gwho));
    g.dense.emplace("lstm.bo", std::move(gbo));
    g.dense.emplace("lstm.wxg", std::move(gwxg));
    g.dense.emplace("lstm.whg", std::move(gwhg));
    g.dense.emplace("lstm.bg", std::move(gbg));
    if (fact != nullptr) {
        g.dense.emplace("embedding.w_b", std::move(gwb));
    }
    return g;
}

void LstmModel::replace_embedding(EmbeddingLayer e) {
    if (embedding_output_dim(e) != embedding_output_dim(embedding_) ||
        embedding_vocab_size(e) != embedding_vocab_size(embedding_)) {
        throw std::invalid_argument("replacement embedding must keep vocab and output width");
    }
    embedding_ = std::move(e);
}

std::vector<NamedParam> LstmModel::dense_params() {
    std::vector<NamedParam> params;
    if (auto* fact = std::get_if<FactorizedEmbedding>(&embedding_)) {
        params.push_back({"embedding.w_b", &fact->w_b});
    }
    params.push_back({"lstm.wxi", &wxi});
    params.push_back({"lstm.whi", &whi});
    params.push_back({"lstm.bi", &bi});
    params.push_back({"lstm.wxf", &wxf});
    params.push_back({"lstm.whf", &whf});
    params.push_back({"lstm.bf", &bf});
    params.push_back({"lstm.wxo", &wxo});
    params.push_back({"lstm.who", &who});
    params.push_back({"lstm.bo", &bo});
    params.push_back({"lstm.wxg", &wxg});
    params.push_back({"lstm.whg", &whg});
    params.push_back({"lstm.bg", &bg});
    params.push_back({"head.weight", &head_w});
    params.push_back({"head.bias", &head_b});
    return params;
}

std::vector<std::pair<std::string, const DenseMatrix*>> LstmModel::named_tensors() const {
    std::vector<std::pair<std::string, const DenseMatrix*>> out;
    if (const auto* table = std::get_if<EmbeddingTable>(&embedding_)) {
        out.emplace_back("embedding.table", &table->weights);
    } else {
        const auto& fact = std::get<FactorizedEmbedding>(embedding_);
        out.emplace_back("embedding.w_a", &fact.w_a);
        out.emplace_back("embedding.w_b", &fact.w_b);
    }
    out.emplace_back("lstm.wxi", &wxi);
    out.emplace_back("lstm.whi", &whi);
    out.emplace_back("lstm.bi", &bi);
    out.emplace_back("lstm.wxf", &wxf);
    out.emplace_back("lstm.whf", &whf);
    out.emplace_back("lstm.bf", &bf);
    out.emplace_back("lstm.wxo", &wxo);
    out.emplace_back("lstm.who", &who);
    out.emplace_back("lstm.bo", &bo);
    out.emplace_back("lstm.wxg", &wxg);
    out.emplace_back("lstm.whg", &whg);
    out.emplace_back("lstm.bg", &bg);
    out.emplace_back("head.weight", &head_w);
    out.emplace_back("head.bias", &head_b);
    return out;
}

double LstmModel::batch_gradients(const std::vector<const Sentence*>& batch, double dropout,
                                  Rng* rng, Gradients& out) {
    if (batch.empty()) {
        throw std::invalid_argument("batch_gradients: empty batch");
    }
    out = Gradients{};
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const Sentence* s : batch) {
        LstmTrace trace;
        const ModelOutput o = forward(*s, dropout, rng, &trace);
        loss += cross_entropy(o.probs.row(0), s->label);
        merge_scaled(out, backward(trace), inv_b);
    }
    return loss * inv_b;
}

std::int32_t LstmModel::predict(const Sentence& s) const {
    const ModelOutput o = forward(s, 0.0, nullptr, nullptr);
    return argmax_row(o.probs.row(0));
}

std::unique_ptr<Model> LstmModel::clone() const {
    return std::make_unique<LstmModel>(*this);
}

std::size_t LstmModel::num_parameters() const {
    std::size_t n = wxi.size() + whi.size() + bi.size() + wxf.size() + whf.size() + bf.size() +
                    wxo.size() + who.size() + bo.size() + wxg.size() + whg.size() + bg.size() +
                    head_w.size() + head_b.size();
    if (const auto* table = std::get_if<EmbeddingTable>(&embedding_)) {
        n += table->weights.size();
    } else {
        const auto& fact = std::get<FactorizedEmbedding>(embedding_);
        n += fact.w_a.size() + fact.w_b.size();
    }
    return n;
}

namespace {

void expect_shape(const std::string& name, const DenseMatrix& m, std::size_t rows,
                  std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) {
        throw std::invalid_argument("tensor " + name + " has shape " + m.shape_str() +
                                    ", expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
}

}  // namespace

std::unique_ptr<Model> assemble_model(const std::string& kind,
                                      std::vector<std::pair<std::string, DenseMatrix>> tensors) {
    std::map<std::string, DenseMatrix> pool;
    for (auto& [name, m] : tensors) {
        if (!pool.emplace(name, std::move(m)).second) {
            throw std::invalid_argument("duplicate tensor: " + name);
        }
    }
    const auto take = [&pool](const std::string& name) {
        const auto it = pool.find(name);
        if (it == pool.end()) {
            throw std::invalid_argument("missing tensor: " + name);
        }
        DenseMatrix m = std::move(it->second);
        pool.erase(it);
        return m;
    };

    EmbeddingLayer emb;
    if (pool.contains("embedding.table")) {
        emb = EmbeddingTable{take("embedding.table")};
    } else {
        DenseMatrix wa = take("embedding.w_a");
        DenseMatrix wb = take("embedding.w_b");
        if (wa.cols() != wb.rows()) {
            throw std::invalid_argument("embedding factors disagree: " + wa.shape_str() + " * " +
                                        wb.shape_str());
        }
        const std::size_t k = wa.cols();
        emb = FactorizedEmbedding{std::move(wa), std::move(wb), k};
    }
    const std::size_t in = embedding_output_dim(emb);

    DenseMatrix head_bias = take("head.bias");
    if (head_bias.rows() != 1 || head_bias.cols() < 2) {
        throw std::invalid_argument("head.bias must be 1 x num_classes with at least 2 classes");
    }
    const auto classes = static_cast<std::int32_t>(head_bias.cols());
    const auto classes_sz = head_bias.cols();

    if (kind == "dan") {
        auto model = std::make_unique<DanModel>(std::move(emb), classes, 0);
        model->fc1_w = take("fc1.weight");
        model->fc1_b = take("fc1.bias");
        model->fc2_w = take("fc2.weight");
        model->fc2_b = take("fc2.bias");
        model->head_w = take("head.weight");
        model->head_b = std::move(head_bias);
        expect_shape("fc1.weight", model->fc1_w, in, DanModel::kHidden1);
        expect_shape("fc1.bias", model->fc1_b, 1, DanModel::kHidden1);
        expect_shape("fc2.weight", model->fc2_w, DanModel::kHidden1, DanModel::kHidden2);
        expect_shape("fc2.bias", model->fc2_b, 1, DanModel::kHidden2);
        expect_shape("head.weight", model->head_w, DanModel::kHidden2, classes_sz);
        if (!pool.empty()) {
            throw std::invalid_argument("unexpected tensor: " + pool.begin()->first);
        }
        return model;
    }
    if (kind == "lstm") {
        DenseMatrix head_w = take("head.weight");
        const std::size_t hidden = head_w.rows();
        auto model = std::make_unique<LstmModel>(std::move(emb), classes, hidden, 0);
        model->wxi = take("lstm.wxi");
        model->whi = take("lstm.whi");
        model->bi = take("lstm.bi");
        model->wxf = take("lstm.wxf");
        model->whf = take("lstm.whf");
        model->bf = take("lstm.bf");
        model->wxo = take("lstm.wxo");
        model->who = take("lstm.who");
        model->bo = take("lstm.bo");
        model->wxg = take("lstm.wxg");
        model->whg = take("lstm.whg");
        model->bg = take("lstm.bg");
        model->head_w = std::move(head_w);
        model->head_b = std::move(head_bias);
        for (const auto* gate : {&model->wxi, &model->wxf, &model->wxo, &model->wxg}) {
            expect_shape("lstm input weights", *gate, in, hidden);
        }
        for (const auto* gate : {&model->whi, &model->whf, &model->who, &model->whg}) {
            expect_shape("lstm hidden weights", *gate, hidden, hidden);
        }
        for (const auto* b : {&model->bi, &model->bf, &model->bo, &model->bg}) {
            expect_shape("lstm gate bias", *b, 1, hidden);
        }
        expect_shape("head.weight", model->head_w, hidden, classes_sz);
        if (!pool.empty()) {
            throw std::invalid_argument("unexpected tensor: " + pool.begin()->first);
        }
        return model;
    }
    throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace emsq
