// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emsq/data.hpp"
#include "emsq/embedding.hpp"
#include "emsq/matrix.hpp"
#include "emsq/rng.hpp"

namespace emsq {

/// Logits and row-softmax probabilities, one row per sentence.
struct ModelOutput {
    DenseMatrix logits;
    DenseMatrix probs;
};

/// Loss gradients for one batch. Dense tensors are keyed by parameter name;
/// embedding rows (table rows, or w_a rows when factorized) are sparse, and
/// rows untouched by the batch are absent.
struct Gradients {
    std::map<std::string, DenseMatrix> dense;
    std::map<std::int32_t, std::vector<double>> embedding_rows;

    void accumulate_row(std::int32_t row, std::span<const double> grad, double weight);
};

struct NamedParam {
    std::string name;
    DenseMatrix* value;
};

/// Row-wise softmax with max subtraction; rows end up positive and summing
/// to 1 up to rounding.
void softmax_rows(DenseMatrix& logits);

/// -log p[label], with p clamped below at 1e-12.
double cross_entropy(std::span<const double> probs, std::int32_t label);

/// Inverted-dropout multipliers: each entry is 1/(1-rate) with probability
/// 1-rate and 0 otherwise, so the masked activation is unbiased.
DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

/// Argmax with ties going to the lowest class index.
std::int32_t argmax_row(std::span<const double> row);

/// What the training loop and pipeline need from a classifier.
class Model {
public:
    virtual ~Model() = default;

    virtual const char* kind() const = 0;
    virtual std::int32_t num_classes() const = 0;

    virtual EmbeddingLayer& embedding() = 0;
    virtual const EmbeddingLayer& embedding() const = 0;
    /// Swaps the embedding layer in place; the replacement must keep the
    /// same output width.
    virtual void replace_embedding(EmbeddingLayer e) = 0;

    /// Dense trainable tensors in a fixed order (embedding tables are
    /// handled through the sparse row path instead).
    virtual std::vector<NamedParam> dense_params() = 0;

    /// Every tensor exactly once, embedding first, in a canonical order
    /// shared by serialization and quantization.
    virtual std::vector<std::pair<std::string, const DenseMatrix*>> named_tensors() const = 0;

    /// Mean cross-entropy over the batch; writes data gradients of that mean
    /// into `out`. dropout > 0 needs an rng and marks train mode.
    virtual double batch_gradients(const std::vector<const Sentence*>& batch, double dropout,
                                   Rng* rng, Gradients& out) = 0;

    virtual std::int32_t predict(const Sentence& s) const = 0;
    virtual std::unique_ptr<Model> clone() const = 0;
    virtual std::size_t num_parameters() const = 0;
};

/// Accuracy plus per-class tallies over a dataset, eval mode.
struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::size_t> per_class_correct;
    std::vector<std::size_t> per_class_total;
};

EvalResult evaluate(const Model& model, const Dataset& data);

/// Rebuilds a model from named tensors, reversing named_tensors(). kind is
/// "dan" or "lstm"; LSTM hidden width comes from the head shape.
std::unique_ptr<Model> assemble_model(const std::string& kind,
                                      std::vector<std::pair<std::string, DenseMatrix>> tensors);

/// Cached activations of one DAN batch forward, enough to replay backward.
struct DanTrace {
    std::vector<const Sentence*> batch;
    bool factorized = false;
    bool train_mode = false;
    DenseMatrix xa;   // batch x k mean of looked-up rows (or batch x dim when plain)
    DenseMatrix x;    // fc1 input; equals xa unless factorized
    DenseMatrix h1;   // post-ReLU
    DenseMatrix m1;   // dropout multipliers (all ones in eval mode)
    DenseMatrix h1d;  // h1 * m1
    DenseMatrix h2;
    DenseMatrix m2;
    DenseMatrix h2d;
    DenseMatrix probs;
};

/// Bag-of-words classifier: mean embedding, two ReLU layers of fixed sizes
/// 1024 and 512 with dropout after each, then a softmax head.
class DanModel final : public Model {
public:
    static constexpr std::size_t kHidden1 = 1024;
    static constexpr std::size_t kHidden2 = 512;

    DanModel(EmbeddingLayer embedding, std::int32_t num_classes, std::uint64_t seed);

    ModelOutput forward(const Sentence& s, double dropout, Rng* rng, DanTrace* trace) const;
    ModelOutput forward_batch(const std::vector<const Sentence*>& batch, double dropout, Rng* rng,
                              DanTrace* trace) const;
    /// Gradients of the mean cross-entropy of the traced batch.
    Gradients backward(const DanTrace& trace) const;

    const char* kind() const override { return "dan"; }
    std::int32_t num_classes() const override { return num_classes_; }
    EmbeddingLayer& embedding() override { return embedding_; }
    const EmbeddingLayer& embedding() const override { return embedding_; }
    void replace_embedding(EmbeddingLayer e) override;
    std::vector<NamedParam> dense_params() override;
    std::vector<std::pair<std::string, const DenseMatrix*>> named_tensors() const override;
    double batch_gradients(const std::vector<const Sentence*>& batch, double dropout, Rng* rng,
                           Gradients& out) override;
    std::int32_t predict(const Sentence& s) const override;
    std::unique_ptr<Model> clone() const override;
    std::size_t num_parameters() const override;

    DenseMatrix fc1_w, fc1_b;    // in x 1024, 1 x 1024
    DenseMatrix fc2_w, fc2_b;    // 1024 x 512, 1 x 512
    DenseMatrix head_w, head_b;  // 512 x classes, 1 x classes

private:
    EmbeddingLayer embedding_;
    std::int32_t num_classes_ = 0;
};

/// Cached activations of one LSTM sentence forward.
struct LstmTrace {
    const Sentence* sentence = nullptr;
    std::vector<std::int32_t> ids;  // after truncation
    bool factorized = false;
    bool train_mode = false;
    std::vector<DenseMatrix> xa;  // 1 x k looked-up w_a rows (factorized only)
    std::vector<DenseMatrix> x;   // 1 x in, per timestep
    std::vector<DenseMatrix> i, f, o, g;
    std::vector<DenseMatrix> c, h;
    DenseMatrix mask;  // dropout multipliers on the final hidden state
    DenseMatrix hd;    // masked final hidden state
    DenseMatrix probs;
};

/// Single-layer LSTM; the classification head reads the final timestep's
/// hidden state.
class LstmModel final : public Model {
public:
    static constexpr std::size_t kDefaultHidden = 168;
    static constexpr std::size_t kDefaultMaxLen = 400;

    LstmModel(EmbeddingLayer embedding, std::int32_t num_classes, std::size_t hidden,
              std::uint64_t seed, std::size_t max_len = kDefaultMaxLen);

    ModelOutput forward(const Sentence& s, double dropout, Rng* rng, LstmTrace* trace) const;
    Gradients backward(const LstmTrace& trace) const;

    const char* kind() const override { return "lstm"; }
    std::int32_t num_classes() const override { return num_classes_; }
    EmbeddingLayer& embedding() override { return embedding_; }
    const EmbeddingLayer& embedding() const override { return embedding_; }
    void replace_embedding(EmbeddingLayer e) override;
    std::vector<NamedParam> dense_params() override;
    std::vector<std::pair<std::string, const DenseMatrix*>> named_tensors() const override;
    double batch_gradients(const std::vector<const Sentence*>& batch, double dropout, Rng* rng,
                           Gradients& out) override;
    std::int32_t predict(const Sentence& s) const override;
    std::unique_ptr<Model> clone() const override;
    std::size_t num_parameters() const override;

    std::size_t hidden() const { return hidden_; }
    std::size_t max_len() const { return max_len_; }

    DenseMatrix wxi, whi, bi;    // input gate
    DenseMatrix wxf, whf, bf;    // forget gate
    DenseMatrix wxo, who, bo;    // output gate
    DenseMatrix wxg, whg, bg;    // cell candidate
    DenseMatrix head_w, head_b;  // hidden x classes, 1 x classes

private:
    EmbeddingLayer embedding_;
    std::int32_t num_classes_ = 0;
    std::size_t hidden_ = kDefaultHidden;
    std::size_t max_len_ = kDefaultMaxLen;
};

}  // namespace emsq
