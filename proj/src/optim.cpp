// SPDX-License-Identifier: Apache-2.0
#include "emsq/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <variant>

#include "emsq/rng.hpp"

namespace emsq {

namespace {

DenseMatrix& lookup_matrix_mut(EmbeddingLayer& e) {
    if (auto* table = std::get_if<EmbeddingTable>(&e)) {
        return table->weights;
    }
    return std::get<FactorizedEmbedding>(e).w_a;
}

const DenseMatrix& find_grad(const Gradients& g, const std::string& name,
                             const DenseMatrix& param) {
    const auto it = g.dense.find(name);
    if (it == g.dense.end()) {
        throw std::invalid_argument("missing gradient for parameter " + name);
    }
    if (!it->second.same_shape(param)) {
        throw std::invalid_argument("gradient shape mismatch for " + name + ": " +
                                    it->second.shape_str() + " vs " + param.shape_str());
    }
    return it->second;
}

void check_row(const EmbeddingLayer& e, const DenseMatrix& lut, std::int32_t row,
               std::size_t grad_len) {
    (void)e;
    if (row < 0 || static_cast<std::size_t>(row) >= lut.rows()) {
        throw std::out_of_range("embedding row " + std::to_string(row) + " out of range");
    }
    if (grad_len != lut.cols()) {
        throw std::invalid_argument("embedding row gradient length " + std::to_string(grad_len) +
                                    " does not match width " + std::to_string(lut.cols()));
    }
}

void validate_calr(const CalrConfig& cfg, bool need_decay) {
    if (!(cfg.lr_lb > 0.0) || !(cfg.lr_ub_init > cfg.lr_lb)) {
        throw std::invalid_argument("learning-rate bounds need 0 < lr_lb < lr_ub_init");
    }
    if (need_decay && !(cfg.decay < 0.0)) {
        throw std::invalid_argument("the annealed schedule needs decay < 0");
    }
}

}  // namespace

double clr(std::uint64_t iteration, std::size_t step_size, double lr_lb, double lr_ub) {
    if (step_size < 1) {
        throw std::invalid_argument("clr: step_size must be at least 1");
    }
    if (lr_lb > lr_ub) {
        throw std::invalid_argument("clr: lr_lb must not exceed lr_ub");
    }
    const double bump = (lr_ub - lr_lb) / static_cast<double>(step_size);
    const std::uint64_t cycle = iteration % (2 * static_cast<std::uint64_t>(step_size));
    if (cycle < step_size) {
        return lr_lb + static_cast<double>(cycle) * bump;
    }
    return lr_ub - static_cast<double>(cycle - step_size) * bump;
}

CalrState calr_epoch_update(CalrState state, const CalrConfig& cfg) {
    state.current_ub *= std::exp(cfg.decay);
    if (state.current_ub <= cfg.lr_lb) {
        state.current_ub = cfg.lr_ub_init;
    }
    ++state.epoch;
    return state;
}

Schedule schedule_from_string(const std::string& name) {
    if (name == "constant") return Schedule::constant;
    if (name == "clr") return Schedule::clr;
    if (name == "calr") return Schedule::calr;
    if (name == "adagrad") return Schedule::adagrad;
    throw std::invalid_argument("unknown schedule: " + name +
                                " (expected constant, clr, calr, or adagrad)");
}

const char* schedule_name(Schedule s) {
    switch (s) {
        case Schedule::constant: return "constant";
        case Schedule::clr: return "clr";
        case Schedule::calr: return "calr";
        case Schedule::adagrad: return "adagrad";
    }
    return "unknown";
}

void sgd_step(Model& model, const Gradients& g, double lr, double l2_weight) {
    for (const NamedParam& p : model.dense_params()) {
        const DenseMatrix& grad = find_grad(g, p.name, *p.value);
        double* w = p.value->data();
        const double* gw = grad.data();
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            w[i] -= lr * (gw[i] + l2_weight * w[i]);
        }
    }
    DenseMatrix& lut = lookup_matrix_mut(model.embedding());
    for (const auto& [row, grad] : g.embedding_rows) {
        check_row(model.embedding(), lut, row, grad.size());
        double* w = lut.data() + static_cast<std::size_t>(row) * lut.cols();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            w[i] -= lr * (grad[i] + l2_weight * w[i]);
        }
    }
}

void adagrad_step(Model& model, const Gradients& g, double lr, AdagradState& state) {
    constexpr double kEps = 1e-8;
    for (const NamedParam& p : model.dense_params()) {
        const DenseMatrix& grad = find_grad(g, p.name, *p.value);
        DenseMatrix& acc =
            state.acc.try_emplace(p.name, p.value->rows(), p.value->cols(), 0.0).first->second;
        if (!acc.same_shape(*p.value)) {
            throw std::invalid_argument("adagrad accumulator shape mismatch for " + p.name);
        }
        double* w = p.value->data();
        double* a = acc.data();
        const double* gw = grad.data();
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            a[i] += gw[i] * gw[i];
            w[i] -= lr * gw[i] / (std::sqrt(a[i]) + kEps);
        }
    }
    DenseMatrix& lut = lookup_matrix_mut(model.embedding());
    if (!state.embedding_acc_ready) {
        state.embedding_acc = DenseMatrix(lut.rows(), lut.cols(), 0.0);
        state.embedding_acc_ready = true;
    }
    if (!state.embedding_acc.same_shape(lut)) {
        throw std::invalid_argument("adagrad embedding accumulator shape mismatch");
    }
    for (const auto& [row, grad] : g.embedding_rows) {
        check_row(model.embedding(), lut, row, grad.size());
        double* w = lut.data() + static_cast<std::size_t>(row) * lut.cols();
        double* a = state.embedding_acc.data() + static_cast<std::size_t>(row) * lut.cols();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            a[i] += grad[i] * grad[i];
            w[i] -= lr * grad[i] / (std::sqrt(a[i]) + kEps);
        }
    }
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, const CalrConfig& calr_cfg) {
    if (train_set.sentences.empty() || dev_set.sentences.empty()) {
        throw std::invalid_argument("train: datasets must be non-empty");
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1) {
        throw std::invalid_argument("train: batch_size and epochs must be positive");
    }
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw std::invalid_argument("train: dropout must be in [0, 1)");
    }

    CalrConfig calr = calr_cfg;
    const std::size_t batches_per_epoch =
        (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    if (calr.step_size == 0) {
        calr.step_size = 2 * batches_per_epoch;
    }
    if (cfg.schedule == Schedule::clr || cfg.schedule == Schedule::calr) {
        validate_calr(calr, cfg.schedule == Schedule::calr);
    }

    CalrState state{calr.lr_ub_init, 0, 0};
    AdagradState adagrad;
    Rng dropout_rng(derive_seed(cfg.seed, 3));

    TrainResult result;
    double best_acc = -1.0;
    double last_loss = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.schedule == Schedule::calr) {
            state = calr_epoch_update(state, calr);
        }
        const auto groups = batches(train_set.size(), cfg.batch_size, cfg.seed, epoch);
        for (const auto& group : groups) {
            double lr = cfg.constant_lr;
            if (cfg.schedule == Schedule::clr) {
                lr = clr(state.iteration, calr.step_size, calr.lr_lb, calr.lr_ub_init);
            } else if (cfg.schedule == Schedule::calr) {
                lr = clr(state.iteration, calr.step_size, calr.lr_lb, state.current_ub);
            }

            std::vector<const Sentence*> batch;
            batch.reserve(group.size());
            for (const std::size_t idx : group) {
                batch.push_back(&train_set.sentences[idx]);
            }

            Gradients grads;
            last_loss = model.batch_gradients(batch, cfg.dropout, &dropout_rng, grads);
            if (cfg.schedule == Schedule::adagrad) {
                adagrad_step(model, grads, cfg.constant_lr, adagrad);
            } else {
                sgd_step(model, grads, lr, cfg.l2_weight);
            }

            MetricsRow row;
            row.batch_index = state.iteration;
            row.epoch = epoch;
            row.lr = lr;
            row.train_loss = last_loss;
            result.log.rows.push_back(row);
            ++state.iteration;
        }

        const double acc = evaluate(model, dev_set).accuracy;
        result.log.rows.back().has_dev = true;
        result.log.rows.back().dev_accuracy = acc;
        if (acc > best_acc) {
            best_acc = acc;
            result.best_model = model.clone();
            result.best_epoch = epoch;
        }
    }

    result.best_dev_accuracy = best_acc;
    result.final_train_loss = last_loss;
    return result;
}

}  // namespace emsq
