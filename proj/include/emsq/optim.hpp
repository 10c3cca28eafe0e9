// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "emsq/data.hpp"
#include "emsq/models.hpp"

namespace emsq {

/// Cyclically annealed learning-rate schedule settings. A step_size of 0
/// means "auto": the training loop substitutes 2 x batches-per-epoch.
struct CalrConfig {
    double lr_lb = 1e-5;
    double lr_ub_init = 0.001;
    std::size_t step_size = 0;
    double decay = -0.05;
};

struct CalrState {
    double current_ub = 0.0;
    std::uint64_t iteration = 0;  // global batch counter, never reset
    std::uint64_t epoch = 0;      // completed epoch-start updates
};

/// Triangular cyclical learning rate: rises from lr_lb to lr_ub over
/// step_size iterations, then falls back symmetrically.
double clr(std::uint64_t iteration, std::size_t step_size, double lr_lb, double lr_ub);

/// Epoch-start update: the upper bound decays by exp(cfg.decay); once it
/// falls to lr_lb or below it warm-restarts to lr_ub_init.
CalrState calr_epoch_update(CalrState state, const CalrConfig& cfg);

enum class Schedule { constant, clr, calr, adagrad };

Schedule schedule_from_string(const std::string& name);
const char* schedule_name(Schedule s);

struct TrainConfig {
    double l2_weight = 0.005;
    double dropout = 0.4;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    Schedule schedule = Schedule::calr;
    double constant_lr = 0.001;  // used by the constant and adagrad schedules
};

struct MetricsRow {
    std::uint64_t batch_index = 0;
    std::uint64_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    bool has_dev = false;
    double dev_accuracy = 0.0;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
};

/// Per-tensor squared-gradient accumulators; the embedding accumulator is
/// sized lazily on first use.
struct AdagradState {
    std::map<std::string, DenseMatrix> acc;
    DenseMatrix embedding_acc;
    bool embedding_acc_ready = false;
};

/// w <- w - lr * (g + l2_weight * w) for every dense tensor, and for each
/// embedding row touched by the batch (untouched rows decay lazily, i.e.
/// not at all this step).
void sgd_step(Model& model, const Gradients& g, double lr, double l2_weight);

/// Standard AdaGrad: acc += g^2; w <- w - lr * g / (sqrt(acc) + 1e-8).
void adagrad_step(Model& model, const Gradients& g, double lr, AdagradState& state);

struct TrainResult {
    std::unique_ptr<Model> best_model;  // snapshot at the best dev accuracy
    double best_dev_accuracy = 0.0;
    std::uint64_t best_epoch = 0;
    double final_train_loss = 0.0;
    MetricsLog log;
};

/// Runs the full mini-batch loop: per epoch a seeded shuffle, per batch a
/// scheduled learning rate, forward/backward, and an update; dev accuracy
/// is logged once per epoch on the last batch row.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg, const CalrConfig& calr_cfg);

}  // namespace emsq
