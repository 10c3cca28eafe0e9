// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "emsq/data.hpp"
#include "emsq/optim.hpp"

namespace emsq {

struct SyntheticSpec {
    std::int32_t num_classes = 4;
    std::size_t vocab_size = 500;
    std::size_t sentences_per_class = 625;
    double sep = 0.9;
};

struct DataConfig {
    std::string mode = "synthetic";  // synthetic | tsv
    std::string train_path;
    std::string dev_path;
    std::string test_path;
    SyntheticSpec synthetic;
    std::size_t min_count = 1;
};

struct EmbeddingConfig {
    std::string source = "random";  // random | glove
    std::size_t dim = 64;           // random source only; glove uses the file's width
    std::string glove_path;
};

struct CompressConfig {
    double p = 0.1;                  // retained parameter fraction
    std::size_t retrain_epochs = 0;  // 0: reuse train.epochs
};

/// Everything a pipeline run needs; every field has a working default so a
/// minimal JSON config (or none) runs end to end.
struct PipelineConfig {
    std::string model_kind = "dan";  // dan | lstm
    std::size_t lstm_hidden = 168;
    DataConfig data;
    EmbeddingConfig embedding;
    TrainConfig train;
    CalrConfig calr;
    CompressConfig compress;
    int quantize_bits = 8;
    std::string out_dir = "out";

    void validate() const;
};

/// Parses the JSON config; unknown keys are errors, "r" and "p" in the
/// compress section are mutually exclusive (r is converted to p = 1 - r).
PipelineConfig config_from_json_text(const std::string& text, const std::string& origin);
PipelineConfig config_from_json_file(const std::string& path);

struct Corpus {
    Vocabulary vocab;
    Dataset train;
    Dataset dev;
    Dataset test;
};

/// Builds or loads the configured corpus. With fixed_vocab given (a saved
/// vocabulary), TSV splits are indexed against it and a regenerated
/// synthetic corpus must reproduce it exactly.
Corpus build_corpus(const PipelineConfig& cfg, const Vocabulary* fixed_vocab);

/// Trains the uncompressed model; writes model.bin, vocab.txt, metrics.csv,
/// summary_train.txt under out_dir.
void cmd_train(const PipelineConfig& cfg);

/// Factorizes a trained model's embedding at cfg.compress.p and retrains;
/// writes model_compressed.bin, metrics_retrain.csv, summary_compress.txt.
/// model_path "" means out_dir/model.bin.
void cmd_compress_retrain(const PipelineConfig& cfg, const std::string& model_path);

/// Post-training quantization at the given width; writes model_q{bits}.bin
/// and summary_quantize.txt.
void cmd_quantize(const PipelineConfig& cfg, const std::string& model_path, int bits);

/// Accuracy (plus per-class counts) of any saved model on one split;
/// writes summary_eval.txt. Wall-clock timing goes to stdout only.
void cmd_eval(const PipelineConfig& cfg, const std::string& model_path, const std::string& split);

/// Cost-model table over a list of retained fractions; writes analyze.csv
/// and analyze.txt.
void cmd_analyze(const PipelineConfig& cfg, std::size_t m, std::size_t n,
                 const std::vector<double>& p_list, int bits);

/// Trains on a k-dimensional embedding chosen before training (offline
/// baseline); writes model_offline.bin, metrics_offline.csv,
/// summary_offline.txt.
void cmd_baseline_offline(const PipelineConfig& cfg);

/// Uncompressed, quantized, factorize+retrain, and offline baselines across
/// a list of reduction fractions; writes sweep.csv and summary_sweep.txt.
void cmd_sweep(const PipelineConfig& cfg, const std::vector<double>& r_list);

}  // namespace emsq
