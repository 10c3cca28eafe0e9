// SPDX-License-Identifier: Apache-2.0
#include "emsq/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <utility>
#include <variant>

#include "json.hpp"

#include "emsq/analysis.hpp"
#include "emsq/embedding.hpp"
#include "emsq/models.hpp"
#include "emsq/quantize.hpp"
#include "emsq/rng.hpp"
#include "emsq/serialize.hpp"

namespace emsq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename... Args>
std::string strfmt(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return std::string(buf);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

void emit_summary(const std::string& path, const std::string& content) {
    write_text_file(path, content);
    std::cout << content;
}

std::string metrics_csv(const MetricsLog& log) {
    std::string out = "batch_index,epoch,lr,train_loss,dev_accuracy\n";
    for (const MetricsRow& r : log.rows) {
        out += strfmt("%llu,%llu,%.10f,%.10f,", static_cast<unsigned long long>(r.batch_index),
                      static_cast<unsigned long long>(r.epoch), r.lr, r.train_loss);
        if (r.has_dev) {
            out += strfmt("%.4f", r.dev_accuracy);
        }
        out += "\n";
    }
    return out;
}

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            const std::string where = section.empty() ? it.key() : section + "." + it.key();
            throw std::runtime_error("unknown config key: " + where);
        }
    }
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

std::string resolve_model_path(const PipelineConfig& cfg, const std::string& given) {
    return given.empty() ? out_path(cfg, "model.bin") : given;
}

std::string sibling_vocab_path(const std::string& model_path) {
    const fs::path parent = fs::path(model_path).parent_path();
    return (parent.empty() ? fs::path("vocab.txt") : parent / "vocab.txt").string();
}

struct EmbeddingBuild {
    EmbeddingTable table;
    bool glove = false;
    double coverage = 0.0;
};

EmbeddingBuild build_embedding(const PipelineConfig& cfg, const Vocabulary& vocab) {
    if (cfg.embedding.source == "random") {
        return {random_init(vocab.size(), cfg.embedding.dim, derive_seed(cfg.train.seed, 7)),
                false, 0.0};
    }
    GloveLoad gl = load_glove_text(cfg.embedding.glove_path, vocab, derive_seed(cfg.train.seed, 7));
    return {std::move(gl.table), true, gl.coverage};
}

std::unique_ptr<Model> make_model(const PipelineConfig& cfg, EmbeddingTable table,
                                  std::int32_t num_classes) {
    EmbeddingLayer layer{std::move(table)};
    if (cfg.model_kind == "dan") {
        return std::make_unique<DanModel>(std::move(layer), num_classes, cfg.train.seed);
    }
    return std::make_unique<LstmModel>(std::move(layer), num_classes, cfg.lstm_hidden,
                                       cfg.train.seed);
}

void check_model_matches(const PipelineConfig& cfg, const Model& model, const Corpus& corpus) {
    if (model.kind() != cfg.model_kind) {
        throw std::runtime_error("config model_kind " + cfg.model_kind +
                                 " does not match saved model kind " + model.kind());
    }
    if (embedding_vocab_size(model.embedding()) != corpus.vocab.size()) {
        throw std::runtime_error(
            "model vocabulary size " +
            std::to_string(embedding_vocab_size(model.embedding())) +
            " does not match corpus vocabulary size " + std::to_string(corpus.vocab.size()));
    }
}

const Dataset& pick_split(const Corpus& corpus, const std::string& split) {
    if (split == "train") return corpus.train;
    if (split == "dev") return corpus.dev;
    if (split == "test") return corpus.test;
    throw std::invalid_argument("unknown split: " + split + " (expected train, dev, or test)");
}

TrainConfig retrain_config(const PipelineConfig& cfg) {
    TrainConfig rt = cfg.train;
    if (cfg.compress.retrain_epochs > 0) {
        rt.epochs = cfg.compress.retrain_epochs;
    }
    return rt;
}

double mb(std::size_t bytes) { return static_cast<double>(bytes) / 1e6; }

}  // namespace

void PipelineConfig::validate() const {
    if (model_kind != "dan" && model_kind != "lstm") {
        throw std::invalid_argument("model_kind must be dan or lstm, got " + model_kind);
    }
    if (lstm_hidden < 1) {
        throw std::invalid_argument("lstm_hidden must be positive");
    }
    if (data.mode != "synthetic" && data.mode != "tsv") {
        throw std::invalid_argument("data.mode must be synthetic or tsv, got " + data.mode);
    }
    if (data.mode == "tsv" &&
        (data.train_path.empty() || data.dev_path.empty() || data.test_path.empty())) {
        throw std::invalid_argument("tsv mode needs train, dev, and test paths");
    }
    if (embedding.source != "random" && embedding.source != "glove") {
        throw std::invalid_argument("embedding.source must be random or glove, got " +
                                    embedding.source);
    }
    if (embedding.source == "glove" && embedding.glove_path.empty()) {
        throw std::invalid_argument("embedding.source glove needs embedding.glove_path");
    }
    if (embedding.source == "random" && embedding.dim < 1) {
        throw std::invalid_argument("embedding.dim must be positive");
    }
    if (quantize_bits != 8 && quantize_bits != 16) {
        throw std::invalid_argument("quantize.bits must be 8 or 16");
    }
    if (!(compress.p > 0.0) || compress.p > 1.0) {
        throw std::invalid_argument("compress.p must be in (0, 1]");
    }
    if (out_dir.empty()) {
        throw std::invalid_argument("out_dir must not be empty");
    }
}

PipelineConfig config_from_json_text(const std::string& text, const std::string& origin) {
    PipelineConfig cfg;
    try {
        const json j = json::parse(text);
        check_keys(j, "", {"model", "data", "embedding", "train", "calr", "compress", "quantize",
                           "out_dir"});
        if (j.contains("model")) {
            const json& s = j.at("model");
            check_keys(s, "model", {"kind", "lstm_hidden"});
            cfg.model_kind = s.value("kind", cfg.model_kind);
            cfg.lstm_hidden = s.value("lstm_hidden", cfg.lstm_hidden);
        }
        if (j.contains("data")) {
            const json& s = j.at("data");
            check_keys(s, "data",
                       {"mode", "train", "dev", "test", "num_classes", "vocab_size",
                        "sentences_per_class", "sep", "min_count"});
            cfg.data.mode = s.value("mode", cfg.data.mode);
            cfg.data.train_path = s.value("train", cfg.data.train_path);
            cfg.data.dev_path = s.value("dev", cfg.data.dev_path);
            cfg.data.test_path = s.value("test", cfg.data.test_path);
            cfg.data.synthetic.num_classes =
                s.value("num_classes", cfg.data.synthetic.num_classes);
            cfg.data.synthetic.vocab_size = s.value("vocab_size", cfg.data.synthetic.vocab_size);
            cfg.data.synthetic.sentences_per_class =
                s.value("sentences_per_class", cfg.data.synthetic.sentences_per_class);
            cfg.data.synthetic.sep = s.value("sep", cfg.data.synthetic.sep);
            cfg.data.min_count = s.value("min_count", cfg.data.min_count);
        }
        if (j.contains("embedding")) {
            const json& s = j.at("embedding");
            check_keys(s, "embedding", {"source", "dim", "glove_path"});
            cfg.embedding.source = s.value("source", cfg.embedding.source);
            cfg.embedding.dim = s.value("dim", cfg.embedding.dim);
            cfg.embedding.glove_path = s.value("glove_path", cfg.embedding.glove_path);
        }
        if (j.contains("train")) {
            const json& s = j.at("train");
            check_keys(s, "train",
                       {"l2_weight", "dropout", "batch_size", "epochs", "seed", "schedule",
                        "constant_lr"});
            cfg.train.l2_weight = s.value("l2_weight", cfg.train.l2_weight);
            cfg.train.dropout = s.value("dropout", cfg.train.dropout);
            cfg.train.batch_size = s.value("batch_size", cfg.train.batch_size);
            cfg.train.epochs = s.value("epochs", cfg.train.epochs);
            cfg.train.seed = s.value("seed", cfg.train.seed);
            if (s.contains("schedule")) {
                cfg.train.schedule = schedule_from_string(s.at("schedule").get<std::string>());
            }
            cfg.train.constant_lr = s.value("constant_lr", cfg.train.constant_lr);
        }
        if (j.contains("calr")) {
            const json& s = j.at("calr");
            check_keys(s, "calr", {"lr_lb", "lr_ub_init", "step_size", "decay"});
            cfg.calr.lr_lb = s.value("lr_lb", cfg.calr.lr_lb);
            cfg.calr.lr_ub_init = s.value("lr_ub_init", cfg.calr.lr_ub_init);
            cfg.calr.step_size = s.value("step_size", cfg.calr.step_size);
            cfg.calr.decay = s.value("decay", cfg.calr.decay);
        }
        if (j.contains("compress")) {
            const json& s = j.at("compress");
            check_keys(s, "compress", {"p", "r", "retrain_epochs"});
            if (s.contains("p") && s.contains("r")) {
                throw std::runtime_error("compress.p and compress.r are mutually exclusive");
            }
            if (s.contains("p")) {
                cfg.compress.p = s.at("p").get<double>();
            } else if (s.contains("r")) {
                cfg.compress.p = 1.0 - s.at("r").get<double>();
            }
            cfg.compress.retrain_epochs = s.value("retrain_epochs", cfg.compress.retrain_epochs);
        }
        if (j.contains("quantize")) {
            const json& s = j.at("quantize");
            check_keys(s, "quantize", {"bits"});
            cfg.quantize_bits = s.value("bits", cfg.quantize_bits);
        }
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
    } catch (const json::exception& e) {
        throw std::runtime_error(origin + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text, path);
}

Corpus build_corpus(const PipelineConfig& cfg, const Vocabulary* fixed_vocab) {
    cfg.validate();
    Corpus corpus;
    if (cfg.data.mode == "synthetic") {
        const SyntheticSpec& spec = cfg.data.synthetic;
        SyntheticCorpus sc = make_synthetic(spec.num_classes, spec.vocab_size,
                                            spec.sentences_per_class, spec.sep, cfg.train.seed);
        if (fixed_vocab != nullptr && fixed_vocab->tokens() != sc.vocab.tokens()) {
            throw std::runtime_error(
                "saved vocabulary does not match the configured synthetic corpus");
        }
        corpus.vocab = std::move(sc.vocab);
        corpus.train = std::move(sc.train);
        corpus.dev = std::move(sc.dev);
        corpus.test = std::move(sc.test);
        return corpus;
    }

    if (fixed_vocab != nullptr) {
        corpus.vocab = *fixed_vocab;
        corpus.train = load_tsv(cfg.data.train_path, &corpus.vocab, nullptr, cfg.data.min_count);
    } else {
        corpus.train = load_tsv(cfg.data.train_path, nullptr, &corpus.vocab, cfg.data.min_count);
    }
    corpus.dev = load_tsv(cfg.data.dev_path, &corpus.vocab, nullptr);
    corpus.test = load_tsv(cfg.data.test_path, &corpus.vocab, nullptr);
    const std::int32_t classes = corpus.train.num_classes;
    if (corpus.dev.num_classes > classes || corpus.test.num_classes > classes) {
        throw std::runtime_error("dev/test labels exceed the training label range");
    }
    corpus.dev.num_classes = classes;
    corpus.test.num_classes = classes;
    corpus.train.split = "train";
    corpus.dev.split = "dev";
    corpus.test.split = "test";
    return corpus;
}

void cmd_train(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    Corpus corpus = build_corpus(cfg, nullptr);
    EmbeddingBuild emb = build_embedding(cfg, corpus.vocab);
    const std::size_t dim = emb.table.dim();
    std::unique_ptr<Model> model =
        make_model(cfg, std::move(emb.table), corpus.train.num_classes);

    TrainResult result = train(*model, corpus.train, corpus.dev, cfg.train, cfg.calr);
    const Model& best = *result.best_model;

    const std::string model_file = out_path(cfg, "model.bin");
    save_model(best, model_file);
    save_vocab(corpus.vocab, out_path(cfg, "vocab.txt"));
    write_text_file(out_path(cfg, "metrics.csv"), metrics_csv(result.log));

    const double test_acc = evaluate(best, corpus.test).accuracy;
    const std::size_t file_bytes = file_size_bytes(model_file);

    std::string s;
    s += "command: train\n";
    s += "model_kind: " + cfg.model_kind + "\n";
    s += strfmt("schedule: %s\n", schedule_name(cfg.train.schedule));
    s += strfmt("epochs: %llu\n", static_cast<unsigned long long>(cfg.train.epochs));
    s += strfmt("batch_size: %llu\n", static_cast<unsigned long long>(cfg.train.batch_size));
    s += strfmt("seed: %llu\n", static_cast<unsigned long long>(cfg.train.seed));
    s += strfmt("vocab_size: %llu\n", static_cast<unsigned long long>(corpus.vocab.size()));
    s += strfmt("embedding_dim: %llu\n", static_cast<unsigned long long>(dim));
    if (emb.glove) {
        s += strfmt("glove_coverage: %.4f\n", emb.coverage);
    }
    s += strfmt("num_classes: %d\n", corpus.train.num_classes);
    s += strfmt("train_sentences: %llu\n", static_cast<unsigned long long>(corpus.train.size()));
    s += strfmt("dev_sentences: %llu\n", static_cast<unsigned long long>(corpus.dev.size()));
    s += strfmt("test_sentences: %llu\n", static_cast<unsigned long long>(corpus.test.size()));
    s += strfmt("parameters: %llu\n", static_cast<unsigned long long>(best.num_parameters()));
    s += strfmt("best_epoch: %llu\n", static_cast<unsigned long long>(result.best_epoch));
    s += strfmt("best_dev_accuracy: %.4f\n", result.best_dev_accuracy);
    s += strfmt("test_accuracy: %.4f\n", test_acc);
    s += strfmt("model_file_bytes: %llu\n", static_cast<unsigned long long>(file_bytes));
    s += strfmt("model_file_mb: %.2f\n", mb(file_bytes));
    emit_summary(out_path(cfg, "summary_train.txt"), s);
}

void cmd_compress_retrain(const PipelineConfig& cfg, const std::string& model_path) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    const std::string input_path = resolve_model_path(cfg, model_path);
    std::unique_ptr<Model> model = load_model(input_path);
    if (embedding_is_factorized(model->embedding())) {
        throw std::runtime_error("model embedding is already factorized: " + input_path);
    }
    const Vocabulary vocab = load_vocab(sibling_vocab_path(input_path));
    Corpus corpus = build_corpus(cfg, &vocab);
    check_model_matches(cfg, *model, corpus);

    const double pre_dev = evaluate(*model, corpus.dev).accuracy;
    const double pre_test = evaluate(*model, corpus.test).accuracy;

    const auto& table = std::get<EmbeddingTable>(model->embedding());
    const std::size_t m = table.vocab_size();
    const std::size_t n = table.dim();
    const CompressionPlan plan = choose_rank(cfg.compress.p, m, n);
    FactorizedEmbedding factored = factorize(table, cfg.compress.p);
    model->replace_embedding(std::move(factored));

    const double mid_dev = evaluate(*model, corpus.dev).accuracy;
    const double mid_test = evaluate(*model, corpus.test).accuracy;

    const TrainConfig rt = retrain_config(cfg);
    TrainResult result = train(*model, corpus.train, corpus.dev, rt, cfg.calr);
    const Model& best = *result.best_model;
    const double post_dev = result.best_dev_accuracy;
    const double post_test = evaluate(best, corpus.test).accuracy;

    const std::string out_file = out_path(cfg, "model_compressed.bin");
    save_model(best, out_file);
    write_text_file(out_path(cfg, "metrics_retrain.csv"), metrics_csv(result.log));

    const std::size_t before_payload = m * n * sizeof(double);
    const std::size_t after_payload = plan.k * (m + n) * sizeof(double);
    const std::size_t out_bytes = file_size_bytes(out_file);

    std::string s;
    s += "command: compress-retrain\n";
    s += "model_kind: " + cfg.model_kind + "\n";
    s += strfmt("p: %.6f\n", cfg.compress.p);
    s += strfmt("r: %.6f\n", 1.0 - cfg.compress.p);
    s += strfmt("embedding_rows: %llu\n", static_cast<unsigned long long>(m));
    s += strfmt("embedding_dim: %llu\n", static_cast<unsigned long long>(n));
    s += strfmt("k: %llu\n", static_cast<unsigned long long>(plan.k));
    s += strfmt("input_model_bytes: %llu\n",
                static_cast<unsigned long long>(file_size_bytes(input_path)));
    s += strfmt("pre_compress_dev_accuracy: %.4f\n", pre_dev);
    s += strfmt("pre_compress_test_accuracy: %.4f\n", pre_test);
    s += strfmt("compressed_dev_accuracy: %.4f\n", mid_dev);
    s += strfmt("compressed_test_accuracy: %.4f\n", mid_test);
    s += strfmt("retrain_epochs: %llu\n", static_cast<unsigned long long>(rt.epochs));
    s += strfmt("retrained_dev_accuracy: %.4f\n", post_dev);
    s += strfmt("retrained_test_accuracy: %.4f\n", post_test);
    s += strfmt("embedding_payload_bytes_before: %llu\n",
                static_cast<unsigned long long>(before_payload));
    s += strfmt("embedding_payload_bytes_after: %llu\n",
                static_cast<unsigned long long>(after_payload));
    s += strfmt("embedding_payload_ratio: %.6f\n",
                static_cast<double>(after_payload) / static_cast<double>(before_payload));
    s += strfmt("output_model_bytes: %llu\n", static_cast<unsigned long long>(out_bytes));
    s += strfmt("output_model_mb: %.2f\n", mb(out_bytes));
    emit_summary(out_path(cfg, "summary_compress.txt"), s);
}

void cmd_quantize(const PipelineConfig& cfg, const std::string& model_path, int bits) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    const std::string input_path = resolve_model_path(cfg, model_path);
    std::unique_ptr<Model> model = load_model(input_path);
    const Vocabulary vocab = load_vocab(sibling_vocab_path(input_path));
    Corpus corpus = build_corpus(cfg, &vocab);
    check_model_matches(cfg, *model, corpus);

    const QuantizedModel qm = quantize_model(*model, bits);
    const std::string out_file = out_path(cfg, "model_q" + std::to_string(bits) + ".bin");
    save_quantized_model(qm, out_file);

    const std::unique_ptr<Model> deq = dequantize_model(qm);
    const double full_acc = evaluate(*model, corpus.test).accuracy;
    const double quant_acc = evaluate(*deq, corpus.test).accuracy;

    const std::size_t f64_payload = model_payload_bytes(*model);
    const std::size_t ref32_payload = reference32_payload_bytes(*model);
    const std::size_t q_payload = qm.payload_bytes();
    const std::size_t out_bytes = file_size_bytes(out_file);

    std::string s;
    s += "command: quantize\n";
    s += "model_kind: " + cfg.model_kind + "\n";
    s += strfmt("bits: %d\n", bits);
    s += strfmt("full_test_accuracy: %.4f\n", full_acc);
    s += strfmt("quantized_test_accuracy: %.4f\n", quant_acc);
    s += strfmt("float64_payload_bytes: %llu\n", static_cast<unsigned long long>(f64_payload));
    s += strfmt("reference32_payload_bytes: %llu\n",
                static_cast<unsigned long long>(ref32_payload));
    s += strfmt("quantized_payload_bytes: %llu\n", static_cast<unsigned long long>(q_payload));
    s += strfmt("ratio_vs_32bit: %.6f\n",
                static_cast<double>(q_payload) / static_cast<double>(ref32_payload));
    s += strfmt("output_model_bytes: %llu\n", static_cast<unsigned long long>(out_bytes));
    s += strfmt("output_model_mb: %.2f\n", mb(out_bytes));
    emit_summary(out_path(cfg, "summary_quantize.txt"), s);
}

void cmd_eval(const PipelineConfig& cfg, const std::string& model_path, const std::string& split) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    const std::string input_path = resolve_model_path(cfg, model_path);
    LoadedModel loaded = load_any_model(input_path);
    const Vocabulary vocab = load_vocab(sibling_vocab_path(input_path));
    Corpus corpus = build_corpus(cfg, &vocab);
    check_model_matches(cfg, *loaded.model, corpus);

    const Dataset& data = pick_split(corpus, split);
    const EvalResult result = evaluate(*loaded.model, data);

    std::string s;
    s += "command: eval\n";
    s += "model_kind: " + cfg.model_kind + "\n";
    s += strfmt("precision_bits: %d\n", loaded.bits);
    s += "split: " + split + "\n";
    s += strfmt("sentences: %llu\n", static_cast<unsigned long long>(data.size()));
    s += strfmt("accuracy: %.4f\n", result.accuracy);
    for (std::size_t c = 0; c < result.per_class_total.size(); ++c) {
        s += strfmt("class %llu: %llu/%llu\n", static_cast<unsigned long long>(c),
                    static_cast<unsigned long long>(result.per_class_correct[c]),
                    static_cast<unsigned long long>(result.per_class_total[c]));
    }
    emit_summary(out_path(cfg, "summary_eval.txt"), s);

    // Timing is hardware noise; it goes to stdout only so artifact files
    // stay byte-reproducible.
    const TimingResult timing = time_inference(*loaded.model, data, 3);
    std::cout << strfmt("inference_mean_s: %.6f\n", timing.mean_s)
              << strfmt("inference_stddev_s: %.6f\n", timing.stddev_s)
              << strfmt("inference_median_s: %.6f\n", timing.median_s);
}

void cmd_analyze(const PipelineConfig& cfg, std::size_t m, std::size_t n,
                 const std::vector<double>& p_list, int bits) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const HardwareCostModel hw = HardwareCostModel::for_bits(bits);

    std::string csv =
        "p,k,f_q,f_s,flops_exact_rhs,flops_exact_holds,flops_approx_rhs,flops_approx_holds,"
        "space_rhs,space_holds,latency_exact_lhs,latency_exact_rhs,latency_exact_holds,"
        "latency_approx_lhs,latency_approx_rhs,latency_approx_holds\n";
    std::string text = strfmt("trade-off analysis for m=%llu n=%llu quantized_bits=%d\n",
                              static_cast<unsigned long long>(m),
                              static_cast<unsigned long long>(n), bits);
    for (const double p : p_list) {
        const FlopReport r = analyze_point(m, n, p, hw);
        csv += strfmt("%.6f,%lld,%lld,%lld,%.6f,%d,%.6f,%d,%.6f,%d,%.6f,%.6f,%d,%.6f,%.6f,%d\n",
                      r.p, static_cast<long long>(r.k), static_cast<long long>(r.f_q),
                      static_cast<long long>(r.f_s), r.flops.exact.rhs,
                      r.flops.exact.holds ? 1 : 0, r.flops.approx.rhs,
                      r.flops.approx.holds ? 1 : 0, r.space.rhs, r.space.holds ? 1 : 0,
                      r.latency.exact.lhs, r.latency.exact.rhs, r.latency.exact.holds ? 1 : 0,
                      r.latency.approx.lhs, r.latency.approx.rhs,
                      r.latency.approx.holds ? 1 : 0);
        text += strfmt("p=%.6f k=%lld: F_Q=%lld F_S=%lld\n", r.p, static_cast<long long>(r.k),
                       static_cast<long long>(r.f_q), static_cast<long long>(r.f_s));
        text += strfmt("  fewer flops: exact k < %.6f -> %s; approx k < %.6f -> %s\n",
                       r.flops.exact.rhs, r.flops.exact.holds ? "holds" : "fails",
                       r.flops.approx.rhs, r.flops.approx.holds ? "holds" : "fails");
        text += strfmt("  space: p < %.6f -> %s\n", r.space.rhs,
                       r.space.holds ? "holds" : "fails");
        text += strfmt("  latency: exact %.6f > %.6f -> %s; approx %.6f < %.6f -> %s\n",
                       r.latency.exact.lhs, r.latency.exact.rhs,
                       r.latency.exact.holds ? "holds" : "fails", r.latency.approx.lhs,
                       r.latency.approx.rhs, r.latency.approx.holds ? "holds" : "fails");
    }
    write_text_file(out_path(cfg, "analyze.csv"), csv);
    emit_summary(out_path(cfg, "analyze.txt"), text);
}

void cmd_baseline_offline(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    Corpus corpus = build_corpus(cfg, nullptr);
    const std::size_t m = corpus.vocab.size();

    EmbeddingTable low_dim;
    std::size_t full_dim = 0;
    if (cfg.embedding.source == "random") {
        full_dim = cfg.embedding.dim;
        const CompressionPlan plan = choose_rank(cfg.compress.p, m, full_dim);
        low_dim = random_init(m, plan.k, derive_seed(cfg.train.seed, 8));
    } else {
        EmbeddingBuild emb = build_embedding(cfg, corpus.vocab);
        full_dim = emb.table.dim();
        low_dim = offline_compress(emb.table, cfg.compress.p);
    }
    const CompressionPlan plan = choose_rank(cfg.compress.p, m, full_dim);

    std::unique_ptr<Model> model =
        make_model(cfg, std::move(low_dim), corpus.train.num_classes);
    TrainResult result = train(*model, corpus.train, corpus.dev, cfg.train, cfg.calr);
    const Model& best = *result.best_model;
    const double test_acc = evaluate(best, corpus.test).accuracy;

    const std::string out_file = out_path(cfg, "model_offline.bin");
    save_model(best, out_file);
    save_vocab(corpus.vocab, out_path(cfg, "vocab.txt"));
    write_text_file(out_path(cfg, "metrics_offline.csv"), metrics_csv(result.log));
    const std::size_t out_bytes = file_size_bytes(out_file);

    std::string s;
    s += "command: baseline-offline\n";
    s += "model_kind: " + cfg.model_kind + "\n";
    s += "embedding_source: " + cfg.embedding.source + "\n";
    s += strfmt("p: %.6f\n", cfg.compress.p);
    s += strfmt("r: %.6f\n", 1.0 - cfg.compress.p);
    s += strfmt("full_dim: %llu\n", static_cast<unsigned long long>(full_dim));
    s += strfmt("k: %llu\n", static_cast<unsigned long long>(plan.k));
    s += strfmt("vocab_size: %llu\n", static_cast<unsigned long long>(m));
    s += strfmt("parameters: %llu\n", static_cast<unsigned long long>(best.num_parameters()));
    s += strfmt("best_epoch: %llu\n", static_cast<unsigned long long>(result.best_epoch));
    s += strfmt("best_dev_accuracy: %.4f\n", result.best_dev_accuracy);
    s += strfmt("test_accuracy: %.4f\n", test_acc);
    s += strfmt("model_file_bytes: %llu\n", static_cast<unsigned long long>(out_bytes));
    s += strfmt("model_file_mb: %.2f\n", mb(out_bytes));
    emit_summary(out_path(cfg, "summary_offline.txt"), s);
}

void cmd_sweep(const PipelineConfig& cfg, const std::vector<double>& r_list) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    for (const double r : r_list) {
        if (!(r >= 0.0) || !(r < 1.0)) {
            throw std::invalid_argument("sweep reductions must lie in [0, 1)");
        }
    }

    Corpus corpus = build_corpus(cfg, nullptr);
    EmbeddingBuild emb = build_embedding(cfg, corpus.vocab);
    const std::size_t m = corpus.vocab.size();
    const std::size_t dim = emb.table.dim();
    const EmbeddingTable full_table = emb.table;  // kept for the offline baseline

    std::unique_ptr<Model> base =
        make_model(cfg, std::move(emb.table), corpus.train.num_classes);
    TrainResult base_result = train(*base, corpus.train, corpus.dev, cfg.train, cfg.calr);
    std::unique_ptr<Model> uncompressed = std::move(base_result.best_model);
    const double base_acc = evaluate(*uncompressed, corpus.test).accuracy;

    struct Row {
        std::string method;
        double r_percent;
        std::size_t k;
        std::size_t payload;
        double accuracy;
    };
    std::vector<Row> rows;
    rows.push_back({"uncompressed", 0.0, 0, model_payload_bytes(*uncompressed), base_acc});

    for (const int bits : {16, 8}) {
        const QuantizedModel qm = quantize_model(*uncompressed, bits);
        const std::unique_ptr<Model> deq = dequantize_model(qm);
        const double acc = evaluate(*deq, corpus.test).accuracy;
        rows.push_back({"quantized" + std::to_string(bits),
                        (1.0 - static_cast<double>(bits) / 32.0) * 100.0, 0, qm.payload_bytes(),
                        acc});
    }

    const TrainConfig rt = retrain_config(cfg);
    for (const double r : r_list) {
        const double p = 1.0 - r;
        const CompressionPlan plan = choose_rank(p, m, dim);

        std::unique_ptr<Model> proposed = uncompressed->clone();
        const auto& table = std::get<EmbeddingTable>(proposed->embedding());
        proposed->replace_embedding(factorize(table, p));
        TrainResult pr = train(*proposed, corpus.train, corpus.dev, rt, cfg.calr);
        const double p_acc = evaluate(*pr.best_model, corpus.test).accuracy;
        rows.push_back({"proposed", r * 100.0, plan.k, model_payload_bytes(*pr.best_model),
                        p_acc});

        EmbeddingTable low_dim;
        if (cfg.embedding.source == "random") {
            low_dim = random_init(m, plan.k, derive_seed(cfg.train.seed, 8));
        } else {
            low_dim = offline_compress(full_table, p);
        }
        std::unique_ptr<Model> baseline =
            make_model(cfg, std::move(low_dim), corpus.train.num_classes);
        TrainResult br = train(*baseline, corpus.train, corpus.dev, cfg.train, cfg.calr);
        const double b_acc = evaluate(*br.best_model, corpus.test).accuracy;
        rows.push_back({"baseline2", r * 100.0, plan.k, model_payload_bytes(*br.best_model),
                        b_acc});
    }

    std::string csv = "method,r_percent,k,payload_bytes,payload_mb,test_accuracy\n";
    std::string text = "compression sweep\n";
    for (const Row& row : rows) {
        csv += strfmt("%s,%.1f,%llu,%llu,%.2f,%.4f\n", row.method.c_str(), row.r_percent,
                      static_cast<unsigned long long>(row.k),
                      static_cast<unsigned long long>(row.payload), mb(row.payload),
                      row.accuracy);
        text += strfmt("%-14s r=%5.1f%% k=%-4llu payload=%9llu bytes (%.2f MB) accuracy=%.4f\n",
                       row.method.c_str(), row.r_percent,
                       static_cast<unsigned long long>(row.k),
                       static_cast<unsigned long long>(row.payload), mb(row.payload),
                       row.accuracy);
    }
    write_text_file(out_path(cfg, "sweep.csv"), csv);
    emit_summary(out_path(cfg, "summary_sweep.txt"), text);
}

}  // namespace emsq
