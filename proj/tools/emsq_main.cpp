// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "emsq/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out;
    std::int64_t seed = -1;
};

emsq::PipelineConfig load_config(const CommonOpts& opts) {
    emsq::PipelineConfig cfg;
    if (!opts.config.empty()) {
        cfg = emsq::config_from_json_file(opts.config);
    }
    if (opts.seed >= 0) {
        cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    }
    if (!opts.out.empty()) {
        cfg.out_dir = opts.out;
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* sub, CommonOpts* opts) {
    sub->add_option("--config", opts->config, "JSON config file");
    sub->add_option("--out", opts->out, "output directory (overrides config)");
    sub->add_option("--seed", opts->seed, "training seed (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"text classification with low-rank embedding compression"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string model_path;
    std::string split = "test";
    int bits = 0;
    std::size_t rows = 10000;
    std::size_t cols = 300;
    std::vector<double> p_list{0.5, 0.4, 0.3, 0.2, 0.1};
    std::vector<double> r_list{0.5, 0.9};

    CLI::App* train = app.add_subcommand("train", "train the uncompressed model");
    add_common(train, &common);
    train->callback([&] { emsq::cmd_train(load_config(common)); });

    CLI::App* compress =
        app.add_subcommand("compress-retrain", "factorize the embedding and retrain");
    add_common(compress, &common);
    compress->add_option("--model", model_path,
                         "trained model file (default: out_dir/model.bin)");
    compress->callback([&] { emsq::cmd_compress_retrain(load_config(common), model_path); });

    CLI::App* quant = app.add_subcommand("quantize", "quantize a trained model");
    add_common(quant, &common);
    quant->add_option("--model", model_path, "trained model file (default: out_dir/model.bin)");
    quant->add_option("--bits", bits, "code width, 8 or 16 (default: config quantize.bits)");
    quant->callback([&] {
        const emsq::PipelineConfig cfg = load_config(common);
        emsq::cmd_quantize(cfg, model_path, bits > 0 ? bits : cfg.quantize_bits);
    });

    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on one split");
    add_common(eval, &common);
    eval->add_option("--model", model_path, "model file (default: out_dir/model.bin)");
    eval->add_option("--split", split, "train, dev, or test");
    eval->callback([&] { emsq::cmd_eval(load_config(common), model_path, split); });

    CLI::App* analyze = app.add_subcommand("analyze", "cost-model trade-off table");
    add_common(analyze, &common);
    analyze->add_option("--rows", rows, "embedding rows (vocabulary size)");
    analyze->add_option("--cols", cols, "embedding dimension");
    analyze->add_option("--p", p_list, "retained parameter fractions");
    analyze->add_option("--bits", bits, "quantized width for the comparison");
    analyze->callback([&] {
        const emsq::PipelineConfig cfg = load_config(common);
        emsq::cmd_analyze(cfg, rows, cols, p_list, bits > 0 ? bits : cfg.quantize_bits);
    });

    CLI::App* offline =
        app.add_subcommand("baseline-offline", "train on a pre-compressed embedding");
    add_common(offline, &common);
    offline->callback([&] { emsq::cmd_baseline_offline(load_config(common)); });

    CLI::App* sweep = app.add_subcommand("sweep", "compare methods across reduction rates");
    add_common(sweep, &common);
    sweep->add_option("--r", r_list, "reduction fractions in [0, 1)");
    sweep->callback([&] { emsq::cmd_sweep(load_config(common), r_list); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
