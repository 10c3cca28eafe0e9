// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"

#include "emsq/data.hpp"
#include "emsq/embedding.hpp"
#include "emsq/models.hpp"
#include "emsq/quantize.hpp"
#include "emsq/serialize.hpp"

using namespace emsq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("emsq_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

void check_tensors_equal(const Model& a, const Model& b) {
    auto ta = a.named_tensors();
    auto tb = b.named_tensors();
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].first == tb[i].first);
        CHECK(*ta[i].second == *tb[i].second);
    }
}

}  // namespace

TEST_CASE("dan model round trips bit exactly") {
    TempDir dir;
    DanModel dan(EmbeddingLayer{random_init(7, 4, 3)}, 3, 5);
    const std::string path = dir.file("dan.bin");
    save_model(dan, path);

    std::unique_ptr<Model> back = load_model(path);
    CHECK(back->kind() == std::string("dan"));
    check_tensors_equal(dan, *back);

    // Saving the loaded model again reproduces the file byte for byte.
    const std::string again = dir.file("dan2.bin");
    save_model(*back, again);
    CHECK(slurp(path) == slurp(again));
    CHECK(file_size_bytes(path) == slurp(path).size());
}

TEST_CASE("factorized lstm model round trips bit exactly") {
    TempDir dir;
    LstmModel lstm(EmbeddingLayer{factorize(random_init(9, 6, 7), 0.6)}, 4, 8, 9);
    const std::string path = dir.file("lstm.bin");
    save_model(lstm, path);

    std::unique_ptr<Model> back = load_model(path);
    CHECK(back->kind() == std::string("lstm"));
    CHECK(embedding_is_factorized(back->embedding()));
    check_tensors_equal(lstm, *back);

    Sentence s{{0, 2, 4}, 0};
    CHECK(back->predict(s) == lstm.predict(s));
}

TEST_CASE("quantized model round trips through its own container") {
    TempDir dir;
    DanModel dan(EmbeddingLayer{random_init(6, 4, 11)}, 3, 13);
    QuantizedModel qm = quantize_model(dan, 8);

    const std::string path = dir.file("q8.bin");
    save_quantized_model(qm, path);
    QuantizedModel back = load_quantized_model(path);

    CHECK(back.kind == qm.kind);
    CHECK(back.bits == qm.bits);
    REQUIRE(back.tensors.size() == qm.tensors.size());
    for (std::size_t i = 0; i < qm.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == qm.tensors[i].first);
        CHECK(back.tensors[i].second.scale == qm.tensors[i].second.scale);
        CHECK(back.tensors[i].second.codes == qm.tensors[i].second.codes);
        CHECK(back.tensors[i].second.bits == qm.tensors[i].second.bits);
    }

    const std::string again = dir.file("q8b.bin");
    save_quantized_model(back, again);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("quantized files are smaller than full precision files") {
    TempDir dir;
    DanModel dan(EmbeddingLayer{random_init(20, 8, 17)}, 3, 19);
    save_model(dan, dir.file("full.bin"));
    save_quantized_model(quantize_model(dan, 8), dir.file("q8.bin"));
    save_quantized_model(quantize_model(dan, 16), dir.file("q16.bin"));

    const std::size_t full = file_size_bytes(dir.file("full.bin"));
    const std::size_t q8 = file_size_bytes(dir.file("q8.bin"));
    const std::size_t q16 = file_size_bytes(dir.file("q16.bin"));
    CHECK(q8 < q16);
    CHECK(q16 < full);

    CHECK(model_payload_bytes(dan) == dan.num_parameters() * 8);
    CHECK(reference32_payload_bytes(dan) == dan.num_parameters() * 4);
}

TEST_CASE("loaders reject the wrong container precision") {
    TempDir dir;
    DanModel dan(EmbeddingLayer{random_init(5, 4, 23)}, 2, 29);
    save_model(dan, dir.file("full.bin"));
    save_quantized_model(quantize_model(dan, 8), dir.file("q.bin"));

    CHECK_THROWS_AS(load_model(dir.file("q.bin")), std::runtime_error);
    CHECK_THROWS_AS(load_quantized_model(dir.file("full.bin")), std::runtime_error);
}

TEST_CASE("load_any_model reports the stored precision") {
    TempDir dir;
    DanModel dan(EmbeddingLayer{random_init(5, 4, 31)}, 2, 37);
    save_model(dan, dir.file("full.bin"));
    save_quantized_model(quantize_model(dan, 16), dir.file("q16.bin"));

    LoadedModel full = load_any_model(dir.file("full.bin"));
    CHECK(full.bits == 0);
    check_tensors_equal(dan, *full.model);

    LoadedModel q = load_any_model(dir.file("q16.bin"));
    CHECK(q.bits == 16);
    CHECK(q.model->kind() == std::string("dan"));
    CHECK(q.model->num_parameters() == dan.num_parameters());
}

TEST_CASE("corrupt files raise clear errors") {
    TempDir dir;
    CHECK_THROWS_AS(load_model(dir.file("absent.bin")), std::runtime_error);
    CHECK_THROWS_AS(file_size_bytes(dir.file("absent.bin")), std::runtime_error);

    const std::string garbage = dir.file("garbage.bin");
    std::ofstream(garbage, std::ios::binary) << "not a model";
    CHECK_THROWS_AS(load_model(garbage), std::runtime_error);
    CHECK_THROWS_AS(load_any_model(garbage), std::runtime_error);

    DanModel dan(EmbeddingLayer{random_init(5, 4, 41)}, 2, 43);
    const std::string full = dir.file("full.bin");
    save_model(dan, full);
    std::vector<char> bytes = slurp(full);
    const std::string cut = dir.file("cut.bin");
    std::ofstream(cut, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    CHECK_THROWS_AS(load_model(cut), std::runtime_error);
}

TEST_CASE("vocab files round trip in index order") {
    TempDir dir;
    Vocabulary vocab;
    vocab.add("the");
    vocab.add("cat");
    vocab.add("sat");
    const std::string path = dir.file("vocab.txt");
    save_vocab(vocab, path);

    Vocabulary back = load_vocab(path);
    REQUIRE(back.size() == vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        CHECK(back.token(static_cast<std::int32_t>(i)) ==
              vocab.token(static_cast<std::int32_t>(i)));
    }
    CHECK(back.lookup("cat") == vocab.lookup("cat"));
    CHECK(back.lookup("dog") == Vocabulary::kUnkIndex);

    CHECK_THROWS_AS(load_vocab(dir.file("absent.txt")), std::runtime_error);
}
