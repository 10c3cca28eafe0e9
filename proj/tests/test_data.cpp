// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"

#include "emsq/data.hpp"

using namespace emsq;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path =
        (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("tokenizer lowercases and separates punctuation") {
    CHECK(tokenize("It's good.") ==
          std::vector<std::string>{"it", "'s", "good", "."});
    CHECK(tokenize("Hello, world!") ==
          std::vector<std::string>{"hello", ",", "world", "!"});
    CHECK(tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "'t", "stop"});
    CHECK(tokenize("a-b") == std::vector<std::string>{"a", "-", "b"});
}

TEST_CASE("tokenizer is idempotent on its own output") {
    const std::string text = "The movie (2004) wasn't bad, at all!";
    std::vector<std::string> once = tokenize(text);
    std::string joined;
    for (const auto& t : once) {
        if (!joined.empty()) joined += ' ';
        joined += t;
    }
    CHECK(tokenize(joined) == once);
}

TEST_CASE("vocabulary reserves index zero for unknowns") {
    Vocabulary v;
    CHECK(v.size() == 1);
    CHECK(v.token(0) == std::string(Vocabulary::kUnkToken));
    const std::int32_t a = v.add("apple");
    CHECK(a == 1);
    CHECK(v.lookup("apple") == 1);
    CHECK(v.lookup("pear") == Vocabulary::kUnkIndex);
    CHECK(v.lookup_exact("pear") == -1);
    CHECK(v.lookup_exact("<unk>") == 0);
    CHECK_THROWS_AS(v.add("apple"), std::invalid_argument);
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
    std::vector<std::vector<std::string>> sents = {
        {"b", "a", "b"}, {"c", "a", "b"}, {"c"}};
    Vocabulary v = build_vocab(sents, 1);
    // Counts: b=3, a=2, c=2; the a/c tie resolves lexicographically.
    CHECK(v.tokens() ==
          std::vector<std::string>{"<unk>", "b", "a", "c"});

    Vocabulary filtered = build_vocab(sents, 3);
    CHECK(filtered.tokens() == std::vector<std::string>{"<unk>", "b"});
}

TEST_CASE("load_tsv builds a vocabulary from the training split") {
    const std::string path = write_temp(
        "emsq_train.tsv", "0\tgood fun movie\n1\tbad dull movie\n0\tgood good\n");
    Vocabulary vocab;
    Dataset d = load_tsv(path, nullptr, &vocab);
    CHECK(d.size() == 3);
    CHECK(d.num_classes == 2);
    CHECK(vocab.lookup_exact("good") > 0);
    CHECK(vocab.lookup_exact("dull") > 0);
    CHECK(d.sentences[0].label == 0);
    CHECK(d.sentences[1].label == 1);
    // "good" appears 3 times, most frequent -> index 1.
    CHECK(vocab.lookup("good") == 1);
    std::remove(path.c_str());
}

TEST_CASE("load_tsv maps unseen tokens to UNK under a fixed vocabulary") {
    Vocabulary vocab;
    vocab.add("good");
    const std::string path = write_temp("emsq_dev.tsv", "1\tgood unseen thing\n");
    Dataset d = load_tsv(path, &vocab, nullptr);
    CHECK(d.sentences[0].token_ids ==
          std::vector<std::int32_t>{1, 0, 0});
    std::remove(path.c_str());
}

TEST_CASE("load_tsv rejects malformed labels with the line number") {
    const std::string path = write_temp("emsq_bad.tsv", "0\tfine\nnope\tbroken\n");
    CHECK_THROWS_WITH_AS(load_tsv(path, nullptr, nullptr),
                         doctest::Contains(":2"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("load_tsv rejects an empty file") {
    const std::string path = write_temp("emsq_empty.tsv", "\n\n");
    CHECK_THROWS_AS(load_tsv(path, nullptr, nullptr), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("synthetic corpus splits eighty ten ten per class") {
    SyntheticCorpus c = make_synthetic(4, 500, 625, 0.9, 0);
    CHECK(c.vocab.size() == 500);
    CHECK(c.train.size() == 2000);
    CHECK(c.dev.size() == 248);
    CHECK(c.test.size() == 252);
    CHECK(c.train.num_classes == 4);
    for (const Sentence& s : c.train.sentences) {
        CHECK(s.label >= 0);
        CHECK(s.label < 4);
        CHECK(!s.token_ids.empty());
        for (const std::int32_t id : s.token_ids) {
            CHECK(id >= 1);
            CHECK(id < 500);
        }
    }
}

TEST_CASE("synthetic corpus is deterministic per seed") {
    SyntheticCorpus a = make_synthetic(3, 120, 30, 0.8, 9);
    SyntheticCorpus b = make_synthetic(3, 120, 30, 0.8, 9);
    CHECK(a.vocab.tokens() == b.vocab.tokens());
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train.sentences[i].token_ids == b.train.sentences[i].token_ids);
        CHECK(a.train.sentences[i].label == b.train.sentences[i].label);
    }
    SyntheticCorpus c = make_synthetic(3, 120, 30, 0.8, 10);
    bool any_diff = false;
    for (std::size_t i = 0; i < std::min(a.train.size(), c.train.size()); ++i) {
        if (a.train.sentences[i].token_ids != c.train.sentences[i].token_ids) {
            any_diff = true;
            break;
        }
    }
    CHECK(any_diff);
}

TEST_CASE("fully separable classes use disjoint token pools") {
    SyntheticCorpus c = make_synthetic(4, 200, 40, 1.0, 3);
    std::vector<std::set<std::int32_t>> per_class(4);
    for (const Dataset* d : {&c.train, &c.dev, &c.test}) {
        for (const Sentence& s : d->sentences) {
            for (const std::int32_t id : s.token_ids) {
                per_class[static_cast<std::size_t>(s.label)].insert(id);
            }
        }
    }
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b) {
            std::vector<std::int32_t> common;
            std::set_intersection(per_class[a].begin(), per_class[a].end(),
                                  per_class[b].begin(), per_class[b].end(),
                                  std::back_inserter(common));
            CHECK(common.empty());
        }
    }
}

TEST_CASE("synthetic corpus rejects impossible shapes") {
    CHECK_THROWS_AS(make_synthetic(1, 100, 20, 0.9, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic(4, 5, 20, 0.9, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_synthetic(2, 100, 20, 1.5, 0), std::invalid_argument);
}

TEST_CASE("batches cover every index exactly once") {
    std::vector<std::vector<std::size_t>> groups = batches(10, 3, 0, 0);
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].size() == 3);
    CHECK(groups[3].size() == 1);
    std::set<std::size_t> seen;
    for (const auto& g : groups) {
        for (const std::size_t i : g) seen.insert(i);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("batch order changes across epochs but not across calls") {
    auto a = batches(64, 8, 5, 0);
    auto b = batches(64, 8, 5, 0);
    auto c = batches(64, 8, 5, 1);
    CHECK(a == b);
    CHECK(a != c);
    CHECK_THROWS_AS(batches(10, 0, 0, 0), std::invalid_argument);
}
