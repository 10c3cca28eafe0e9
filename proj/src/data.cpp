// SPDX-License-Identifier: Apache-2.0
#include "emsq/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "emsq/rng.hpp"

namespace emsq {

Vocabulary::Vocabulary() {
    add(kUnkToken);
}

std::int32_t Vocabulary::add(const std::string& token) {
    const auto [it, inserted] = index_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
    if (!inserted) {
        throw std::invalid_argument("duplicate vocabulary token: " + token);
    }
    tokens_.push_back(token);
    return it->second;
}

std::int32_t Vocabulary::lookup(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnkIndex : it->second;
}

std::int32_t Vocabulary::lookup_exact(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    const auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (const unsigned char ch : text) {
        if (ch < 0x80 && std::isspace(ch)) {
            flush();
        } else if (ch >= 0x80 || std::isalnum(ch)) {
            cur.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch))
                                    : static_cast<char>(ch));
        } else if (ch == '\'') {
            flush();
            cur.push_back('\'');
        } else {
            flush();
            out.emplace_back(1, static_cast<char>(ch));
        }
    }
    flush();
    return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                       std::size_t min_count) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& sentence : sentences) {
        for (const auto& token : sentence) {
            ++counts[token];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [token, count] : counts) {
        if (count >= min_count && token != Vocabulary::kUnkToken) {
            kept.emplace_back(token, count);
        }
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [token, count] : kept) {
        (void)count;
        vocab.add(token);
    }
    return vocab;
}

namespace {

std::int32_t parse_label(const std::string& text, const std::string& path, std::size_t line_no) {
    std::int32_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || value < 0) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": label must be a non-negative integer, got \"" + text + "\"");
    }
    return value;
}

}  // namespace

Dataset load_tsv(const std::string& path, const Vocabulary* vocab, Vocabulary* built_vocab,
                 std::size_t min_count) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset file: " + path);
    }
    std::vector<std::int32_t> labels;
    std::vector<std::vector<std::string>> texts;
    std::string line;
    std::size_t line_no = 0;
    std::int32_t max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected label<TAB>text");
        }
        labels.push_back(parse_label(line.substr(0, tab), path, line_no));
        texts.push_back(tokenize(line.substr(tab + 1)));
        max_label = std::max(max_label, labels.back());
    }
    if (labels.empty()) {
        throw std::runtime_error("no labeled lines in " + path);
    }

    Vocabulary local;
    if (vocab == nullptr) {
        local = build_vocab(texts, min_count);
        if (built_vocab != nullptr) {
            *built_vocab = local;
        }
        vocab = &local;
    }

    Dataset out;
    out.num_classes = max_label + 1;
    out.sentences.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Sentence s;
        s.label = labels[i];
        s.token_ids.reserve(texts[i].size());
        for (const auto& token : texts[i]) {
            s.token_ids.push_back(vocab->lookup(token));
        }
        if (s.token_ids.empty()) {
            s.token_ids.push_back(Vocabulary::kUnkIndex);
        }
        out.sentences.push_back(std::move(s));
    }
    return out;
}

SyntheticCorpus make_synthetic(std::int32_t num_classes, std::size_t vocab_size,
                               std::size_t sentences_per_class, double sep, std::uint64_t seed) {
    if (num_classes < 2) {
        throw std::invalid_argument("make_synthetic: need at least 2 classes");
    }
    if (sep < 0.0 || sep > 1.0) {
        throw std::invalid_argument("make_synthetic: sep must be in [0, 1]");
    }
    if (sentences_per_class < 10) {
        throw std::invalid_argument("make_synthetic: need at least 10 sentences per class");
    }
    const auto classes = static_cast<std::size_t>(num_classes);
    const std::size_t usable = vocab_size > 0 ? vocab_size - 1 : 0;
    const std::size_t noise_target = usable / 3;
    const std::size_t per_class = classes > 0 ? (usable - noise_target) / classes : 0;
    if (usable == 0 || per_class < 1) {
        throw std::invalid_argument("make_synthetic: vocab_size too small for " +
                                    std::to_string(num_classes) + " classes");
    }

    SyntheticCorpus corpus;
    char name[32];
    for (std::size_t i = 0; i < usable; ++i) {
        std::snprintf(name, sizeof name, "w%04zu", i);
        corpus.vocab.add(name);
    }

    // Class pools sit first after UNK; whatever remains is the noise pool.
    const std::size_t noise_begin = 1 + classes * per_class;
    const std::size_t noise_size = vocab_size - noise_begin;

    const std::size_t n_train = sentences_per_class * 8 / 10;
    const std::size_t n_dev = sentences_per_class / 10;
    for (Dataset* split : {&corpus.train, &corpus.dev, &corpus.test}) {
        split->num_classes = num_classes;
    }
    corpus.train.split = "train";
    corpus.dev.split = "dev";
    corpus.test.split = "test";

    for (std::size_t c = 0; c < classes; ++c) {
        Rng rng(derive_seed(seed, c));
        const std::size_t class_begin = 1 + c * per_class;
        for (std::size_t s = 0; s < sentences_per_class; ++s) {
            Sentence sentence;
            sentence.label = static_cast<std::int32_t>(c);
            const std::size_t length = 2 + static_cast<std::size_t>(rng.next_below(3));
            sentence.token_ids.reserve(length);
            for (std::size_t t = 0; t < length; ++t) {
                std::size_t id = 0;
                if (rng.next_double() < sep) {
                    id = class_begin + static_cast<std::size_t>(rng.next_below(per_class));
                } else if (noise_size > 0) {
                    id = noise_begin + static_cast<std::size_t>(rng.next_below(noise_size));
                } else {
                    id = 1 + static_cast<std::size_t>(rng.next_below(usable));
                }
                sentence.token_ids.push_back(static_cast<std::int32_t>(id));
            }
            Dataset& split = s < n_train              ? corpus.train
                             : s < n_train + n_dev ? corpus.dev
                                                   : corpus.test;
            split.sentences.push_back(std::move(sentence));
        }
    }
    return corpus;
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t seed, std::size_t epoch) {
    if (batch_size == 0) {
        throw std::invalid_argument("batches: batch_size must be positive");
    }
    std::vector<std::size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> out;
    out.reserve((dataset_size + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < dataset_size; start += batch_size) {
        const std::size_t stop = std::min(dataset_size, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return out;
}

}  // namespace emsq
