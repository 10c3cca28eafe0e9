// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace emsq {

/// One labeled utterance, already indexed against a vocabulary.
struct Sentence {
    std::vector<std::int32_t> token_ids;  // non-empty
    std::int32_t label = 0;
};

/// Token <-> index map. Index 0 is always the UNK token; everything unseen
/// at lookup time maps there.
class Vocabulary {
public:
    static constexpr std::int32_t kUnkIndex = 0;
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();

    /// Appends a new token; throws if already present.
    std::int32_t add(const std::string& token);

    /// Index of token, or UNK for unknown tokens.
    std::int32_t lookup(const std::string& token) const;
    /// Index of token, or -1 if absent (UNK itself resolves to 0).
    std::int32_t lookup_exact(const std::string& token) const;

    const std::string& token(std::int32_t index) const { return tokens_.at(index); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::unordered_map<std::string, std::int32_t> index_;
    std::vector<std::string> tokens_;
};

struct Dataset {
    std::vector<Sentence> sentences;
    std::int32_t num_classes = 0;
    std::string split;  // train / dev / test

    std::size_t size() const { return sentences.size(); }
};

/// Lowercases, splits punctuation into standalone tokens, and keeps
/// apostrophe clitics attached ("it's" -> "it", "'s"). Idempotent on its
/// own space-joined output.
std::vector<std::string> tokenize(const std::string& text);

/// Frequency-ordered vocabulary (ties broken lexicographically) over
/// pre-tokenized sentences; tokens below min_count are dropped.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                       std::size_t min_count);

/// Loads `label<TAB>text` lines. With a vocabulary given, unknown tokens map
/// to UNK; without one, the vocabulary is built from this file (train split)
/// and returned through *built_vocab.
Dataset load_tsv(const std::string& path, const Vocabulary* vocab, Vocabulary* built_vocab,
                 std::size_t min_count = 1);

struct SyntheticCorpus {
    Vocabulary vocab;
    Dataset train;
    Dataset dev;
    Dataset test;
};

/// Desk-scale labeled corpus. Each class owns a disjoint token pool; tokens
/// come from the class pool with probability sep and from a shared noise
/// pool otherwise. Splits 80/10/10 per class, deterministic per seed.
SyntheticCorpus make_synthetic(std::int32_t num_classes, std::size_t vocab_size,
                               std::size_t sentences_per_class, double sep, std::uint64_t seed);

/// Index groups for one epoch: a seeded shuffle of 0..n-1 chunked by
/// batch_size; the shuffle differs per (seed, epoch).
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t seed, std::size_t epoch);

}  // namespace emsq
