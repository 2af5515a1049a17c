#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uatlab/errors.hpp"
#include "uatlab/rng.hpp"

namespace uatlab {

// Token <-> index bijection shared across all corpora. Indices 0..3 are
// reserved; everything else is sorted lexicographically for determinism.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr std::size_t kReservedCount = 4;

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> sorted_unique_tokens);

    std::size_t size() const noexcept { return tokens_.size(); }

    // UNK for out-of-vocabulary tokens.
    int index(const std::string& token) const;
    const std::string& token(int index) const;

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& indices) const;

private:
    std::vector<std::string> tokens_;
};

using TokenPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

struct ParallelCorpus {
    std::string name;
    std::vector<TokenPair> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
    bool empty() const noexcept { return pairs.empty(); }
};

struct CorpusSplits {
    ParallelCorpus train;
    ParallelCorpus dev;
    ParallelCorpus test;
};

// N named corpora, each with disjoint train/dev/test membership.
struct CorpusCollection {
    std::vector<std::string> names;
    std::vector<CorpusSplits> corpora;

    std::size_t count() const noexcept { return names.size(); }
    std::vector<double> train_sizes() const;
    void validate() const;
};

// Encoded token-id pair, no BOS/EOS markers (the model adds those).
struct SentencePair {
    std::vector<int> source;
    std::vector<int> target;
};

// A padded mini-batch of encoded pairs from one corpus. Mask entries are
// true exactly on the non-pad positions.
struct Batch {
    std::string corpus_name;
    std::size_t rows = 0;
    std::size_t source_cols = 0;
    std::size_t target_cols = 0;
    std::vector<int> source;             // rows x source_cols, kPad filled
    std::vector<int> target;             // rows x target_cols
    std::vector<std::uint8_t> source_mask;
    std::vector<std::uint8_t> target_mask;

    std::size_t size() const noexcept { return rows; }
    SentencePair pair(std::size_t row) const;
};

enum class TaskKind { kCopy, kReverse, kShiftCipher, kSort, kDuplicateHeavy };

TaskKind parse_task(const std::string& name);
std::string task_name(TaskKind task);

struct SyntheticSpec {
    TaskKind task = TaskKind::kCopy;
    std::size_t size = 0;
    std::size_t min_len = 3;
    std::size_t max_len = 10;
    std::vector<std::string> alphabet;
    std::uint64_t seed = 0;
    std::size_t cipher_shift = 2;     // kShiftCipher only
    std::size_t template_pool = 50;   // kDuplicateHeavy only
};

// Deterministic synthetic parallel data. The duplicate-heavy task draws every
// pair, with replacement, from a small pool of arbitrary source/target
// templates, so its train and dev splits end up nearly identical.
ParallelCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

// One pair per line, "source<TAB>target", whitespace tokenization. Malformed
// lines raise InputError with the line number. Exact-duplicate pairs are kept
// once and pairs whose side lengths differ by a ratio above 1.5 are dropped.
ParallelCorpus load_tsv(const std::string& path);

void save_tsv(const ParallelCorpus& corpus, const std::string& path);

Vocabulary build_vocab(const CorpusCollection& collection);

struct SplitFractions {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

CorpusSplits split(const ParallelCorpus& corpus, const SplitFractions& fractions,
                   std::uint64_t seed);

// Uniform sampling with replacement; rows padded to the longest member.
Batch sample_batch(const ParallelCorpus& corpus, std::size_t batch_size, RngStream& rng,
                   const Vocabulary& vocab);

// Single alphabet helper: one token per character.
std::vector<std::string> alphabet_from_string(const std::string& letters);

}  // namespace uatlab
