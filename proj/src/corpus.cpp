#include "uatlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace uatlab {

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> tokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
    return tokens;
}

std::vector<std::string> tokenize_whitespace(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string token;
    while (in >> token) {
        out.push_back(std::move(token));
    }
    return out;
}

std::string join_pair_key(const TokenPair& pair) {
    std::string key;
    for (const auto& t : pair.first) {
        key += t;
        key += ' ';
    }
    key += '\t';
    for (const auto& t : pair.second) {
        key += t;
        key += ' ';
    }
    return key;
}

std::vector<std::string> random_sequence(RngStream& rng, std::size_t min_len, std::size_t max_len,
                                         const std::vector<std::string>& alphabet) {
    const std::size_t len = min_len + rng.next_below(max_len - min_len + 1);
    std::vector<std::string> seq(len);
    for (auto& tok : seq) {
        tok = alphabet[rng.next_below(alphabet.size())];
    }
    return seq;
}

}  // namespace

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> sorted_unique_tokens) {
    tokens_ = reserved_tokens();
    tokens_.insert(tokens_.end(), sorted_unique_tokens.begin(), sorted_unique_tokens.end());
    for (std::size_t i = kReservedCount + 1; i < tokens_.size(); ++i) {
        if (!(tokens_[i - 1] < tokens_[i])) {
            throw ContractError("Vocabulary: tokens must be sorted and unique");
        }
    }
}

int Vocabulary::index(const std::string& token) const {
    const auto begin = tokens_.begin() + kReservedCount;
    const auto it = std::lower_bound(begin, tokens_.end(), token);
    if (it != tokens_.end() && *it == token) {
        return static_cast<int>(it - tokens_.begin());
    }
    return kUnk;
}

const std::string& Vocabulary::token(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
        throw IndexError("Vocabulary::token: index " + std::to_string(index) + " out of range [0," +
                         std::to_string(tokens_.size()) + ")");
    }
    return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out[i] = index(tokens[i]);
    }
    return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& indices) const {
    std::vector<std::string> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out[i] = token(indices[i]);
    }
    return out;
}

// ---------------------------------------------------------------- collection

std::vector<double> CorpusCollection::train_sizes() const {
    std::vector<double> sizes(corpora.size());
    for (std::size_t i = 0; i < corpora.size(); ++i) {
        sizes[i] = static_cast<double>(corpora[i].train.size());
    }
    return sizes;
}

void CorpusCollection::validate() const {
    if (names.empty() || names.size() != corpora.size()) {
        throw ContractError("CorpusCollection: needs at least one named corpus");
    }
    for (std::size_t i = 0; i < corpora.size(); ++i) {
        if (corpora[i].train.empty() || corpora[i].dev.empty() || corpora[i].test.empty()) {
            throw ContractError("CorpusCollection: corpus '" + names[i] + "' has an empty split");
        }
    }
}

SentencePair Batch::pair(std::size_t row) const {
    if (row >= rows) {
        throw IndexError("Batch::pair: row " + std::to_string(row) + " out of range");
    }
    SentencePair out;
    for (std::size_t j = 0; j < source_cols; ++j) {
        if (source_mask[row * source_cols + j]) {
            out.source.push_back(source[row * source_cols + j]);
        }
    }
    for (std::size_t j = 0; j < target_cols; ++j) {
        if (target_mask[row * target_cols + j]) {
            out.target.push_back(target[row * target_cols + j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------- synthetic

TaskKind parse_task(const std::string& name) {
    if (name == "copy") return TaskKind::kCopy;
    if (name == "reverse") return TaskKind::kReverse;
    if (name == "token-shift-cipher") return TaskKind::kShiftCipher;
    if (name == "sort") return TaskKind::kSort;
    if (name == "duplicate-heavy") return TaskKind::kDuplicateHeavy;
    throw ConfigError("unknown task '" + name +
                      "' (expected copy|reverse|token-shift-cipher|sort|duplicate-heavy)");
}

std::string task_name(TaskKind task) {
    switch (task) {
        case TaskKind::kCopy: return "copy";
        case TaskKind::kReverse: return "reverse";
        case TaskKind::kShiftCipher: return "token-shift-cipher";
        case TaskKind::kSort: return "sort";
        case TaskKind::kDuplicateHeavy: return "duplicate-heavy";
    }
    throw ContractError("task_name: invalid enum value");
}

std::vector<std::string> alphabet_from_string(const std::string& letters) {
    std::vector<std::string> alphabet;
    alphabet.reserve(letters.size());
    for (char c : letters) {
        alphabet.emplace_back(1, c);
    }
    return alphabet;
}

ParallelCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.size < 1) {
        throw ConfigError("generate_synthetic_corpus: size must be >= 1");
    }
    if (spec.alphabet.empty()) {
        throw ConfigError("generate_synthetic_corpus: empty alphabet");
    }
    if (spec.min_len < 1 || spec.min_len > spec.max_len) {
        throw ConfigError("generate_synthetic_corpus: invalid length range");
    }

    RngStream rng = RngStream(spec.seed, RngStream::kData).substream(static_cast<std::uint64_t>(spec.task));

    const auto apply_cipher = [&](const std::vector<std::string>& src) {
        std::vector<std::string> out(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            const auto it = std::find(spec.alphabet.begin(), spec.alphabet.end(), src[i]);
            const std::size_t idx = static_cast<std::size_t>(it - spec.alphabet.begin());
            out[i] = spec.alphabet[(idx + spec.cipher_shift) % spec.alphabet.size()];
        }
        return out;
    };

    ParallelCorpus corpus;
    corpus.name = task_name(spec.task);
    corpus.pairs.reserve(spec.size);

    if (spec.task == TaskKind::kDuplicateHeavy) {
        if (spec.template_pool < 1) {
            throw ConfigError("generate_synthetic_corpus: template pool must be >= 1");
        }
        // Copy-structured templates: the domain itself is easy to describe,
        // but every split re-draws the same handful of sentences, so train
        // and dev mini-batches carry nearly duplicate gradients.
        std::vector<TokenPair> pool(spec.template_pool);
        for (auto& tmpl : pool) {
            tmpl.first = random_sequence(rng, spec.min_len, spec.max_len, spec.alphabet);
            tmpl.second = tmpl.first;
        }
        for (std::size_t i = 0; i < spec.size; ++i) {
            corpus.pairs.push_back(pool[rng.next_below(pool.size())]);
        }
        return corpus;
    }

    for (std::size_t i = 0; i < spec.size; ++i) {
        TokenPair pair;
        pair.first = random_sequence(rng, spec.min_len, spec.max_len, spec.alphabet);
        switch (spec.task) {
            case TaskKind::kCopy:
                pair.second = pair.first;
                break;
            case TaskKind::kReverse:
                pair.second.assign(pair.first.rbegin(), pair.first.rend());
                break;
            case TaskKind::kShiftCipher:
                pair.second = apply_cipher(pair.first);
                break;
            case TaskKind::kSort:
                pair.second = pair.first;
                std::sort(pair.second.begin(), pair.second.end());
                break;
            case TaskKind::kDuplicateHeavy:
                break;  // handled above
        }
        corpus.pairs.push_back(std::move(pair));
    }
    return corpus;
}

// ---------------------------------------------------------------- tsv io

ParallelCorpus load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_tsv: cannot open '" + path + "'");
    }

    ParallelCorpus corpus;
    corpus.name = path;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw InputError("load_tsv: line " + std::to_string(line_number) + " of '" + path +
                             "' is not 'source<TAB>target'");
        }
        TokenPair pair;
        pair.first = tokenize_whitespace(line.substr(0, tab));
        pair.second = tokenize_whitespace(line.substr(tab + 1));
        if (pair.first.empty() || pair.second.empty()) {
            throw InputError("load_tsv: line " + std::to_string(line_number) + " of '" + path +
                             "' has an empty side");
        }

        const double longer = static_cast<double>(std::max(pair.first.size(), pair.second.size()));
        const double shorter = static_cast<double>(std::min(pair.first.size(), pair.second.size()));
        if (longer / shorter > 1.5) {
            continue;  // length-ratio filter
        }
        if (!seen.insert(join_pair_key(pair)).second) {
            continue;  // duplicate pair, keep the first occurrence
        }
        corpus.pairs.push_back(std::move(pair));
    }
    if (corpus.pairs.empty()) {
        throw InputError("load_tsv: no usable pairs in '" + path + "'");
    }
    return corpus;
}

void save_tsv(const ParallelCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("save_tsv: cannot write '" + path + "'");
    }
    for (const auto& [src, tgt] : corpus.pairs) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            out << (i > 0 ? " " : "") << src[i];
        }
        out << '\t';
        for (std::size_t i = 0; i < tgt.size(); ++i) {
            out << (i > 0 ? " " : "") << tgt[i];
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------- vocab/split

Vocabulary build_vocab(const CorpusCollection& collection) {
    collection.validate();
    std::set<std::string> tokens;
    for (const auto& corpus : collection.corpora) {
        for (const ParallelCorpus* part : {&corpus.train, &corpus.dev, &corpus.test}) {
            for (const auto& [src, tgt] : part->pairs) {
                tokens.insert(src.begin(), src.end());
                tokens.insert(tgt.begin(), tgt.end());
            }
        }
    }
    return Vocabulary(std::vector<std::string>(tokens.begin(), tokens.end()));
}

CorpusSplits split(const ParallelCorpus& corpus, const SplitFractions& fractions,
                   std::uint64_t seed) {
    const double sum = fractions.train + fractions.dev + fractions.test;
    if (fractions.train <= 0.0 || fractions.dev <= 0.0 || fractions.test <= 0.0 ||
        std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split: fractions must be positive and sum to 1");
    }
    const std::size_t n = corpus.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng = RngStream(seed, RngStream::kData).substream(0x51f7u);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.next_below(i)]);
    }

    std::size_t n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
    std::size_t n_dev = static_cast<std::size_t>(std::llround(fractions.dev * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_dev = std::min(n_dev, n - n_train);

    CorpusSplits out;
    out.train.name = corpus.name;
    out.dev.name = corpus.name;
    out.test.name = corpus.name;
    for (std::size_t i = 0; i < n; ++i) {
        const TokenPair& pair = corpus.pairs[order[i]];
        if (i < n_train) {
            out.train.pairs.push_back(pair);
        } else if (i < n_train + n_dev) {
            out.dev.pairs.push_back(pair);
        } else {
            out.test.pairs.push_back(pair);
        }
    }
    return out;
}

Batch sample_batch(const ParallelCorpus& corpus, std::size_t batch_size, RngStream& rng,
                   const Vocabulary& vocab) {
    if (corpus.empty()) {
        throw ContractError("sample_batch: corpus '" + corpus.name + "' is empty");
    }
    if (batch_size < 1) {
        throw ConfigError("sample_batch: batch_size must be >= 1");
    }

    std::vector<const TokenPair*> picks(batch_size);
    std::size_t max_src = 0;
    std::size_t max_tgt = 0;
    for (auto& pick : picks) {
        pick = &corpus.pairs[rng.next_below(corpus.size())];
        max_src = std::max(max_src, pick->first.size());
        max_tgt = std::max(max_tgt, pick->second.size());
    }

    Batch batch;
    batch.corpus_name = corpus.name;
    batch.rows = batch_size;
    batch.source_cols = max_src;
    batch.target_cols = max_tgt;
    batch.source.assign(batch_size * max_src, Vocabulary::kPad);
    batch.target.assign(batch_size * max_tgt, Vocabulary::kPad);
    batch.source_mask.assign(batch_size * max_src, 0);
    batch.target_mask.assign(batch_size * max_tgt, 0);

    for (std::size_t r = 0; r < batch_size; ++r) {
        const std::vector<int> src = vocab.encode(picks[r]->first);
        const std::vector<int> tgt = vocab.encode(picks[r]->second);
        for (std::size_t j = 0; j < src.size(); ++j) {
            batch.source[r * max_src + j] = src[j];
            batch.source_mask[r * max_src + j] = 1;
        }
        for (std::size_t j = 0; j < tgt.size(); ++j) {
            batch.target[r * max_tgt + j] = tgt[j];
            batch.target_mask[r * max_tgt + j] = 1;
        }
    }
    return batch;
}

}  // namespace uatlab
