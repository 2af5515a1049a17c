#include "uatlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace uatlab {

void ResultTable::validate() const {
    if (row_names.size() != values.size() || row_names.size() != macro.size()) {
        throw ContractError("ResultTable: row bookkeeping mismatch");
    }
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (values[r].size() != col_names.size()) {
            throw ContractError("ResultTable: column count mismatch in row " + row_names[r]);
        }
        double mean = 0.0;
        for (double v : values[r]) {
            mean += v;
        }
        mean /= static_cast<double>(values[r].size());
        if (std::abs(mean - macro[r]) > 1e-9) {
            throw ContractError("ResultTable: macro average out of sync in row " + row_names[r]);
        }
    }
}

std::string ResultTable::to_csv() const {
    validate();
    std::string out = "corpus";
    for (const auto& name : col_names) {
        out += "," + name;
    }
    out += ",macro\n";
    char buf[64];
    for (std::size_t r = 0; r < row_names.size(); ++r) {
        out += row_names[r];
        for (double v : values[r]) {
            std::snprintf(buf, sizeof(buf), ",%.12g", v);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.12g\n", macro[r]);
        out += buf;
    }
    return out;
}

std::string ResultTable::to_text() const {
    validate();
    std::size_t label_width = 6;
    for (const auto& name : row_names) {
        label_width = std::max(label_width, name.size());
    }
    std::ostringstream out;
    out << std::string(label_width, ' ');
    char buf[64];
    for (const auto& name : col_names) {
        std::snprintf(buf, sizeof(buf), " %10s", name.c_str());
        out << buf;
    }
    out << "      macro\n";
    for (std::size_t r = 0; r < row_names.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label_width),
                      row_names[r].c_str());
        out << buf;
        for (double v : values[r]) {
            std::snprintf(buf, sizeof(buf), " %10.2f", v);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), " %10.2f\n", macro[r]);
        out << buf;
    }
    return out.str();
}

BleuScore evaluate_corpus_bleu(const ModelParameters& params, const Vocabulary& vocab,
                               const ParallelCorpus& test, std::size_t eval_limit) {
    if (test.empty()) {
        throw ContractError("evaluate_corpus_bleu: empty test corpus");
    }
    const std::size_t count =
        eval_limit == 0 ? test.size() : std::min(eval_limit, test.size());
    TokenSentences hypotheses;
    TokenSentences references;
    hypotheses.reserve(count);
    references.reserve(count);
    const std::size_t decode_cap = params.config().max_seq_len - 1;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& [src, tgt] = test.pairs[i];
        const std::vector<int> decoded =
            greedy_decode(params, vocab.encode(src), decode_cap);
        hypotheses.push_back(vocab.decode(decoded));
        references.push_back(tgt);
    }
    return corpus_bleu(hypotheses, references);
}

ResultTable transfer_matrix(const CorpusCollection& collection, const TrainConfig& config,
                            std::size_t eval_limit) {
    collection.validate();
    if (collection.count() < 2) {
        throw ConfigError("transfer_matrix: needs at least 2 corpora");
    }

    ResultTable table;
    table.row_names = collection.names;
    table.col_names = collection.names;

    // one joint vocabulary so every model can score every test set
    const Vocabulary vocab = build_vocab(collection);

    for (std::size_t trained_on = 0; trained_on < collection.count(); ++trained_on) {
        CorpusCollection solo;
        solo.names = {collection.names[trained_on]};
        solo.corpora = {collection.corpora[trained_on]};

        TrainConfig run = config;
        run.static_distribution = uniform_distribution(1);
        run.root_seed = config.root_seed + trained_on;

        TrainResult result = train_multicorpus(run, solo, RewardProvider(), vocab);

        std::vector<double> row;
        row.reserve(collection.count());
        for (std::size_t eval_on = 0; eval_on < collection.count(); ++eval_on) {
            row.push_back(evaluate_corpus_bleu(result.params, result.vocab,
                                               collection.corpora[eval_on].test, eval_limit)
                              .value);
        }
        table.macro.push_back(macro_average(row));
        table.values.push_back(std::move(row));
    }
    table.validate();
    return table;
}

}  // namespace uatlab
