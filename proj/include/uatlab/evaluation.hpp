#pragma once

#include <string>
#include <vector>

#include "uatlab/bleu.hpp"
#include "uatlab/scheduler.hpp"

namespace uatlab {

// Named score grid with a per-row macro average.
struct ResultTable {
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;
    std::vector<std::vector<double>> values;  // rows x cols
    std::vector<double> macro;                // per-row mean

    void validate() const;
    std::string to_csv() const;
    std::string to_text() const;  // aligned plain-text table
};

// Greedy-decodes a test split and scores it against the references.
// eval_limit == 0 evaluates every sentence.
BleuScore evaluate_corpus_bleu(const ModelParameters& params, const Vocabulary& vocab,
                               const ParallelCorpus& test, std::size_t eval_limit = 0);

// Trains one single-corpus model per corpus and evaluates every model on
// every test set; rows are the training corpus, columns the evaluated one.
ResultTable transfer_matrix(const CorpusCollection& collection, const TrainConfig& config,
                            std::size_t eval_limit = 0);

}  // namespace uatlab
