#pragma once

#include <array>
#include <string>
#include <vector>

#include "uatlab/errors.hpp"

namespace uatlab {

// Corpus-level token BLEU in [0,100]. Orders whose n-gram denominator is
// zero (hypotheses shorter than n) are excluded from the geometric mean;
// zero match counts are exponentially smoothed (1/(2^z * denom)).
struct BleuScore {
    double value = 0.0;
    std::array<double, 4> precisions = {0.0, 0.0, 0.0, 0.0};  // as used, including smoothing
    double brevity_penalty = 1.0;
    std::size_t hypothesis_tokens = 0;
    std::size_t reference_tokens = 0;

    // Recomputes the score from the stored components.
    double recompute() const;
};

using TokenSentences = std::vector<std::vector<std::string>>;

BleuScore corpus_bleu(const TokenSentences& hypotheses, const TokenSentences& references,
                      std::size_t max_n = 4);

double macro_average(const std::vector<double>& scores);

}  // namespace uatlab
