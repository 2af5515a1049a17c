#include "uatlab/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace uatlab {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            key += tokens[i + j];
            key += '\x1f';
        }
        counts[key] += 1;
    }
    return counts;
}

}  // namespace

double BleuScore::recompute() const {
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (double p : precisions) {
        if (p > 0.0) {
            log_sum += std::log(p);
            orders += 1;
        }
    }
    if (orders == 0) {
        return 0.0;
    }
    return 100.0 * brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
}

BleuScore corpus_bleu(const TokenSentences& hypotheses, const TokenSentences& references,
                      std::size_t max_n) {
    if (hypotheses.size() != references.size()) {
        throw ContractError("corpus_bleu: " + std::to_string(hypotheses.size()) +
                            " hypotheses vs " + std::to_string(references.size()) + " references");
    }
    if (references.empty()) {
        throw ContractError("corpus_bleu: empty corpus");
    }
    if (max_n < 1 || max_n > 4) {
        throw ConfigError("corpus_bleu: max_n must lie in [1,4]");
    }

    BleuScore score;
    std::array<std::size_t, 4> matches = {0, 0, 0, 0};
    std::array<std::size_t, 4> totals = {0, 0, 0, 0};

    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto& hyp = hypotheses[s];
        const auto& ref = references[s];
        score.hypothesis_tokens += hyp.size();
        score.reference_tokens += ref.size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            if (hyp.size() < n) {
                continue;
            }
            totals[n - 1] += hyp.size() - n + 1;
            const NgramCounts ref_counts = count_ngrams(ref, n);
            for (const auto& [key, count] : count_ngrams(hyp, n)) {
                const auto it = ref_counts.find(key);
                if (it != ref_counts.end()) {
                    matches[n - 1] += std::min(count, it->second);  // clipped
                }
            }
        }
    }

    if (score.hypothesis_tokens == 0) {
        return score;  // all-empty hypotheses score 0
    }

    double smoothing = 1.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        if (totals[n] == 0) {
            continue;  // order excluded from the geometric mean
        }
        if (matches[n] > 0) {
            score.precisions[n] =
                static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
        } else {
            smoothing *= 2.0;
            score.precisions[n] = 1.0 / (smoothing * static_cast<double>(totals[n]));
        }
    }

    if (score.hypothesis_tokens < score.reference_tokens) {
        score.brevity_penalty = std::exp(1.0 - static_cast<double>(score.reference_tokens) /
                                                   static_cast<double>(score.hypothesis_tokens));
    }
    score.value = score.recompute();
    return score;
}

double macro_average(const std::vector<double>& scores) {
    if (scores.empty()) {
        throw ContractError("macro_average: empty score list");
    }
    double sum = 0.0;
    for (double s : scores) {
        sum += s;
    }
    return sum / static_cast<double>(scores.size());
}

}  // namespace uatlab
