#pragma once

#include <string>
#include <vector>

#include "uatlab/model.hpp"
#include "uatlab/uncertainty.hpp"

namespace uatlab {

// Flattened parameter gradient with its provenance.
struct GradientVector {
    std::vector<double> values;
    std::string corpus;
    bool from_dev = false;
};

// Cosine between flattened gradients; a zero-norm side yields 0 with a
// warning on stderr.
double gradient_cosine(const std::vector<double>& a, const std::vector<double>& b);

// Batch NLL gradient with dropout disabled (the reward should reflect the
// deterministic loss surface). Leaves the parameter grads zeroed afterwards.
std::vector<double> batch_gradient(const ModelParameters& params, const Batch& batch);

// R_cos(n) = mean_i cos(grad dev_i, grad trn_n).
double cosine_reward(const ModelParameters& params, const std::vector<Batch>& dev_batches,
                     const Batch& trn_batch);

// Running sum of dev-by-train cosine matrices (rows: dev corpus, columns:
// train corpus).
struct CosineMatrixLog {
    std::size_t n = 0;
    std::vector<double> sum;  // n x n row-major
    std::size_t count = 0;

    explicit CosineMatrixLog(std::size_t corpora = 0) : n(corpora), sum(corpora * corpora, 0.0) {}

    void add(const std::vector<double>& matrix);
    std::vector<double> average() const;
};

// One gradient per corpus per side, reused across all pairings.
struct CosineRewards {
    RewardVector rewards;
    std::vector<double> matrix;  // n x n, rows: dev corpus, cols: train corpus
};

CosineRewards cosine_rewards(const ModelParameters& params, const std::vector<Batch>& dev_batches,
                             const std::vector<Batch>& trn_batches);

void accumulate_cosine_matrix(CosineMatrixLog& log, const ModelParameters& params,
                              const std::vector<Batch>& dev_batches,
                              const std::vector<Batch>& trn_batches);

}  // namespace uatlab
