#include "uatlab/dds.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace uatlab {

double gradient_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionError("gradient_cosine: length mismatch " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        std::cerr << "[uatlab] warning: zero-norm gradient in cosine, treating as 0\n";
        return 0.0;
    }
    // rounding can push a self-cosine one ulp past 1
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> batch_gradient(const ModelParameters& params, const Batch& batch) {
    params.zero_grads();
    for (const auto& [name, tensor] : params.items()) {
        tensor.ensure_grad();
    }
    RngStream unused(0, 0);
    LossGraph loss = nll_loss(params, batch, unused, /*dropout_active=*/false);
    loss.graph.backward(loss.output);
    std::vector<double> flat = flatten_gradients(params);
    params.zero_grads();
    return flat;
}

double cosine_reward(const ModelParameters& params, const std::vector<Batch>& dev_batches,
                     const Batch& trn_batch) {
    if (dev_batches.empty()) {
        throw ContractError("cosine_reward: no dev batches");
    }
    const std::vector<double> trn_grad = batch_gradient(params, trn_batch);
    double sum = 0.0;
    for (const Batch& dev : dev_batches) {
        sum += gradient_cosine(batch_gradient(params, dev), trn_grad);
    }
    return sum / static_cast<double>(dev_batches.size());
}

void CosineMatrixLog::add(const std::vector<double>& matrix) {
    if (matrix.size() != n * n) {
        throw DimensionError("CosineMatrixLog: expected " + std::to_string(n * n) +
                             " entries, got " + std::to_string(matrix.size()));
    }
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        sum[i] += matrix[i];
    }
    count += 1;
}

std::vector<double> CosineMatrixLog::average() const {
    if (count == 0) {
        throw ContractError("CosineMatrixLog: nothing accumulated");
    }
    std::vector<double> avg(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        avg[i] = sum[i] / static_cast<double>(count);
    }
    return avg;
}

CosineRewards cosine_rewards(const ModelParameters& params, const std::vector<Batch>& dev_batches,
                             const std::vector<Batch>& trn_batches) {
    if (dev_batches.empty() || dev_batches.size() != trn_batches.size()) {
        throw ContractError("cosine_rewards: need one dev and one train batch per corpus");
    }
    const std::size_t n = dev_batches.size();

    std::vector<std::vector<double>> dev_grads(n);
    std::vector<std::vector<double>> trn_grads(n);
    for (std::size_t i = 0; i < n; ++i) {
        dev_grads[i] = batch_gradient(params, dev_batches[i]);
        trn_grads[i] = batch_gradient(params, trn_batches[i]);
    }

    CosineRewards out;
    out.matrix.assign(n * n, 0.0);
    for (std::size_t dev = 0; dev < n; ++dev) {
        for (std::size_t trn = 0; trn < n; ++trn) {
            out.matrix[dev * n + trn] = gradient_cosine(dev_grads[dev], trn_grads[trn]);
        }
    }
    out.rewards.kind = MeasureKind::kEntEOS;  // unused for cosine rewards
    out.rewards.mc_samples = 0;
    out.rewards.values.resize(n);
    for (std::size_t trn = 0; trn < n; ++trn) {
        double sum = 0.0;
        for (std::size_t dev = 0; dev < n; ++dev) {
            sum += out.matrix[dev * n + trn];
        }
        out.rewards.values[trn] = sum / static_cast<double>(n);
    }
    return out;
}

void accumulate_cosine_matrix(CosineMatrixLog& log, const ModelParameters& params,
                              const std::vector<Batch>& dev_batches,
                              const std::vector<Batch>& trn_batches) {
    log.add(cosine_rewards(params, dev_batches, trn_batches).matrix);
}

}  // namespace uatlab
