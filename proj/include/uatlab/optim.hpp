#pragma once

#include <cstddef>
#include <vector>

#include "uatlab/model.hpp"

namespace uatlab {

// Adam moment buffers, one pair per parameter tensor in registration order.
struct OptimizerState {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static OptimizerState create(const ModelParameters& params);
};

// One bias-corrected Adam update from the gradients currently stored on the
// parameter tensors; a tensor without a gradient buffer counts as zero grad.
void adam_step(ModelParameters& params, OptimizerState& state, double lr);

// Linear warmup to base_lr, then inverse square-root decay. Steps are 1-based.
double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps);

}  // namespace uatlab
