#pragma once

#include <functional>
#include <vector>

#include "uatlab/tensor.hpp"

namespace uatlab {

// Verifies analytic gradients against central finite differences, coordinate
// by coordinate, and returns the worst relative error. The callable must be
// deterministic across invocations (fix the rng or disable dropout); when
// `compute_grads` is true it must also accumulate gradients into the given
// tensors. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator so near-zero gradients do not blow up the ratio.
double finite_difference_check(const std::function<double(bool compute_grads)>& loss_fn,
                               const std::vector<Tensor*>& params, double eps);

}  // namespace uatlab
