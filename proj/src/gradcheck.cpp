#include "uatlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace uatlab {

double finite_difference_check(const std::function<double(bool compute_grads)>& loss_fn,
                               const std::vector<Tensor*>& params, double eps) {
    for (Tensor* t : params) {
        t->set_requires_grad(true);
        t->ensure_grad();
        t->zero_grad();
    }
    loss_fn(true);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor* t : params) {
        analytic.push_back(t->grad());
    }

    double max_rel_error = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + eps;
            const double plus = loss_fn(false);
            t.data()[i] = saved - eps;
            const double minus = loss_fn(false);
            t.data()[i] = saved;

            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic[p][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel_error = std::max(max_rel_error, std::abs(a - numeric) / denom);
        }
    }
    return max_rel_error;
}

}  // namespace uatlab
