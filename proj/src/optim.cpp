#include "uatlab/optim.hpp"

#include <cmath>

namespace uatlab {

OptimizerState OptimizerState::create(const ModelParameters& params) {
    OptimizerState state;
    state.first_moment.reserve(params.items().size());
    state.second_moment.reserve(params.items().size());
    for (const auto& [name, tensor] : params.items()) {
        state.first_moment.emplace_back(tensor.size(), 0.0);
        state.second_moment.emplace_back(tensor.size(), 0.0);
    }
    return state;
}

void adam_step(ModelParameters& params, OptimizerState& state, double lr) {
    if (state.first_moment.size() != params.items().size()) {
        throw ContractError("adam_step: optimizer state does not match parameter layout");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t t = 0; t < params.items().size(); ++t) {
        auto& [name, tensor] = params.items()[t];
        std::vector<double>& m = state.first_moment[t];
        std::vector<double>& v = state.second_moment[t];
        const bool has_grad = tensor.has_grad();
        const double* g = has_grad ? tensor.grad().data() : nullptr;

        if (has_grad) {
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                if (!std::isfinite(g[i])) {
                    throw NumericError("adam_step: non-finite gradient in tensor '" + name + "'");
                }
            }
        }
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double gi = has_grad ? g[i] : 0.0;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            tensor.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps) {
    if (step == 0) {
        throw ContractError("lr_at: steps are 1-based");
    }
    if (warmup_steps == 0) {
        return base_lr / std::sqrt(static_cast<double>(step));
    }
    if (step <= warmup_steps) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    return base_lr * std::sqrt(static_cast<double>(warmup_steps) / static_cast<double>(step));
}

}  // namespace uatlab
