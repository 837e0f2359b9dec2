#include "rtbpcl/train/adam.hpp"

#include <cmath>
#include <string>

#include "rtbpcl/error.hpp"

namespace rtbpcl::train {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw PreconditionError("adam_step: parameter, gradient and state sizes differ");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw NonFiniteError("adam_step: gradient entry " + std::to_string(i) + " is not finite");
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
    }
}

}  // namespace rtbpcl::train
