#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rtbpcl::train {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

// One bias-corrected Adam update of `params` in place. Throws
// PreconditionError on a shape mismatch and NonFiniteError on a NaN/Inf gradient.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr);

}  // namespace rtbpcl::train
