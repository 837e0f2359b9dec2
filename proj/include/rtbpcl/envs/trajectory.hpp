#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace rtbpcl::envs {

// τ = (s_0, ..., s_T, ⊥). Each log-density sequence has T+1 entries: entry t
// is log π(s_{t+1} | s_t) and the final entry is the forced s_T → ⊥ step,
// which has log-probability 0 under every policy.
template <class State>
struct Trajectory {
    std::vector<State> states;
    std::vector<double> logp_prior;
    std::vector<double> logp_model;
    std::vector<double> logp_behavior;
    double energy = 0.0;

    // Number of stochastic transitions (excludes the forced ⊥ step).
    std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }

    double log_prior() const { return std::accumulate(logp_prior.begin(), logp_prior.end(), 0.0); }
    double log_model() const { return std::accumulate(logp_model.begin(), logp_model.end(), 0.0); }
    double log_behavior() const { return std::accumulate(logp_behavior.begin(), logp_behavior.end(), 0.0); }
};

}  // namespace rtbpcl::envs
