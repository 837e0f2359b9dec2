#pragma once

#include <cstddef>
#include <vector>

#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/policy_net.hpp"
#include "rtbpcl/envs/tabular_env.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/rng.hpp"

namespace rtbpcl::train {

// Draws `n` trajectories from π_b = (1-ε)·π_φ + ε·π_prior, mixed per
// transition. Each step caches log π_prior, log π_φ and the exact mixture
// density log π_b. Throws PreconditionError unless 0 <= ε <= 1.
std::vector<envs::Trajectory<envs::StateId>> behavior_sample(const envs::TabularPolicy& policy,
                                                             const grad::ParamStore& params, double epsilon,
                                                             std::size_t n, Rng& rng);

std::vector<envs::Trajectory<envs::DiffusionState>> behavior_sample(const envs::GmmDiffusionEnv& env,
                                                                    const envs::PolicyNet& net,
                                                                    const grad::ParamStore& params, double epsilon,
                                                                    std::size_t n, Rng& rng);

// Terminal points of `n` on-policy trajectories (no density bookkeeping).
std::vector<envs::Point> sample_terminals(const envs::GmmDiffusionEnv& env, const envs::PolicyNet& net,
                                          const grad::ParamStore& params, std::size_t n, Rng& rng);
std::vector<envs::Point> sample_prior_terminals(const envs::GmmDiffusionEnv& env, std::size_t n, Rng& rng);

}  // namespace rtbpcl::train
