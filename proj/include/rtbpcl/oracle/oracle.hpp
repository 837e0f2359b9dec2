#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "rtbpcl/envs/tabular_env.hpp"

namespace rtbpcl::oracle {

struct SoftValues {
    std::vector<double> v;  // V*_soft per state
    std::vector<double> q;  // Q*_soft per edge
};

// Exact ground truth for a tabular environment.
struct OracleTables {
    std::vector<double> v_soft;
    std::vector<double> q_soft;
    std::vector<double> pi_star;       // per edge
    std::vector<double> tilted;        // per terminal, in env.terminals() order
    std::vector<double> wrong_tilted;  // per terminal
    double log_z = 0.0;
};

// Backward induction with the outcome-based reward r(s_T, ⊥) = -E(s_T):
// V(s_T) = -E(s_T), Q(s, s') = V(s'), V(s) = α log Σ π_prior(s'|s) exp(Q/α).
SoftValues soft_values(const envs::TabularEnv& env);

// π*(s'|s) = π_prior(s'|s) exp((Q(s, s') - V(s)) / α), per edge.
std::vector<double> optimal_policy(const envs::TabularEnv& env, const SoftValues& values);

// Probability of ending in each terminal under a per-edge probability table,
// accumulated layer by layer.
std::vector<double> terminal_marginal(const envs::TabularEnv& env, std::span<const double> policy_table);

struct Tilted {
    std::vector<double> distribution;
    double log_z = 0.0;
};

// ∝ π⊤_prior(s_T) exp(-E(s_T)/α) and its log normalizer.
Tilted tilted_target(const envs::TabularEnv& env);
// ∝ π⊤_prior(s_T) exp(exp(-E(s_T))/α): the optimum when exp(-E) is used as the reward.
std::vector<double> wrong_tilted_target(const envs::TabularEnv& env);

OracleTables compute_oracle(const envs::TabularEnv& env);

// Gradient of J(θ) = E_π[-E(s_T) - α log π(τ)/π_prior(τ)] with respect to the
// per-edge softmax logits θ of π, by dynamic programming over the policy's
// own soft values: ∂J/∂θ_{s→s'} = d_π(s) π(s'|s) (Q^π(s, s') - V^π(s)).
std::vector<double> kl_objective_gradient(const envs::TabularEnv& env, std::span<const double> policy_table);

// Value of J(θ) for a per-edge probability table.
double kl_objective(const envs::TabularEnv& env, std::span<const double> policy_table);

nlohmann::json to_json(const envs::TabularEnv& env, const OracleTables& tables);

}  // namespace rtbpcl::oracle
