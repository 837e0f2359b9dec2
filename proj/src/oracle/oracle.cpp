#include "rtbpcl/oracle/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"

namespace rtbpcl::oracle {

using envs::EdgeId;
using envs::StateId;
using envs::TabularEnv;

namespace {

std::vector<StateId> states_by_layer(const TabularEnv& env) {
    std::vector<StateId> order(env.num_states());
    std::iota(order.begin(), order.end(), StateId{0});
    std::stable_sort(order.begin(), order.end(), [&](StateId a, StateId b) { return env.layer(a) < env.layer(b); });
    return order;
}

void check_table(const TabularEnv& env, std::span<const double> table) {
    if (table.size() != env.num_edges()) {
        throw PreconditionError("policy table has " + std::to_string(table.size()) + " entries, expected " +
                                std::to_string(env.num_edges()));
    }
}

std::vector<double> reach_probabilities(const TabularEnv& env, std::span<const double> policy_table) {
    std::vector<double> reach(env.num_states(), 0.0);
    reach[env.root()] = 1.0;
    for (StateId s : states_by_layer(env)) {
        for (EdgeId e = env.first_edge(s); e < env.last_edge(s); ++e) {
            reach[env.edge(e).to] += reach[s] * policy_table[e];
        }
    }
    return reach;
}

}  // namespace

SoftValues soft_values(const TabularEnv& env) {
    const double alpha = env.alpha();
    SoftValues out;
    out.v.assign(env.num_states(), 0.0);
    out.q.assign(env.num_edges(), 0.0);
    auto order = states_by_layer(env);
    std::vector<double> terms;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const StateId s = *it;
        if (env.is_terminal(s)) {
            // Only child is ⊥: V(s_T) = Q(s_T, ⊥) = r(s_T, ⊥) + V(⊥) = -E(s_T).
            out.v[s] = -env.energy(s);
            continue;
        }
        terms.clear();
        for (EdgeId e = env.first_edge(s); e < env.last_edge(s); ++e) {
            out.q[e] = out.v[env.edge(e).to];
            terms.push_back(env.edge(e).log_prior + out.q[e] / alpha);
        }
        out.v[s] = alpha * log_sum_exp(terms);
    }
    return out;
}

std::vector<double> optimal_policy(const TabularEnv& env, const SoftValues& values) {
    std::vector<double> pi(env.num_edges());
    for (EdgeId e = 0; e < env.num_edges(); ++e) {
        const auto& edge = env.edge(e);
        pi[e] = std::exp(edge.log_prior + (values.q[e] - values.v[edge.from]) / env.alpha());
    }
    return pi;
}

std::vector<double> terminal_marginal(const TabularEnv& env, std::span<const double> policy_table) {
    check_table(env, policy_table);
    const auto reach = reach_probabilities(env, policy_table);
    std::vector<double> out;
    out.reserve(env.terminals().size());
    for (StateId s : env.terminals()) {
        out.push_back(reach[s]);
    }
    return out;
}

Tilted tilted_target(const TabularEnv& env) {
    const auto prior = terminal_marginal(env, env.prior_table());
    const auto& terms = env.terminals();
    std::vector<double> logits(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        logits[i] = std::log(prior[i]) - env.energy(terms[i]) / env.alpha();
    }
    Tilted out;
    out.log_z = log_sum_exp(logits);
    out.distribution.resize(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        out.distribution[i] = std::exp(logits[i] - out.log_z);
    }
    return out;
}

std::vector<double> wrong_tilted_target(const TabularEnv& env) {
    const auto prior = terminal_marginal(env, env.prior_table());
    const auto& terms = env.terminals();
    std::vector<double> logits(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        logits[i] = std::log(prior[i]) + std::exp(-env.energy(terms[i])) / env.alpha();
    }
    const double lse = log_sum_exp(logits);
    std::vector<double> out(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
        out[i] = std::exp(logits[i] - lse);
    }
    return out;
}

OracleTables compute_oracle(const TabularEnv& env) {
    OracleTables t;
    auto values = soft_values(env);
    t.pi_star = optimal_policy(env, values);
    t.v_soft = std::move(values.v);
    t.q_soft = std::move(values.q);
    auto tilted = tilted_target(env);
    t.tilted = std::move(tilted.distribution);
    t.log_z = tilted.log_z;
    t.wrong_tilted = wrong_tilted_target(env);
    return t;
}

namespace {

// Soft values of a fixed policy: V(s_T) = -E, Q(s, s') = -α log(π/π_prior) + V(s').
SoftValues policy_soft_values(const TabularEnv& env, std::span<const double> policy_table) {
    SoftValues out;
    out.v.assign(env.num_states(), 0.0);
    out.q.assign(env.num_edges(), 0.0);
    auto order = states_by_layer(env);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const StateId s = *it;
        if (env.is_terminal(s)) {
            out.v[s] = -env.energy(s);
            continue;
        }
        double v = 0.0;
        for (EdgeId e = env.first_edge(s); e < env.last_edge(s); ++e) {
            const auto& edge = env.edge(e);
            out.q[e] = -env.alpha() * (std::log(policy_table[e]) - edge.log_prior) + out.v[edge.to];
            v += policy_table[e] * out.q[e];
        }
        out.v[s] = v;
    }
    return out;
}

}  // namespace

std::vector<double> kl_objective_gradient(const TabularEnv& env, std::span<const double> policy_table) {
    check_table(env, policy_table);
    const auto values = policy_soft_values(env, policy_table);
    const auto reach = reach_probabilities(env, policy_table);
    std::vector<double> grad(env.num_edges(), 0.0);
    for (EdgeId e = 0; e < env.num_edges(); ++e) {
        const StateId s = env.edge(e).from;
        grad[e] = reach[s] * policy_table[e] * (values.q[e] - values.v[s]);
    }
    return grad;
}

double kl_objective(const TabularEnv& env, std::span<const double> policy_table) {
    check_table(env, policy_table);
    return policy_soft_values(env, policy_table).v[env.root()];
}

nlohmann::json to_json(const TabularEnv& env, const OracleTables& tables) {
    nlohmann::json edges = nlohmann::json::array();
    for (EdgeId e = 0; e < env.num_edges(); ++e) {
        edges.push_back({{"from", env.edge(e).from},
                         {"to", env.edge(e).to},
                         {"q_soft", tables.q_soft[e]},
                         {"pi_star", tables.pi_star[e]},
                         {"prior", std::exp(env.edge(e).log_prior)}});
    }
    return nlohmann::json{{"schema", "rtbpcl.oracle/1"},
                          {"alpha", env.alpha()},
                          {"log_z", tables.log_z},
                          {"v_soft", tables.v_soft},
                          {"edges", std::move(edges)},
                          {"terminals", env.terminals()},
                          {"tilted", tables.tilted},
                          {"wrong_tilted", tables.wrong_tilted}};
}

}  // namespace rtbpcl::oracle
