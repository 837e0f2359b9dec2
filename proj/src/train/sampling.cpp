#include "rtbpcl/train/sampling.hpp"

#include <cmath>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"

namespace rtbpcl::train {

using envs::DiffusionState;
using envs::EdgeId;
using envs::Point;
using envs::StateId;
using envs::Trajectory;

namespace {

void check_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw PreconditionError("exploration epsilon must lie in [0, 1]");
    }
}

double mixture_log_prob(double log_model, double log_prior, double epsilon) {
    if (epsilon == 0.0) {
        return log_model;
    }
    if (epsilon == 1.0) {
        return log_prior;
    }
    return log_add_exp(std::log1p(-epsilon) + log_model, std::log(epsilon) + log_prior);
}

}  // namespace

std::vector<Trajectory<StateId>> behavior_sample(const envs::TabularPolicy& policy, const grad::ParamStore& params,
                                                 double epsilon, std::size_t n, Rng& rng) {
    check_epsilon(epsilon);
    const auto& env = policy.env();
    const auto log_model = policy.edge_log_probs(params);
    std::vector<Trajectory<StateId>> out(n);
    for (auto& traj : out) {
        StateId s = env.root();
        traj.states.push_back(s);
        while (!env.is_terminal(s)) {
            const EdgeId b = env.first_edge(s);
            const EdgeId e_end = env.last_edge(s);
            const double u = uniform01(rng);
            double cumulative = 0.0;
            EdgeId chosen = e_end - 1;
            for (EdgeId e = b; e < e_end; ++e) {
                cumulative += (1.0 - epsilon) * std::exp(log_model[e]) + epsilon * std::exp(env.edge(e).log_prior);
                if (u < cumulative) {
                    chosen = e;
                    break;
                }
            }
            const double lp = env.edge(chosen).log_prior;
            traj.logp_prior.push_back(lp);
            traj.logp_model.push_back(log_model[chosen]);
            traj.logp_behavior.push_back(mixture_log_prob(log_model[chosen], lp, epsilon));
            s = env.edge(chosen).to;
            traj.states.push_back(s);
        }
        traj.logp_prior.push_back(0.0);
        traj.logp_model.push_back(0.0);
        traj.logp_behavior.push_back(0.0);
        traj.energy = env.energy(s);
    }
    return out;
}

std::vector<Trajectory<DiffusionState>> behavior_sample(const envs::GmmDiffusionEnv& env, const envs::PolicyNet& net,
                                                        const grad::ParamStore& params, double epsilon, std::size_t n,
                                                        Rng& rng) {
    check_epsilon(epsilon);
    std::vector<Trajectory<DiffusionState>> out(n);
    for (auto& traj : out) {
        traj.states.push_back(DiffusionState{env.initial_sample(rng), 0});
        for (std::size_t t = 0; t < env.steps(); ++t) {
            const Point x = traj.states.back().x;
            const auto kernel = env.prior_kernel(t, x);
            const auto gauss = net.transition(params, t, x);
            const bool explore = epsilon > 0.0 && uniform01(rng) < epsilon;
            Point next;
            if (explore) {
                next = kernel.sample(rng);
            } else {
                next = Point{gauss.mean[0] + std::exp(gauss.log_std[0]) * standard_normal(rng),
                             gauss.mean[1] + std::exp(gauss.log_std[1]) * standard_normal(rng)};
            }
            const double lp = kernel.log_prob(next);
            const double lm = envs::diag_gaussian_log_prob(gauss, next);
            traj.logp_prior.push_back(lp);
            traj.logp_model.push_back(lm);
            traj.logp_behavior.push_back(mixture_log_prob(lm, lp, epsilon));
            traj.states.push_back(DiffusionState{next, t + 1});
        }
        traj.logp_prior.push_back(0.0);
        traj.logp_model.push_back(0.0);
        traj.logp_behavior.push_back(0.0);
        traj.energy = env.energy(traj.states.back().x);
    }
    return out;
}

std::vector<Point> sample_terminals(const envs::GmmDiffusionEnv& env, const envs::PolicyNet& net,
                                    const grad::ParamStore& params, std::size_t n, Rng& rng) {
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Point x = env.initial_sample(rng);
        for (std::size_t t = 0; t < env.steps(); ++t) {
            x = net.sample(params, t, x, rng);
        }
        out.push_back(x);
    }
    return out;
}

std::vector<Point> sample_prior_terminals(const envs::GmmDiffusionEnv& env, std::size_t n, Rng& rng) {
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Point x = env.initial_sample(rng);
        for (std::size_t t = 0; t < env.steps(); ++t) {
            x = env.prior_kernel(t, x).sample(rng);
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace rtbpcl::train
