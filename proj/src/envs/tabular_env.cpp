#include "rtbpcl/envs/tabular_env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"

namespace rtbpcl::envs {

namespace {

constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
constexpr double kRowTolerance = 1e-9;

std::string state_name(std::size_t s) { return "state " + std::to_string(s); }

}  // namespace

TabularEnv::TabularEnv(std::vector<TabularStateSpec> states, double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw MalformedEnvError("alpha must be a finite positive number");
    }
    const std::size_t n = states.size();
    if (n == 0) {
        throw MalformedEnvError("environment has no states");
    }
    layer_.assign(n, kUnset);
    layer_[0] = 0;
    std::deque<std::size_t> queue{0};
    while (!queue.empty()) {
        const std::size_t s = queue.front();
        queue.pop_front();
        const auto& spec = states[s];
        if (spec.children.size() != spec.prior.size()) {
            throw MalformedEnvError(state_name(s) + " has " + std::to_string(spec.children.size()) +
                                    " children but " + std::to_string(spec.prior.size()) + " prior entries");
        }
        for (StateId c : spec.children) {
            if (c >= n) {
                throw MalformedEnvError(state_name(s) + " points to missing " + state_name(c));
            }
            if (layer_[c] == kUnset) {
                layer_[c] = layer_[s] + 1;
                queue.push_back(c);
            } else if (layer_[c] != layer_[s] + 1) {
                throw MalformedEnvError("graph is not layered: " + state_name(c) + " reached at layers " +
                                        std::to_string(layer_[c]) + " and " + std::to_string(layer_[s] + 1));
            }
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        if (layer_[s] == kUnset) {
            throw MalformedEnvError(state_name(s) + " is unreachable from the root");
        }
        horizon_ = std::max(horizon_, layer_[s]);
    }
    if (horizon_ == 0) {
        throw MalformedEnvError("root has no children");
    }

    energy_.assign(n, std::numeric_limits<double>::quiet_NaN());
    terminal_index_.assign(n, kUnset);
    edge_begin_.reserve(n + 1);
    for (std::size_t s = 0; s < n; ++s) {
        const auto& spec = states[s];
        edge_begin_.push_back(static_cast<EdgeId>(edges_.size()));
        if (spec.children.empty()) {
            if (layer_[s] != horizon_) {
                throw MalformedEnvError(state_name(s) + " has no children before layer " + std::to_string(horizon_));
            }
            if (!spec.energy || !std::isfinite(*spec.energy)) {
                throw MalformedEnvError("terminal " + state_name(s) + " needs a finite energy");
            }
            energy_[s] = *spec.energy;
            terminal_index_[s] = terminals_.size();
            terminals_.push_back(static_cast<StateId>(s));
            continue;
        }
        double total = 0.0;
        for (double p : spec.prior) {
            if (!(p > 0.0) || !std::isfinite(p)) {
                throw MalformedEnvError(state_name(s) + " has a non-positive prior entry");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > kRowTolerance) {
            throw MalformedEnvError(state_name(s) + " prior row sums to " + std::to_string(total));
        }
        std::vector<StateId> seen = spec.children;
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
            throw MalformedEnvError(state_name(s) + " lists a child twice");
        }
        for (std::size_t i = 0; i < spec.children.size(); ++i) {
            edges_.push_back(Edge{static_cast<StateId>(s), spec.children[i], std::log(spec.prior[i] / total)});
        }
    }
    edge_begin_.push_back(static_cast<EdgeId>(edges_.size()));
}

double TabularEnv::energy(StateId s) const {
    if (s >= num_states() || !is_terminal(s)) {
        throw PreconditionError(state_name(s) + " is not terminal");
    }
    return energy_[s];
}

std::span<const Edge> TabularEnv::edges_of(StateId s) const {
    return std::span<const Edge>(edges_).subspan(edge_begin_[s], edge_begin_[s + 1] - edge_begin_[s]);
}

std::vector<double> TabularEnv::prior_table() const {
    std::vector<double> out(edges_.size());
    std::transform(edges_.begin(), edges_.end(), out.begin(), [](const Edge& e) { return std::exp(e.log_prior); });
    return out;
}

std::size_t TabularEnv::terminal_index(StateId s) const {
    if (s >= num_states() || terminal_index_[s] == kUnset) {
        throw PreconditionError(state_name(s) + " is not terminal");
    }
    return terminal_index_[s];
}

std::vector<TabularStateSpec> TabularEnv::to_specs() const {
    std::vector<TabularStateSpec> out(num_states());
    for (StateId s = 0; s < num_states(); ++s) {
        for (const auto& e : edges_of(s)) {
            out[s].children.push_back(e.to);
            out[s].prior.push_back(std::exp(e.log_prior));
        }
        if (is_terminal(s)) {
            out[s].energy = energy_[s];
        }
    }
    return out;
}

TabularEnv TabularEnv::with_alpha(double alpha) const { return TabularEnv(to_specs(), alpha); }

TabularEnv TabularEnv::with_energies(std::span<const double> terminal_energies) const {
    if (terminal_energies.size() != terminals_.size()) {
        throw PreconditionError("expected one energy per terminal state");
    }
    auto specs = to_specs();
    for (std::size_t i = 0; i < terminals_.size(); ++i) {
        specs[terminals_[i]].energy = terminal_energies[i];
    }
    return TabularEnv(std::move(specs), alpha_);
}

namespace {

void enumerate_from(const TabularEnv& env, std::span<const double> edge_log_probs, EnumeratedPath& current,
                    std::vector<EnumeratedPath>& out) {
    const StateId s = current.states.back();
    if (env.is_terminal(s)) {
        out.push_back(current);
        return;
    }
    for (EdgeId e = env.first_edge(s); e < env.last_edge(s); ++e) {
        const double saved = current.log_prob;
        current.states.push_back(env.edge(e).to);
        current.edges.push_back(e);
        current.log_prob += edge_log_probs[e];
        enumerate_from(env, edge_log_probs, current, out);
        current.states.pop_back();
        current.edges.pop_back();
        current.log_prob = saved;
    }
}

}  // namespace

std::vector<EnumeratedPath> tabular_enumerate(const TabularEnv& env, std::span<const double> edge_log_probs) {
    if (edge_log_probs.size() != env.num_edges()) {
        throw PreconditionError("edge table size does not match the environment");
    }
    std::vector<EnumeratedPath> out;
    EnumeratedPath current;
    current.states.push_back(env.root());
    enumerate_from(env, edge_log_probs, current, out);
    return out;
}

std::vector<EnumeratedPath> tabular_enumerate(const TabularEnv& env) {
    std::vector<double> log_prior(env.num_edges());
    for (EdgeId e = 0; e < env.num_edges(); ++e) {
        log_prior[e] = env.edge(e).log_prior;
    }
    return tabular_enumerate(env, log_prior);
}

TabularEnv random_tabular_env(Rng& rng, const RandomEnvOptions& options) {
    if (options.min_depth < 1 || options.max_depth < options.min_depth || options.max_branching < 1 ||
        options.max_layer_width < 1) {
        throw PreconditionError("invalid random environment options");
    }
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    const std::size_t depth = pick(options.min_depth, options.max_depth);
    std::vector<std::size_t> widths{1};
    for (std::size_t l = 1; l <= depth; ++l) {
        const std::size_t cap = std::min(options.max_layer_width, widths.back() * options.max_branching);
        widths.push_back(pick(1, cap));
    }
    std::vector<std::size_t> first_of_layer{0};
    for (std::size_t w : widths) {
        first_of_layer.push_back(first_of_layer.back() + w);
    }
    std::vector<TabularStateSpec> specs(first_of_layer.back());

    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t parent0 = first_of_layer[l];
        const std::size_t child0 = first_of_layer[l + 1];
        const std::size_t n_parents = widths[l];
        const std::size_t n_children = widths[l + 1];
        std::vector<std::vector<bool>> linked(n_parents, std::vector<bool>(n_children, false));
        std::vector<std::size_t> degree(n_parents, 0);
        // Give every child one parent with spare capacity, then make sure every
        // parent has a child, then add random extra edges.
        for (std::size_t c = 0; c < n_children; ++c) {
            std::vector<std::size_t> open;
            for (std::size_t p = 0; p < n_parents; ++p) {
                if (degree[p] < options.max_branching) {
                    open.push_back(p);
                }
            }
            const std::size_t p = open[pick(0, open.size() - 1)];
            linked[p][c] = true;
            ++degree[p];
        }
        for (std::size_t p = 0; p < n_parents; ++p) {
            const std::size_t target = pick(1, std::min(options.max_branching, n_children));
            while (degree[p] < target) {
                const std::size_t c = pick(0, n_children - 1);
                if (!linked[p][c]) {
                    linked[p][c] = true;
                    ++degree[p];
                }
            }
        }
        for (std::size_t p = 0; p < n_parents; ++p) {
            auto& spec = specs[parent0 + p];
            double total = 0.0;
            for (std::size_t c = 0; c < n_children; ++c) {
                if (linked[p][c]) {
                    spec.children.push_back(static_cast<StateId>(child0 + c));
                    spec.prior.push_back(std::uniform_real_distribution<double>(0.05, 1.0)(rng));
                    total += spec.prior.back();
                }
            }
            for (double& q : spec.prior) {
                q /= total;
            }
        }
    }
    for (std::size_t s = first_of_layer[depth]; s < first_of_layer[depth + 1]; ++s) {
        specs[s].energy = std::uniform_real_distribution<double>(-options.energy_scale, options.energy_scale)(rng);
    }
    const double log_alpha = std::uniform_real_distribution<double>(std::log(options.min_alpha),
                                                                    std::log(options.max_alpha))(rng);
    return TabularEnv(std::move(specs), std::exp(log_alpha));
}

TabularPolicy::TabularPolicy(const TabularEnv& env, grad::ParamStore& params, std::string name)
    : env_(&env), logits_(params.add(std::move(name), env.num_edges())) {
    auto view = params.view(logits_.name);
    for (EdgeId e = 0; e < env.num_edges(); ++e) {
        view[e] = env.edge(e).log_prior;
    }
}

TabularPolicy::TabularPolicy(const TabularEnv& env, const grad::Slice& logits) : env_(&env), logits_(logits) {
    if (logits.length != env.num_edges()) {
        throw PreconditionError("logit slice '" + logits.name + "' does not match the environment's edge count");
    }
}

std::vector<double> TabularPolicy::edge_log_probs(const grad::ParamStore& params) const {
    std::vector<double> out(env_->num_edges());
    const double* logits = params.values().data() + logits_.offset;
    for (StateId s = 0; s < env_->num_states(); ++s) {
        const EdgeId b = env_->first_edge(s);
        const EdgeId e = env_->last_edge(s);
        if (b == e) {
            continue;
        }
        const double lse = log_sum_exp(std::span<const double>(logits + b, e - b));
        for (EdgeId k = b; k < e; ++k) {
            out[k] = logits[k] - lse;
        }
    }
    return out;
}

std::vector<double> TabularPolicy::edge_probs(const grad::ParamStore& params) const {
    auto out = edge_log_probs(params);
    for (double& x : out) {
        x = std::exp(x);
    }
    return out;
}

grad::Var TabularPolicy::edge_log_prob(grad::Tape& tape, EdgeId e) const {
    const StateId s = env_->edge(e).from;
    const EdgeId b = env_->first_edge(s);
    const EdgeId end = env_->last_edge(s);
    // Shift by the current max for stability; the shift is a constant so the
    // gradient of the log-softmax is unchanged.
    double shift = -std::numeric_limits<double>::infinity();
    for (EdgeId k = b; k < end; ++k) {
        shift = std::max(shift, tape.bound_params()[logits_.offset + k]);
    }
    grad::Var total = tape.constant(0.0);
    for (EdgeId k = b; k < end; ++k) {
        total = total + grad::exp(tape.param(logits_, k) - shift);
    }
    return tape.param(logits_, e) - (grad::log(total) + shift);
}

grad::Var TabularPolicy::path_log_prob(grad::Tape& tape, std::span<const EdgeId> path) const {
    grad::Var sum = tape.constant(0.0);
    for (EdgeId e : path) {
        sum = sum + edge_log_prob(tape, e);
    }
    return sum;
}

EdgeId TabularPolicy::edge_between(StateId s, StateId child) const {
    for (EdgeId e = env_->first_edge(s); e < env_->last_edge(s); ++e) {
        if (env_->edge(e).to == child) {
            return e;
        }
    }
    throw PreconditionError("no edge from " + state_name(s) + " to " + state_name(child));
}

grad::Var TabularPolicy::trajectory_log_prob(grad::Tape& tape, const Trajectory<StateId>& traj) const {
    grad::Var sum = tape.constant(0.0);
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
        sum = sum + edge_log_prob(tape, edge_between(traj.states[t], traj.states[t + 1]));
    }
    return sum;
}

}  // namespace rtbpcl::envs
