#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rtbpcl/envs/trajectory.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/grad/tape.hpp"
#include "rtbpcl/rng.hpp"

namespace rtbpcl::envs {

using StateId = std::uint32_t;
using EdgeId = std::uint32_t;

// Raw description of one state, as read from a fixture.
struct TabularStateSpec {
    std::vector<StateId> children;
    std::vector<double> prior;     // probabilities, aligned with `children`
    std::optional<double> energy;  // required iff the state is terminal
};

struct Edge {
    StateId from;
    StateId to;
    double log_prior;
};

// Layered finite-horizon MDP rooted at state 0. Terminal states (those at
// layer T) have no children and always step to ⊥ with probability 1; the
// outcome-based reward r(s_T, ⊥) = -E(s_T) is the only nonzero reward.
class TabularEnv {
public:
    // Validates the layered structure and prior rows; throws MalformedEnvError.
    TabularEnv(std::vector<TabularStateSpec> states, double alpha);

    std::size_t horizon() const { return horizon_; }
    std::size_t num_states() const { return layer_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    double alpha() const { return alpha_; }
    StateId root() const { return 0; }

    std::size_t layer(StateId s) const { return layer_[s]; }
    bool is_terminal(StateId s) const { return layer_[s] == horizon_; }
    // Energy of a terminal state; throws PreconditionError otherwise.
    double energy(StateId s) const;

    // Outgoing edges of `s` occupy the contiguous id range [first_edge, last_edge).
    EdgeId first_edge(StateId s) const { return edge_begin_[s]; }
    EdgeId last_edge(StateId s) const { return edge_begin_[s + 1]; }
    std::span<const Edge> edges_of(StateId s) const;
    const Edge& edge(EdgeId e) const { return edges_[e]; }
    const std::vector<Edge>& edges() const { return edges_; }

    // Prior transition probabilities, one per edge.
    std::vector<double> prior_table() const;

    const std::vector<StateId>& terminals() const { return terminals_; }
    // Position of terminal `s` in terminals().
    std::size_t terminal_index(StateId s) const;

    TabularEnv with_alpha(double alpha) const;
    TabularEnv with_energies(std::span<const double> terminal_energies) const;

    // Round-trips the constructor input.
    std::vector<TabularStateSpec> to_specs() const;

private:
    double alpha_;
    std::size_t horizon_ = 0;
    std::vector<std::size_t> layer_;
    std::vector<EdgeId> edge_begin_;
    std::vector<Edge> edges_;
    std::vector<double> energy_;
    std::vector<StateId> terminals_;
    std::vector<std::size_t> terminal_index_;
};

struct EnumeratedPath {
    std::vector<StateId> states;
    std::vector<EdgeId> edges;
    double log_prob = 0.0;
};

// Every root-to-⊥ path exactly once, with its probability under the prior.
std::vector<EnumeratedPath> tabular_enumerate(const TabularEnv& env);

// Same enumeration scored under an arbitrary per-edge log-probability table.
std::vector<EnumeratedPath> tabular_enumerate(const TabularEnv& env, std::span<const double> edge_log_probs);

struct RandomEnvOptions {
    std::size_t min_depth = 1;
    std::size_t max_depth = 4;
    std::size_t max_branching = 4;
    std::size_t max_layer_width = 6;
    double energy_scale = 2.0;
    double min_alpha = 0.1;
    double max_alpha = 10.0;
};

// Random layered DAG: layer widths, child sets, prior rows, terminal energies
// and alpha (log-uniform) are all drawn from `rng`. Every state is reachable.
TabularEnv random_tabular_env(Rng& rng, const RandomEnvOptions& options = {});

// Softmax-over-children policy with one logit per edge.
class TabularPolicy {
public:
    // Registers `name` (one logit per edge) in `params`, initialised to the log prior.
    TabularPolicy(const TabularEnv& env, grad::ParamStore& params, std::string name = "policy.logits");
    // Attaches to an existing slice.
    TabularPolicy(const TabularEnv& env, const grad::Slice& logits);

    const TabularEnv& env() const { return *env_; }
    const grad::Slice& logits() const { return logits_; }

    std::vector<double> edge_log_probs(const grad::ParamStore& params) const;
    std::vector<double> edge_probs(const grad::ParamStore& params) const;

    grad::Var edge_log_prob(grad::Tape& tape, EdgeId e) const;
    grad::Var trajectory_log_prob(grad::Tape& tape, const Trajectory<StateId>& traj) const;
    grad::Var path_log_prob(grad::Tape& tape, std::span<const EdgeId> path) const;

    // Finds the edge s -> child; throws PreconditionError when absent.
    EdgeId edge_between(StateId s, StateId child) const;

private:
    const TabularEnv* env_;
    grad::Slice logits_;
};

}  // namespace rtbpcl::envs
