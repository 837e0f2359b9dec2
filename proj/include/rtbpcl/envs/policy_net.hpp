#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/grad/tape.hpp"
#include "rtbpcl/rng.hpp"

namespace rtbpcl::envs {

struct PolicyNetConfig {
    std::vector<std::size_t> hidden{32, 32};
    std::size_t horizon = 10;
    double sigma_init = 0.3;
    double log_std_min = std::log(1e-4);
    double log_std_max = std::log(2.0);
    // Anchor the output to the prior kernel's moment-matched Gaussian instead
    // of N(x_t, sigma_init²) when an environment is attached.
    bool anchor_to_prior = true;
};

// Diagonal Gaussian transition.
template <class S>
struct GaussianParams {
    std::array<S, 2> mean;
    std::array<S, 2> log_std;
};

// MLP (tanh hidden layers) mapping (x_t, time features) to a residual on a
// base Gaussian: mean = base_mean + head[0:2], log_std is the base log-std
// pushed through a scaled tanh onto [log_std_min, log_std_max] with the head
// output head[2:4] added before squashing. The output layer starts at zero,
// so an untrained net reproduces its base exactly.
class PolicyNet {
public:
    static constexpr std::size_t kInputs = 7;

    PolicyNet(PolicyNetConfig config, grad::ParamStore& params, Rng& init_rng,
              const GmmDiffusionEnv* anchor = nullptr, const std::string& prefix = "policy");
    // Attaches to slices previously registered under `prefix` (e.g. from a checkpoint).
    PolicyNet(PolicyNetConfig config, const grad::ParamStore& params, const GmmDiffusionEnv* anchor = nullptr,
              const std::string& prefix = "policy");

    const PolicyNetConfig& config() const { return config_; }
    const GmmDiffusionEnv* anchor() const { return anchor_; }

    static std::array<double, kInputs> features(const Point& x, std::size_t t, std::size_t horizon);

    GaussianMoments base(std::size_t t, const Point& x) const;

    GaussianParams<double> transition(const grad::ParamStore& params, std::size_t t, const Point& x) const;
    GaussianParams<grad::Var> transition(grad::Tape& tape, std::size_t t, const Point& x) const;

    double log_prob(const grad::ParamStore& params, std::size_t t, const Point& x, const Point& next) const;
    grad::Var log_prob(grad::Tape& tape, std::size_t t, const Point& x, const Point& next) const;

    Point sample(const grad::ParamStore& params, std::size_t t, const Point& x, Rng& rng) const;

    grad::Var trajectory_log_prob(grad::Tape& tape, const Trajectory<DiffusionState>& traj) const;
    double trajectory_log_prob(const grad::ParamStore& params, const Trajectory<DiffusionState>& traj) const;

private:
    struct Layer {
        grad::Slice weights;  // out x in, row-major
        grad::Slice bias;
        std::size_t in = 0;
        std::size_t out = 0;
    };

    template <class S, class Affine>
    GaussianParams<S> forward(Affine&& affine, std::vector<S> h, S zero, std::size_t t, const Point& x) const;

    void check_step(std::size_t t) const;

    PolicyNetConfig config_;
    const GmmDiffusionEnv* anchor_;
    std::vector<Layer> layers_;
};

template <class S>
S diag_gaussian_log_prob(const GaussianParams<S>& g, const Point& y) {
    using std::exp;
    using grad::square;
    constexpr double half_log_2pi = 0.91893853320467274178;
    S total = g.log_std[0] * 0.0;
    for (std::size_t d = 0; d < 2; ++d) {
        const S z = (g.mean[d] * -1.0 + y[d]) * exp(g.log_std[d] * -1.0);
        total = total + (g.log_std[d] * -1.0 - half_log_2pi) - square(z) * 0.5;
    }
    return total;
}

}  // namespace rtbpcl::envs
