#pragma once

#include <cstddef>
#include <vector>

#include "rtbpcl/envs/gmm.hpp"
#include "rtbpcl/envs/trajectory.hpp"
#include "rtbpcl/rng.hpp"

namespace rtbpcl::envs {

// State s_t = (x_t, t) of the denoising chain; t = 0 is the initial noise
// draw and t = T is the generated sample.
struct DiffusionState {
    Point x;
    std::size_t t = 0;
};

// Gaussian mixture over the next point with a shared isotropic variance.
struct MixtureKernel {
    std::vector<double> log_weights;
    std::vector<Point> means;
    double variance = 1.0;

    Point sample(Rng& rng) const;
    double log_prob(const Point& y) const;
    // Per-coordinate mean and variance of the mixture.
    Point mean() const;
    Point coord_variance() const;
};

// Moment-matched diagonal Gaussian, used to anchor learned policies.
struct GaussianMoments {
    Point mean;
    Point log_std;
};

// T-step refinement chain whose prior kernel is the exact reverse kernel of a
// variance-preserving forward process applied to `prior`. Noise level k has
// retained-signal fraction alpha_bar(k); level 0 is the data itself and state
// s_t sits at level T - t. The chain starts from x_0 ~ N(0, I).
class GmmDiffusionEnv {
public:
    // `alpha_bar` lists levels 1..T and must be strictly decreasing inside (0, 1).
    GmmDiffusionEnv(Gmm prior, std::vector<double> target_weights, std::vector<double> alpha_bar, double alpha);

    // Cosine schedule ᾱ(k) = f(k)/f(0), f(k) = cos²(((k/T + s)/(1 + s))·π/2),
    // clamped below at `floor` so that ᾱ_T stays positive.
    static std::vector<double> cosine_schedule(std::size_t steps, double offset = 0.008, double floor = 1e-6);

    // Noise std sqrt(1 - ᾱ(k)) spaced geometrically from noise_min (k = 1) to
    // noise_max (k = T). Keeps every reverse step close to Gaussian, which the
    // cosine schedule does not at T = 10: its last step jumps from noise 0.17
    // straight to the 0.02-wide modes.
    static std::vector<double> geometric_schedule(std::size_t steps, double noise_min = 0.02,
                                                  double noise_max = 0.999);

    // Fixture used by the figure experiment: 5x5 grid, weights ∝ 1..25, T = 20
    // with the geometric schedule.
    static GmmDiffusionEnv fixture(double alpha = 1.0);

    std::size_t steps() const { return alpha_bar_.size(); }
    double alpha() const { return alpha_; }
    const Gmm& prior_gmm() const { return prior_; }
    const std::vector<double>& target_weights() const { return target_weights_; }
    const std::vector<double>& schedule() const { return alpha_bar_; }
    double alpha_bar_at_level(std::size_t level) const;

    Gmm target_gmm() const;
    // Marginal of the forward process at noise level k.
    Gmm marginal_at_level(std::size_t level) const;

    Point initial_sample(Rng& rng) const;
    // Exact reverse kernel for s_t -> s_{t+1}; throws PreconditionError when t >= T.
    MixtureKernel prior_kernel(std::size_t t, const Point& x) const;
    GaussianMoments prior_moments(std::size_t t, const Point& x) const;

    // E(x) = -log Σ ω_k N(x; μ_k, σ²I) + log Σ w_k N(x; μ_k, σ²I) with ω the
    // target weights and w the prior weights.
    double energy(const Point& x) const;

    // Full prior trajectory with only logp_prior and energy filled.
    Trajectory<DiffusionState> sample_prior(Rng& rng) const;

    GmmDiffusionEnv with_alpha(double alpha) const;

private:
    Gmm prior_;
    std::vector<double> target_weights_;
    std::vector<double> alpha_bar_;
    double alpha_;
    Gmm target_;
};

}  // namespace rtbpcl::envs
