#include "rtbpcl/envs/gmm_env.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"

namespace rtbpcl::envs {

Point MixtureKernel::sample(Rng& rng) const {
    const double u = uniform01(rng);
    const double lse = log_sum_exp(log_weights);
    double cumulative = 0.0;
    std::size_t k = means.size() - 1;
    for (std::size_t j = 0; j < means.size(); ++j) {
        cumulative += std::exp(log_weights[j] - lse);
        if (u < cumulative) {
            k = j;
            break;
        }
    }
    const double sd = std::sqrt(variance);
    return Point{means[k][0] + sd * standard_normal(rng), means[k][1] + sd * standard_normal(rng)};
}

double MixtureKernel::log_prob(const Point& y) const {
    std::vector<double> terms(means.size());
    for (std::size_t j = 0; j < means.size(); ++j) {
        terms[j] = log_weights[j] + isotropic_log_normal(y, means[j], variance);
    }
    return log_sum_exp(terms) - log_sum_exp(log_weights);
}

Point MixtureKernel::mean() const {
    const double lse = log_sum_exp(log_weights);
    Point m{0.0, 0.0};
    for (std::size_t j = 0; j < means.size(); ++j) {
        const double w = std::exp(log_weights[j] - lse);
        m[0] += w * means[j][0];
        m[1] += w * means[j][1];
    }
    return m;
}

Point MixtureKernel::coord_variance() const {
    const double lse = log_sum_exp(log_weights);
    const Point m = mean();
    Point v{variance, variance};
    for (std::size_t j = 0; j < means.size(); ++j) {
        const double w = std::exp(log_weights[j] - lse);
        v[0] += w * (means[j][0] - m[0]) * (means[j][0] - m[0]);
        v[1] += w * (means[j][1] - m[1]) * (means[j][1] - m[1]);
    }
    return v;
}

GmmDiffusionEnv::GmmDiffusionEnv(Gmm prior, std::vector<double> target_weights, std::vector<double> alpha_bar,
                                 double alpha)
    : prior_(std::move(prior)),
      target_weights_(std::move(target_weights)),
      alpha_bar_(std::move(alpha_bar)),
      alpha_(alpha) {
    prior_.validate();
    target_ = prior_;
    target_.weights = target_weights_;
    target_.validate();
    if (alpha_bar_.empty()) {
        throw PreconditionError("diffusion schedule needs at least one step");
    }
    double previous = 1.0;
    for (std::size_t k = 0; k < alpha_bar_.size(); ++k) {
        const double a = alpha_bar_[k];
        if (!(a > 0.0 && a < 1.0) || !(a < previous)) {
            throw PreconditionError("schedule must be strictly decreasing inside (0, 1); violated at level " +
                                    std::to_string(k + 1));
        }
        previous = a;
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw PreconditionError("alpha must be positive");
    }
}

std::vector<double> GmmDiffusionEnv::cosine_schedule(std::size_t steps, double offset, double floor) {
    if (steps == 0) {
        throw PreconditionError("cosine schedule needs at least one step");
    }
    auto f = [&](double k) {
        const double c = std::cos((k / static_cast<double>(steps) + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
        return c * c;
    };
    std::vector<double> out(steps);
    const double f0 = f(0.0);
    double previous = 1.0;
    for (std::size_t k = 1; k <= steps; ++k) {
        double a = std::max(f(static_cast<double>(k)) / f0, floor);
        if (!(a < previous)) {
            a = previous * 0.5;
        }
        out[k - 1] = a;
        previous = a;
    }
    return out;
}

std::vector<double> GmmDiffusionEnv::geometric_schedule(std::size_t steps, double noise_min, double noise_max) {
    if (steps == 0) {
        throw PreconditionError("geometric schedule needs at least one step");
    }
    if (!(noise_min > 0.0 && noise_min < noise_max && noise_max < 1.0)) {
        throw PreconditionError("geometric schedule needs 0 < noise_min < noise_max < 1");
    }
    std::vector<double> out(steps);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double frac = steps == 1 ? 1.0 : static_cast<double>(k - 1) / static_cast<double>(steps - 1);
        const double noise = noise_min * std::pow(noise_max / noise_min, frac);
        out[k - 1] = 1.0 - noise * noise;
    }
    return out;
}

GmmDiffusionEnv GmmDiffusionEnv::fixture(double alpha) {
    Gmm prior = grid_gmm(5, -1.0, 1.0, 0.04);
    std::vector<double> weights(prior.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] = static_cast<double>(k + 1) / 325.0;
    }
    return GmmDiffusionEnv(std::move(prior), std::move(weights), geometric_schedule(20), alpha);
}

double GmmDiffusionEnv::alpha_bar_at_level(std::size_t level) const {
    if (level == 0) {
        return 1.0;
    }
    if (level > alpha_bar_.size()) {
        throw PreconditionError("noise level " + std::to_string(level) + " outside schedule");
    }
    return alpha_bar_[level - 1];
}

Gmm GmmDiffusionEnv::target_gmm() const { return target_; }

Gmm GmmDiffusionEnv::marginal_at_level(std::size_t level) const {
    const double ab = alpha_bar_at_level(level);
    Gmm g = prior_;
    const double scale = std::sqrt(ab);
    for (auto& m : g.means) {
        m = Point{scale * m[0], scale * m[1]};
    }
    g.sigma = std::sqrt(ab * prior_.sigma * prior_.sigma + 1.0 - ab);
    return g;
}

Point GmmDiffusionEnv::initial_sample(Rng& rng) const { return Point{standard_normal(rng), standard_normal(rng)}; }

MixtureKernel GmmDiffusionEnv::prior_kernel(std::size_t t, const Point& x) const {
    if (t >= steps()) {
        throw PreconditionError("step " + std::to_string(t) + " is outside the horizon " + std::to_string(steps()));
    }
    const std::size_t level = steps() - t;
    const double ab = alpha_bar_at_level(level);
    const double ab_prev = alpha_bar_at_level(level - 1);
    const double s2 = prior_.sigma * prior_.sigma;
    const double v = ab * s2 + 1.0 - ab;
    const double v_prev = ab_prev * s2 + 1.0 - ab_prev;
    const double a = ab / ab_prev;
    const double post_var = 1.0 / (1.0 / v_prev + a / (1.0 - a));
    const double sa = std::sqrt(ab);
    const double sa_prev = std::sqrt(ab_prev);
    const double x_coef = post_var * std::sqrt(a) / (1.0 - a);
    const double mu_coef = post_var * sa_prev / v_prev;

    MixtureKernel k;
    k.variance = post_var;
    k.log_weights.resize(prior_.size());
    k.means.resize(prior_.size());
    for (std::size_t j = 0; j < prior_.size(); ++j) {
        const Point& mu = prior_.means[j];
        k.log_weights[j] = std::log(prior_.weights[j]) + isotropic_log_normal(x, Point{sa * mu[0], sa * mu[1]}, v);
        k.means[j] = Point{mu_coef * mu[0] + x_coef * x[0], mu_coef * mu[1] + x_coef * x[1]};
    }
    const double lse = log_sum_exp(k.log_weights);
    for (double& lw : k.log_weights) {
        lw -= lse;
    }
    return k;
}

GaussianMoments GmmDiffusionEnv::prior_moments(std::size_t t, const Point& x) const {
    const MixtureKernel k = prior_kernel(t, x);
    const Point var = k.coord_variance();
    return GaussianMoments{k.mean(), Point{0.5 * std::log(var[0]), 0.5 * std::log(var[1])}};
}

double GmmDiffusionEnv::energy(const Point& x) const { return gmm_logpdf(prior_, x) - gmm_logpdf(target_, x); }

Trajectory<DiffusionState> GmmDiffusionEnv::sample_prior(Rng& rng) const {
    Trajectory<DiffusionState> traj;
    traj.states.push_back(DiffusionState{initial_sample(rng), 0});
    for (std::size_t t = 0; t < steps(); ++t) {
        const MixtureKernel k = prior_kernel(t, traj.states.back().x);
        const Point next = k.sample(rng);
        traj.logp_prior.push_back(k.log_prob(next));
        traj.states.push_back(DiffusionState{next, t + 1});
    }
    traj.logp_prior.push_back(0.0);
    traj.energy = energy(traj.states.back().x);
    return traj;
}

GmmDiffusionEnv GmmDiffusionEnv::with_alpha(double alpha) const {
    return GmmDiffusionEnv(prior_, target_weights_, alpha_bar_, alpha);
}

}  // namespace rtbpcl::envs
