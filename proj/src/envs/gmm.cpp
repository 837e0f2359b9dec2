#include "rtbpcl/envs/gmm.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rtbpcl/error.hpp"
#include "rtbpcl/numeric.hpp"

namespace rtbpcl::envs {

void Gmm::validate() const {
    if (means.empty() || means.size() != weights.size()) {
        throw PreconditionError("mixture needs one weight per mean");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw PreconditionError("mixture sigma must be positive");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw PreconditionError("mixture weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw PreconditionError("mixture weights sum to " + std::to_string(total) + ", not 1");
    }
}

double isotropic_log_normal(const Point& x, const Point& mean, double variance) {
    const double dx = x[0] - mean[0];
    const double dy = x[1] - mean[1];
    return -kLog2Pi - std::log(variance) - 0.5 * (dx * dx + dy * dy) / variance;
}

double gmm_logpdf(const Gmm& g, const Point& x) {
    std::vector<double> terms(g.size());
    const double var = g.sigma * g.sigma;
    for (std::size_t k = 0; k < g.size(); ++k) {
        terms[k] = std::log(g.weights[k]) + isotropic_log_normal(x, g.means[k], var);
    }
    return log_sum_exp(terms);
}

std::pair<std::size_t, Point> gmm_sample_labeled(const Gmm& g, Rng& rng) {
    std::discrete_distribution<std::size_t> pick(g.weights.begin(), g.weights.end());
    const std::size_t k = pick(rng);
    const Point p{g.means[k][0] + g.sigma * standard_normal(rng), g.means[k][1] + g.sigma * standard_normal(rng)};
    return {k, p};
}

Point gmm_sample(const Gmm& g, Rng& rng) { return gmm_sample_labeled(g, rng).second; }

Gmm grid_gmm(std::size_t side, double lo, double hi, double sigma_factor) {
    if (side < 2 || !(hi > lo)) {
        throw PreconditionError("grid mixture needs side >= 2 and hi > lo");
    }
    Gmm g;
    const double spacing = (hi - lo) / static_cast<double>(side - 1);
    for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) {
            g.means.push_back(Point{lo + spacing * static_cast<double>(i), lo + spacing * static_cast<double>(j)});
        }
    }
    g.weights.assign(side * side, 1.0 / static_cast<double>(side * side));
    g.sigma = sigma_factor * spacing;
    return g;
}

}  // namespace rtbpcl::envs
