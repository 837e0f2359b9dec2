#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "rtbpcl/rng.hpp"

namespace rtbpcl::envs {

using Point = std::array<double, 2>;

// Isotropic Gaussian mixture in R^2 with a shared standard deviation.
struct Gmm {
    std::vector<Point> means;
    std::vector<double> weights;
    double sigma = 1.0;

    std::size_t size() const { return means.size(); }
    // Throws PreconditionError unless weights are a simplex vector (1e-12)
    // aligned with means and sigma > 0.
    void validate() const;
};

// log N(x; mean, variance * I) in two dimensions.
double isotropic_log_normal(const Point& x, const Point& mean, double variance);

double gmm_logpdf(const Gmm& g, const Point& x);
Point gmm_sample(const Gmm& g, Rng& rng);
// Index of the mixture component a draw came from, together with the draw.
std::pair<std::size_t, Point> gmm_sample_labeled(const Gmm& g, Rng& rng);

// side x side equally weighted modes on a regular grid over [lo, hi]^2 with
// sigma = sigma_factor * grid spacing.
Gmm grid_gmm(std::size_t side = 5, double lo = -1.0, double hi = 1.0, double sigma_factor = 0.04);

}  // namespace rtbpcl::envs
