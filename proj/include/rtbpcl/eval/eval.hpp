#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "rtbpcl/envs/gmm.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/tabular_env.hpp"
#include "rtbpcl/rng.hpp"

namespace rtbpcl::eval {

using envs::Point;

// Nearest-centre assignment counts; points farther than `radius` from every
// centre are left unassigned.
struct ModeHistogram {
    std::vector<std::size_t> counts;
    std::size_t unassigned = 0;
    double radius = 0.0;

    std::size_t total() const;
    std::vector<double> fractions() const;
};

// Assigns each sample to its nearest mean (ties go to the lowest index).
// The unassigned radius is 3σ·5. Throws PreconditionError on an empty sample set.
ModeHistogram mode_histogram(std::span<const Point> samples, const envs::Gmm& gmm);

// ½ Σ |p_k - q_k|. Throws PreconditionError on a length mismatch or when
// either input is not a distribution within 1e-9.
double tv_distance(std::span<const double> p, std::span<const double> q);

// Mode-weight TV: ½ Σ_k |count_k/N - w_k| plus the unassigned fraction.
double mode_tv(const ModeHistogram& hist, std::span<const double> weights);

struct LogZReport {
    double estimate = 0.0;
    double reference = 0.0;
    double abs_err = 0.0;
};

// Reference from the exact tilted normaliser.
LogZReport logz_report(double estimate, const envs::TabularEnv& env);
// Reference log E_{π_prior}[exp(-E/α)] from `samples` prior-chain draws (log-sum-exp).
LogZReport logz_report(double estimate, const envs::GmmDiffusionEnv& env, Rng& rng, std::size_t samples = 1000000);
double importance_log_z(const envs::GmmDiffusionEnv& env, Rng& rng, std::size_t samples);

nlohmann::json to_json(const ModeHistogram& hist, std::span<const double> weights);

// CSV with header `x,y`; values written with 17 significant digits.
void write_samples_csv(const std::filesystem::path& path, std::span<const Point> samples);
std::vector<Point> read_samples_csv(const std::filesystem::path& path);

}  // namespace rtbpcl::eval
