#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/envs/policy_net.hpp"
#include "rtbpcl/envs/tabular_env.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/objectives/objectives.hpp"

namespace rtbpcl::train {

struct TrainConfig {
    objectives::Objective objective = objectives::Objective::rtb;
    double alpha = 1.0;
    double lambda = 1.0;
    std::size_t batch_size = 64;
    std::size_t iterations = 2000;
    double lr_policy = 1e-3;
    double lr_scalar = 1e-1;
    double epsilon = 0.1;
    std::uint64_t seed = 0;
    std::size_t log_every = 10;
    // Initial log Z; Trust-PCL starts from V(s_0) = α · init_log_z.
    double init_log_z = 0.0;
    envs::PolicyNetConfig policy;
    // Samples drawn for the mode-TV metric on the mixture environment.
    std::size_t tv_samples = 2000;

    // Throws ConfigError whose message names the offending field.
    void validate() const;
};

struct MetricsRow {
    std::size_t iteration = 0;
    double loss = 0.0;
    double logz = 0.0;
    double tv = 0.0;
    double grad_norm = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    grad::ParamStore params;
    std::vector<MetricsRow> metrics;
};

// Non-finite loss or gradient during training. Carries the parameters from
// the last iteration that completed cleanly.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t iteration, TrainResult last_good)
        : Error(what), iteration_(iteration), last_good_(std::move(last_good)) {}

    std::size_t iteration() const { return iteration_; }
    const TrainResult& last_good() const { return last_good_; }

private:
    std::size_t iteration_;
    TrainResult last_good_;
};

using MetricsCallback = std::function<void(const MetricsRow&)>;

// Deterministic given config.seed. On the tabular environment the TV metric
// is exact (current policy's terminal marginal vs the tilted target); on the
// mixture environment it is the mode-weight TV of fresh on-policy samples.
TrainResult train(const TrainConfig& config, const envs::TabularEnv& env, const MetricsCallback& on_log = {});
TrainResult train(const TrainConfig& config, const envs::GmmDiffusionEnv& env, const MetricsCallback& on_log = {});

// Parameter store laid out for `config` on each environment, before training.
grad::ParamStore initial_params(const TrainConfig& config, const envs::TabularEnv& env);
grad::ParamStore initial_params(const TrainConfig& config, const envs::GmmDiffusionEnv& env);

// log Z read back from a trained store (v0/α for Trust-PCL).
double trained_log_z(const TrainConfig& config, const grad::ParamStore& params);

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);

// metrics.csv with the fixed header iter,loss,logz,tv,gradnorm,seconds.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

// {"schema": "rtbpcl.checkpoint/1", "layout": [{"name", "offset", "length"}],
//  "values": base64 of the little-endian IEEE-754 doubles}
nlohmann::json checkpoint_to_json(const grad::ParamStore& params);
grad::ParamStore checkpoint_from_json(const nlohmann::json& j);

}  // namespace rtbpcl::train
