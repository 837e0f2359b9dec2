#include "rtbpcl/train/train.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <set>

#include "rtbpcl/eval/eval.hpp"
#include "rtbpcl/numeric.hpp"
#include "rtbpcl/oracle/oracle.hpp"
#include "rtbpcl/train/adam.hpp"
#include "rtbpcl/train/sampling.hpp"

namespace rtbpcl::train {

using objectives::Objective;

namespace {

constexpr const char* kConfigSchema = "rtbpcl.train_config/1";
constexpr const char* kCheckpointSchema = "rtbpcl.checkpoint/1";

bool score_function(Objective o) { return o == Objective::reinforce_kl || o == Objective::reinforce_rtbpaper; }

double effective_epsilon(const TrainConfig& config) {
    return config.objective == Objective::reinforce_rtbpaper ? 0.0 : config.epsilon;
}

void add_scalar(const TrainConfig& config, grad::ParamStore& params) {
    switch (config.objective) {
        case Objective::rtb:
            params.add("log_z", 1, config.init_log_z);
            break;
        case Objective::tpcl:
            params.add("v0", 1, config.alpha * config.init_log_z);
            break;
        default:
            break;
    }
}

double l2_norm(const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) {
        s += v * v;
    }
    return std::sqrt(s);
}

// log of the batch importance estimate of E_prior[exp(-E/α)].
template <class State>
double batch_log_z(const std::vector<envs::Trajectory<State>>& batch, double alpha) {
    std::vector<double> terms;
    terms.reserve(batch.size());
    for (const auto& traj : batch) {
        terms.push_back(traj.log_prior() - traj.log_behavior() - traj.energy / alpha);
    }
    return log_sum_exp(terms) - std::log(static_cast<double>(batch.size()));
}

// Shared optimisation loop. `sample` draws a batch for iteration `iter`,
// `loss` evaluates it, and `tv` measures the current parameters.
template <class State, class Sample, class Loss, class Tv>
TrainResult run_loop(const TrainConfig& config, grad::ParamStore params, Sample&& sample, Loss&& loss, Tv&& tv,
                     const MetricsCallback& on_log) {
    const std::string scalar = objectives::scalar_slice(config.objective);
    const std::size_t scalar_len = scalar.empty() ? 0 : 1;
    // The scalar, when present, is always the first slice.
    AdamState scalar_state(scalar_len);
    AdamState policy_state(params.size() - scalar_len);
    const auto start = std::chrono::steady_clock::now();

    TrainResult result;
    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        const grad::ParamStore before = params;
        auto diverged = [&](const std::string& why) {
            return DivergenceError("training diverged at iteration " + std::to_string(iter) + ": " + why, iter,
                                   TrainResult{before, result.metrics});
        };

        Rng rng = make_rng(config.seed, 0, iter);
        std::vector<envs::Trajectory<State>> batch = sample(params, rng);
        objectives::BatchLoss batch_loss;
        try {
            batch_loss = loss(params, batch);
            if (!std::isfinite(batch_loss.value)) {
                throw NonFiniteError("non-finite loss");
            }
            std::span<double> all(params.values());
            std::span<const double> g(batch_loss.gradient);
            if (scalar_len > 0) {
                adam_step(all.first(scalar_len), g.first(scalar_len), scalar_state, config.lr_scalar);
            }
            adam_step(all.subspan(scalar_len), g.subspan(scalar_len), policy_state, config.lr_policy);
        } catch (const NonFiniteError& e) {
            throw diverged(e.what());
        }

        const bool log_now = iter % config.log_every == 0 || iter + 1 == config.iterations;
        if (!log_now) {
            continue;
        }
        MetricsRow row;
        row.iteration = iter;
        row.loss = batch_loss.value;
        row.logz = score_function(config.objective) ? batch_log_z(batch, config.alpha)
                                                    : trained_log_z(config, params);
        row.tv = tv(params, iter);
        row.grad_norm = l2_norm(batch_loss.gradient);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!std::isfinite(row.logz) || !std::isfinite(row.tv) || !std::isfinite(row.grad_norm)) {
            throw diverged("non-finite metrics");
        }
        result.metrics.push_back(row);
        if (on_log) {
            on_log(row);
        }
    }
    result.params = std::move(params);
    return result;
}

objectives::LossSettings loss_settings(const TrainConfig& config, std::size_t horizon) {
    return objectives::LossSettings{config.objective, config.alpha, config.lambda, horizon};
}

}  // namespace

void TrainConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("must be a finite number > 0", "alpha");
    }
    if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ConfigError("must be a finite number >= 0", "lambda");
    }
    if (batch_size < 1) {
        throw ConfigError("must be >= 1", "batch_size");
    }
    if (score_function(objective) && batch_size < 2) {
        throw ConfigError("must be >= 2 for score-function objectives (batch-mean baseline)", "batch_size");
    }
    if (iterations < 1) {
        throw ConfigError("must be >= 1", "iterations");
    }
    if (!(lr_policy > 0.0) || !std::isfinite(lr_policy)) {
        throw ConfigError("must be a finite number > 0", "lr_policy");
    }
    if (!(lr_scalar > 0.0) || !std::isfinite(lr_scalar)) {
        throw ConfigError("must be a finite number > 0", "lr_scalar");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw ConfigError("must lie in [0, 1]", "epsilon");
    }
    if (log_every < 1) {
        throw ConfigError("must be >= 1", "log_every");
    }
    if (!std::isfinite(init_log_z)) {
        throw ConfigError("must be finite", "init_log_z");
    }
    if (tv_samples < 1) {
        throw ConfigError("must be >= 1", "tv_samples");
    }
    if (!(policy.sigma_init > 0.0)) {
        throw ConfigError("must be > 0", "policy.sigma_init");
    }
    if (!(policy.log_std_min < policy.log_std_max)) {
        throw ConfigError("must be below policy.log_std_max", "policy.log_std_min");
    }
    for (std::size_t h : policy.hidden) {
        if (h == 0) {
            throw ConfigError("layer widths must be >= 1", "policy.hidden");
        }
    }
}

double trained_log_z(const TrainConfig& config, const grad::ParamStore& params) {
    switch (config.objective) {
        case Objective::rtb:
            return params.view("log_z")[0];
        case Objective::tpcl:
            return params.view("v0")[0] / config.alpha;
        default:
            throw PreconditionError("objective has no trained log Z");
    }
}

grad::ParamStore initial_params(const TrainConfig& config, const envs::TabularEnv& env) {
    grad::ParamStore params;
    add_scalar(config, params);
    envs::TabularPolicy policy(env, params);
    return params;
}

grad::ParamStore initial_params(const TrainConfig& config, const envs::GmmDiffusionEnv& env) {
    grad::ParamStore params;
    add_scalar(config, params);
    envs::PolicyNetConfig net_config = config.policy;
    net_config.horizon = env.steps();
    Rng init_rng = make_rng(config.seed, 2, 0);
    envs::PolicyNet net(net_config, params, init_rng, &env);
    return params;
}

TrainResult train(const TrainConfig& config, const envs::TabularEnv& env_in, const MetricsCallback& on_log) {
    config.validate();
    const envs::TabularEnv env = env_in.with_alpha(config.alpha);
    grad::ParamStore params = initial_params(config, env);
    const envs::TabularPolicy policy(env, params.slice("policy.logits"));
    const auto target = oracle::tilted_target(env).distribution;
    const auto settings = loss_settings(config, env.horizon());
    const double epsilon = effective_epsilon(config);

    auto sample = [&](const grad::ParamStore& p, Rng& rng) {
        return behavior_sample(policy, p, epsilon, config.batch_size, rng);
    };
    auto loss = [&](const grad::ParamStore& p, const std::vector<envs::Trajectory<envs::StateId>>& batch) {
        return objectives::compute_loss(settings, policy, p, std::span<const envs::Trajectory<envs::StateId>>(batch));
    };
    auto tv = [&](const grad::ParamStore& p, std::size_t) {
        const auto marginal = oracle::terminal_marginal(env, policy.edge_probs(p));
        return eval::tv_distance(marginal, target);
    };
    return run_loop<envs::StateId>(config, std::move(params), sample, loss, tv, on_log);
}

TrainResult train(const TrainConfig& config, const envs::GmmDiffusionEnv& env_in, const MetricsCallback& on_log) {
    config.validate();
    const envs::GmmDiffusionEnv env = env_in.with_alpha(config.alpha);
    grad::ParamStore params = initial_params(config, env);
    envs::PolicyNetConfig net_config = config.policy;
    net_config.horizon = env.steps();
    const envs::PolicyNet net(net_config, params, &env);
    const auto settings = loss_settings(config, env.steps());
    const double epsilon = effective_epsilon(config);
    const auto target = env.target_gmm();

    auto sample = [&](const grad::ParamStore& p, Rng& rng) {
        return behavior_sample(env, net, p, epsilon, config.batch_size, rng);
    };
    auto loss = [&](const grad::ParamStore& p, const std::vector<envs::Trajectory<envs::DiffusionState>>& batch) {
        return objectives::compute_loss(settings, net, p,
                                        std::span<const envs::Trajectory<envs::DiffusionState>>(batch));
    };
    auto tv = [&](const grad::ParamStore& p, std::size_t iter) {
        Rng rng = make_rng(config.seed, 1, iter);
        const auto points = sample_terminals(env, net, p, config.tv_samples, rng);
        return eval::mode_tv(eval::mode_histogram(points, target), target.weights);
    };
    return run_loop<envs::DiffusionState>(config, std::move(params), sample, loss, tv, on_log);
}

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* name) { return j.at(name); }

double read_number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ConfigError("must be a number", path);
    }
    return j.get<double>();
}

std::size_t read_count(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        throw ConfigError("must be an integer", path);
    }
    const auto v = j.get<std::int64_t>();
    if (v < 0) {
        throw ConfigError("must be non-negative", path);
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("training config must be a JSON object");
    }
    static const std::set<std::string> known{"schema",     "objective",  "alpha",    "lambda",   "batch_size",
                                             "iterations", "lr_policy",  "lr_scalar", "epsilon", "seed",
                                             "log_every",  "init_log_z", "tv_samples", "policy", "env"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown field", key);
        }
    }
    if (!j.contains("schema") || j["schema"] != kConfigSchema) {
        throw ConfigError(std::string("must be \"") + kConfigSchema + "\"", "schema");
    }
    TrainConfig c;
    if (!j.contains("objective") || !j["objective"].is_string()) {
        throw ConfigError("must be one of rtb, tpcl, reinforce-kl, reinforce-rtbpaper", "objective");
    }
    try {
        c.objective = objectives::parse_objective(j["objective"].get<std::string>());
    } catch (const Error&) {
        throw ConfigError("must be one of rtb, tpcl, reinforce-kl, reinforce-rtbpaper", "objective");
    }
    if (j.contains("alpha")) c.alpha = read_number(field(j, "alpha"), "alpha");
    if (j.contains("lambda")) c.lambda = read_number(field(j, "lambda"), "lambda");
    if (j.contains("batch_size")) c.batch_size = read_count(field(j, "batch_size"), "batch_size");
    if (j.contains("iterations")) c.iterations = read_count(field(j, "iterations"), "iterations");
    if (j.contains("lr_policy")) c.lr_policy = read_number(field(j, "lr_policy"), "lr_policy");
    if (j.contains("lr_scalar")) c.lr_scalar = read_number(field(j, "lr_scalar"), "lr_scalar");
    if (j.contains("epsilon")) c.epsilon = read_number(field(j, "epsilon"), "epsilon");
    if (j.contains("seed")) c.seed = read_count(field(j, "seed"), "seed");
    if (j.contains("log_every")) c.log_every = read_count(field(j, "log_every"), "log_every");
    if (j.contains("init_log_z")) c.init_log_z = read_number(field(j, "init_log_z"), "init_log_z");
    if (j.contains("tv_samples")) c.tv_samples = read_count(field(j, "tv_samples"), "tv_samples");
    if (j.contains("policy")) {
        const auto& p = j["policy"];
        if (!p.is_object()) {
            throw ConfigError("must be an object", "policy");
        }
        static const std::set<std::string> policy_keys{"hidden", "sigma_init", "log_std_min", "log_std_max",
                                                       "anchor_to_prior"};
        for (const auto& [key, value] : p.items()) {
            if (!policy_keys.count(key)) {
                throw ConfigError("unknown field", "policy." + key);
            }
        }
        if (p.contains("hidden")) {
            if (!p["hidden"].is_array()) {
                throw ConfigError("must be an array of layer widths", "policy.hidden");
            }
            c.policy.hidden.clear();
            for (const auto& h : p["hidden"]) {
                c.policy.hidden.push_back(read_count(h, "policy.hidden"));
            }
        }
        if (p.contains("sigma_init")) c.policy.sigma_init = read_number(p["sigma_init"], "policy.sigma_init");
        if (p.contains("log_std_min")) c.policy.log_std_min = read_number(p["log_std_min"], "policy.log_std_min");
        if (p.contains("log_std_max")) c.policy.log_std_max = read_number(p["log_std_max"], "policy.log_std_max");
        if (p.contains("anchor_to_prior")) {
            if (!p["anchor_to_prior"].is_boolean()) {
                throw ConfigError("must be a boolean", "policy.anchor_to_prior");
            }
            c.policy.anchor_to_prior = p["anchor_to_prior"].get<bool>();
        }
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"schema", kConfigSchema},
                          {"objective", std::string(objectives::to_string(c.objective))},
                          {"alpha", c.alpha},
                          {"lambda", c.lambda},
                          {"batch_size", c.batch_size},
                          {"iterations", c.iterations},
                          {"lr_policy", c.lr_policy},
                          {"lr_scalar", c.lr_scalar},
                          {"epsilon", c.epsilon},
                          {"seed", c.seed},
                          {"log_every", c.log_every},
                          {"init_log_z", c.init_log_z},
                          {"tv_samples", c.tv_samples},
                          {"policy",
                           {{"hidden", c.policy.hidden},
                            {"sigma_init", c.policy.sigma_init},
                            {"log_std_min", c.policy.log_std_min},
                            {"log_std_max", c.policy.log_std_max},
                            {"anchor_to_prior", c.policy.anchor_to_prior}}}};
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.precision(17);
    out << "iter,loss,logz,tv,gradnorm,seconds\n";
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.loss << ',' << r.logz << ',' << r.tv << ',' << r.grad_norm << ','
            << r.seconds << '\n';
    }
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

nlohmann::json checkpoint_to_json(const grad::ParamStore& params) {
    static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes little-endian doubles");
    const auto& values = params.values();
    const std::size_t bytes = values.size() * sizeof(double);
    std::string encoded(4 * ((bytes + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(encoded.data()),
                                  reinterpret_cast<const unsigned char*>(values.data()), static_cast<int>(bytes));
    encoded.resize(static_cast<std::size_t>(n));
    nlohmann::json layout = nlohmann::json::array();
    for (const auto& s : params.layout()) {
        layout.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
    }
    return {{"schema", kCheckpointSchema}, {"layout", layout}, {"values", encoded}};
}

grad::ParamStore checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema") || j["schema"] != kCheckpointSchema) {
        throw ConfigError(std::string("must be \"") + kCheckpointSchema + "\"", "schema");
    }
    std::vector<grad::Slice> layout;
    std::size_t total = 0;
    try {
        for (const auto& s : j.at("layout")) {
            layout.push_back(grad::Slice{s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(),
                                         s.at("length").get<std::size_t>()});
            total += layout.back().length;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what(), "layout");
    }
    if (!j.contains("values") || !j["values"].is_string()) {
        throw ConfigError("must be a base64 string", "values");
    }
    const auto& text = j["values"].get_ref<const std::string&>();
    if (text.size() % 4 != 0) {
        throw ConfigError("base64 length must be a multiple of 4", "values");
    }
    std::string raw(3 * (text.size() / 4), '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(raw.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) {
        throw ConfigError("invalid base64", "values");
    }
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=') ++padding;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
    const std::size_t bytes = static_cast<std::size_t>(n) - padding;
    if (bytes != total * sizeof(double)) {
        throw ConfigError("decoded size does not match layout", "values");
    }
    std::vector<double> values(total);
    std::memcpy(values.data(), raw.data(), bytes);
    try {
        return grad::ParamStore(std::move(layout), std::move(values));
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what(), "layout");
    }
}

}  // namespace rtbpcl::train
