#include "rtbpcl/cli/checks.hpp"

#include <algorithm>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "rtbpcl/envs/fixtures.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/eval/eval.hpp"
#include "rtbpcl/numeric.hpp"
#include "rtbpcl/oracle/oracle.hpp"
#include "rtbpcl/train/sampling.hpp"
#include "rtbpcl/train/train.hpp"

namespace rtbpcl::cli {

using envs::StateId;
using envs::TabularEnv;
using envs::TabularPolicy;
using objectives::Objective;
using TabTraj = envs::Trajectory<StateId>;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
    CheckResult r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

void randomize_logits(grad::ParamStore& params, const grad::Slice& logits, Rng& rng, double scale) {
    for (std::size_t i = 0; i < logits.length; ++i) {
        params[logits.offset + i] = scale * standard_normal(rng);
    }
}

// Records the loss for `objective` and returns its output node.
grad::Var record_loss(grad::Tape& tape, const objectives::LossSettings& s, const grad::ParamStore& params,
                      std::span<const objectives::TrajectoryTerms> terms) {
    switch (s.objective) {
        case Objective::rtb:
            return objectives::rtb_loss(tape, terms, tape.param(params.slice("log_z"), 0), s.alpha);
        case Objective::tpcl:
            return objectives::tpcl_loss(tape, terms, tape.param(params.slice("v0"), 0), s.alpha);
        case Objective::reinforce_kl:
            return objectives::reinforce_kl_offpolicy(tape, terms, s.alpha, s.horizon);
        case Objective::reinforce_rtbpaper:
            return objectives::reinforce_kl_rtbpaper(tape, terms, s.lambda);
    }
    throw PreconditionError("unknown objective");
}

double policy_tv(const TabularEnv& env, const grad::ParamStore& params, std::span<const double> target) {
    const TabularPolicy policy(env, params.slice("policy.logits"));
    return eval::tv_distance(oracle::terminal_marginal(env, policy.edge_probs(params)), target);
}

}  // namespace

CheckResult check_residual_identity(std::uint64_t seed) {
    return timed("RTB/Trust-PCL residual, loss and gradient identity", [&](CheckResult& r) {
        const double alphas[] = {0.3, 0.5, 1.0, 2.0, 2.7};
        constexpr int kDraws = 1000;
        double worst_residual = 0.0;
        double worst_loss = 0.0;
        double worst_grad = 0.0;
        for (std::size_t a = 0; a < std::size(alphas); ++a) {
            const double alpha = alphas[a];
            for (int d = 0; d < kDraws; ++d) {
                Rng rng = make_rng(seed, a, static_cast<std::uint64_t>(d));
                const TabularEnv env = envs::random_tabular_env(rng).with_alpha(alpha);
                grad::ParamStore rtb_params;
                const double log_z = 3.0 * (2.0 * uniform01(rng) - 1.0);
                rtb_params.add("log_z", 1, log_z);
                const TabularPolicy policy(env, rtb_params);
                randomize_logits(rtb_params, policy.logits(), rng, 1.0);

                grad::ParamStore tpcl_params;
                tpcl_params.add("v0", 1, alpha * log_z);
                tpcl_params.add("policy.logits", policy.logits().length);
                std::copy(rtb_params.values().begin() + 1, rtb_params.values().end(),
                          tpcl_params.values().begin() + 1);

                const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 4.0);
                const auto batch = train::behavior_sample(policy, rtb_params, uniform01(rng), n, rng);

                std::vector<double> res_r;
                std::vector<double> res_t;
                grad::Tape tape_r(rtb_params);
                const auto terms_r = objectives::build_terms(tape_r, policy, std::span<const TabTraj>(batch));
                const auto loss_r = objectives::rtb_loss(tape_r, terms_r, tape_r.param(0), alpha, &res_r);
                tape_r.set_output(loss_r);
                const auto g_r = grad::gradient(tape_r, rtb_params);

                grad::Tape tape_t(tpcl_params);
                const auto terms_t = objectives::build_terms(tape_t, policy, std::span<const TabTraj>(batch));
                const auto loss_t = objectives::tpcl_loss(tape_t, terms_t, tape_t.param(0), alpha, &res_t);
                tape_t.set_output(loss_t);
                const auto g_t = grad::gradient(tape_t, tpcl_params);

                for (std::size_t i = 0; i < n; ++i) {
                    worst_residual = std::max(worst_residual, std::abs(res_t[i] - alpha * res_r[i]));
                    // Cached-density forms must agree with the on-tape ones.
                    worst_residual = std::max(
                        worst_residual, std::abs(objectives::tpcl_residual(batch[i], alpha * log_z, alpha) -
                                                 alpha * objectives::rtb_residual(batch[i], log_z, alpha)));
                }
                worst_loss = std::max(worst_loss, std::abs(loss_t.value() - alpha * alpha * loss_r.value()) /
                                                      std::abs(loss_r.value()));
                worst_grad = std::max(worst_grad, std::abs(g_t[0] - alpha * g_r[0]));
                for (std::size_t i = 1; i < g_r.size(); ++i) {
                    worst_grad = std::max(worst_grad, std::abs(g_t[i] - alpha * alpha * g_r[i]));
                }
            }
        }
        r.pass = worst_residual < 1e-12 && worst_loss < 1e-12 && worst_grad < 1e-10;
        r.detail = "5000 draws; max|dT - a*dR| = " + fmt(worst_residual) + " (< 1e-12), max rel loss err = " +
                   fmt(worst_loss) + " (< 1e-12), max grad err = " + fmt(worst_grad) + " (< 1e-10)";
    });
}

CheckResult check_paired_training(std::uint64_t seed) {
    return timed("paired RTB/Trust-PCL training runs", [&](CheckResult& r) {
        const double alpha = 0.5;
        const TabularEnv env = envs::t2b3_env(alpha);
        train::TrainConfig rtb;
        rtb.objective = Objective::rtb;
        rtb.alpha = alpha;
        rtb.batch_size = 16;
        rtb.iterations = 200;
        rtb.lr_policy = 1e-2;
        rtb.lr_scalar = 1e-1;
        rtb.epsilon = 0.2;
        rtb.seed = seed;
        rtb.log_every = 1;
        rtb.init_log_z = 0.7;
        train::TrainConfig tpcl = rtb;
        tpcl.objective = Objective::tpcl;
        tpcl.lr_scalar = alpha * rtb.lr_scalar;
        const auto a = train::train(rtb, env);
        const auto b = train::train(tpcl, env);
        double worst = 0.0;
        double worst_logz = 0.0;
        for (std::size_t i = 0; i < a.metrics.size(); ++i) {
            const double expected = alpha * alpha * a.metrics[i].loss;
            worst = std::max(worst, std::abs(b.metrics[i].loss - expected) / std::max(std::abs(expected), 1e-12));
            worst_logz = std::max(worst_logz, std::abs(b.metrics[i].logz - a.metrics[i].logz));
        }
        r.pass = a.metrics.size() == 200 && b.metrics.size() == 200 && worst < 1e-6 && worst_logz < 1e-6;
        r.detail = "200 iterations, alpha = 0.5; max rel |L_T - a^2 L_R| = " + fmt(worst) +
                   " (< 1e-6), max |logZ_T - logZ_R| = " + fmt(worst_logz) + " (< 1e-6)";
    });
}

CheckResult check_optimal_marginal(std::uint64_t seed) {
    return timed("optimal-policy terminal marginal equals tilted target", [&](CheckResult& r) {
        constexpr int kEnvs = 200;
        double worst_tv = 0.0;
        double worst_z = 0.0;
        for (int i = 0; i < kEnvs; ++i) {
            Rng rng = make_rng(seed, 0, static_cast<std::uint64_t>(i));
            const TabularEnv env = envs::random_tabular_env(rng);
            const auto values = oracle::soft_values(env);
            const auto pi_star = oracle::optimal_policy(env, values);
            const auto marginal = oracle::terminal_marginal(env, pi_star);
            const auto target = oracle::tilted_target(env);
            worst_tv = std::max(worst_tv, eval::tv_distance(marginal, target.distribution));

            std::vector<double> terms;
            for (const auto& path : envs::tabular_enumerate(env)) {
                terms.push_back(path.log_prob - env.energy(path.states.back()) / env.alpha());
            }
            const double z_enum = std::exp(log_sum_exp(terms));
            const double z_value = std::exp(values.v[env.root()] / env.alpha());
            worst_z = std::max(worst_z, std::abs(z_value - z_enum) / z_enum);
        }
        r.pass = worst_tv < 1e-10 && worst_z < 1e-12;
        r.detail = "200 random envs; max TV = " + fmt(worst_tv) + " (< 1e-10), max rel Z err = " + fmt(worst_z) +
                   " (< 1e-12)";
    });
}

CheckResult check_gradient_equivalence(std::uint64_t seed) {
    return timed("on-policy RTB gradient equals REINFORCE gradient with baseline alpha*logZ", [&](CheckResult& r) {
        constexpr int kConfigs = 50;
        double worst = 0.0;
        int separated = 0;
        double smallest_shifted = INFINITY;
        for (int i = 0; i < kConfigs; ++i) {
            Rng rng = make_rng(seed, 0, static_cast<std::uint64_t>(i));
            const TabularEnv env = envs::random_tabular_env(rng);
            grad::ParamStore params;
            const TabularPolicy policy(env, params);
            randomize_logits(params, policy.logits(), rng, 1.0);
            const double log_z = 2.0 * (2.0 * uniform01(rng) - 1.0);
            const auto batch = train::behavior_sample(policy, params, 0.0, 16, rng);
            const std::span<const TabTraj> view(batch);
            worst = std::max(worst,
                             objectives::gradient_equivalence_check(policy, params, view, log_z, env.alpha()));
            const double shifted =
                objectives::gradient_equivalence_check(policy, params, view, log_z, env.alpha(), 1.0);
            smallest_shifted = std::min(smallest_shifted, shifted);
            if (shifted > 1e-3) {
                ++separated;
            }
        }
        r.pass = worst < 1e-10 && separated >= 45;
        r.detail = "50 configs, N = 16; max|a*gRTB - gRL| = " + fmt(worst) + " (< 1e-10); baseline+1 differs by > 1e-3 on " +
                   std::to_string(separated) + "/50 (>= 45), min diff " + fmt(smallest_shifted);
    });
}

CheckResult check_finite_differences(std::uint64_t seed) {
    return timed("reverse-mode gradients match central differences", [&](CheckResult& r) {
        const Objective objectives_all[] = {Objective::rtb, Objective::tpcl, Objective::reinforce_kl,
                                            Objective::reinforce_rtbpaper};
        const TabularEnv fixtures[] = {envs::t2b3_env(1.0), envs::t2b3_env(0.5), envs::two_terminal_env(1.0)};
        double worst = 0.0;
        int cases = 0;
        for (std::size_t f = 0; f < std::size(fixtures); ++f) {
            const TabularEnv& env = fixtures[f];
            for (std::size_t o = 0; o < std::size(objectives_all); ++o) {
                for (std::uint64_t rep = 0; rep < 5; ++rep) {
                    Rng rng = make_rng(seed, f * 16 + o, rep);
                    const Objective obj = objectives_all[o];
                    grad::ParamStore params;
                    if (objectives::uses_scalar(obj)) {
                        params.add(objectives::scalar_slice(obj), 1, standard_normal(rng));
                    }
                    const TabularPolicy policy(env, params);
                    randomize_logits(params, policy.logits(), rng, 0.7);
                    const double epsilon = obj == Objective::reinforce_rtbpaper ? 0.0 : 0.3;
                    const auto batch = train::behavior_sample(policy, params, epsilon, 8, rng);
                    grad::Tape tape(params);
                    const auto terms = objectives::build_terms(tape, policy, std::span<const TabTraj>(batch));
                    const objectives::LossSettings s{obj, env.alpha(), 0.8, env.horizon()};
                    tape.set_output(record_loss(tape, s, params, terms));
                    worst = std::max(worst, grad::check_gradient(tape, params, 1e-5));
                    ++cases;
                }
            }
        }
        r.pass = worst < 1e-5;
        r.detail = std::to_string(cases) + " cases over 4 objectives x 3 fixtures; max rel err = " + fmt(worst) +
                   " (< 1e-5)";
    });
}

CheckResult check_snis_weights(std::uint64_t seed) {
    return timed("SNIS weights normalised, uniform on-policy", [&](CheckResult& r) {
        double worst_sum = 0.0;
        double worst_uniform = 0.0;
        bool sums_ok = true;
        for (std::uint64_t rep = 0; rep < 200; ++rep) {
            Rng rng = make_rng(seed, 0, rep);
            const std::size_t n = 2 + rep % 63;
            std::vector<double> log_ratios(n);
            for (double& v : log_ratios) {
                v = 20.0 * standard_normal(rng);
            }
            const auto w = objectives::snis_weights(log_ratios, 1 + rep % 10);
            double sum = 0.0;
            for (double x : w) {
                sum += x;
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            // Normalising by the float sum leaves at most rounding error per term.
            sums_ok = sums_ok && std::abs(sum - 1.0) <= static_cast<double>(n) * DBL_EPSILON;
        }
        const TabularEnv env = envs::t2b3_env(1.0);
        for (std::uint64_t rep = 0; rep < 20; ++rep) {
            Rng rng = make_rng(seed, 1, rep);
            grad::ParamStore params;
            const TabularPolicy policy(env, params);
            randomize_logits(params, policy.logits(), rng, 1.0);
            const std::size_t n = 8 + rep;
            const auto batch = train::behavior_sample(policy, params, 0.0, n, rng);
            grad::Tape tape(params);
            const auto terms = objectives::build_terms(tape, policy, std::span<const TabTraj>(batch));
            std::vector<double> log_ratios;
            for (const auto& t : terms) {
                log_ratios.push_back(t.log_model.value() - t.log_behavior);
            }
            for (double w : objectives::snis_weights(log_ratios, env.horizon())) {
                worst_uniform = std::max(worst_uniform, std::abs(w - 1.0 / static_cast<double>(n)));
            }
        }
        r.pass = sums_ok && worst_uniform == 0.0;
        r.detail = "max|sum w - 1| = " + fmt(worst_sum) + " (<= N*DBL_EPSILON), on-policy max|w - 1/N| = " +
                   fmt(worst_uniform) + " (== 0)";
    });
}

CheckResult check_wrong_reward(std::uint64_t seed) {
    return timed("exp(-E) reward converges to the wrong target; KL reward to the right one", [&](CheckResult& r) {
        const TabularEnv env = envs::two_terminal_env(1.0);
        const auto tilted = oracle::tilted_target(env).distribution;
        const auto wrong = oracle::wrong_tilted_target(env);

        train::TrainConfig alg1;
        alg1.objective = Objective::reinforce_rtbpaper;
        alg1.alpha = 1.0;
        alg1.lambda = 1.0;
        alg1.batch_size = 512;
        alg1.iterations = 1500;
        alg1.lr_policy = 1e-2;
        alg1.epsilon = 0.0;
        alg1.seed = seed;
        alg1.log_every = 100;
        const auto run1 = train::train(alg1, env);

        train::TrainConfig alg2 = alg1;
        alg2.objective = Objective::reinforce_kl;
        alg2.epsilon = 0.1;
        const auto run2 = train::train(alg2, env);

        const double tv1_wrong = policy_tv(env, run1.params, wrong);
        const double tv1_right = policy_tv(env, run1.params, tilted);
        const double tv2_right = policy_tv(env, run2.params, tilted);
        r.pass = tv1_wrong < 0.02 && tv1_right > 0.15 && tv2_right < 0.02;
        r.detail = "exp(-E) reward: TV to wrong target = " + fmt(tv1_wrong) + " (< 0.02), TV to tilted = " +
                   fmt(tv1_right) + " (> 0.15); KL reward: TV to tilted = " + fmt(tv2_right) + " (< 0.02)";
    });
}

CheckResult check_training_accuracy(Objective objective, std::uint64_t seed) {
    const std::string label(objectives::to_string(objective));
    return timed(label + " training on the depth-2 branching-3 fixture", [&](CheckResult& r) {
        const TabularEnv env = envs::t2b3_env(1.0);
        const auto target = oracle::tilted_target(env);
        train::TrainConfig c;
        c.objective = objective;
        c.alpha = 1.0;
        c.batch_size = 64;
        c.iterations = 2000;
        c.lr_policy = 1e-2;
        c.lr_scalar = objective == Objective::tpcl ? 1e-2 * c.alpha : 1e-2;
        c.epsilon = 0.1;
        c.seed = seed;
        c.log_every = 100;
        const auto run = train::train(c, env);
        const double tv = policy_tv(env, run.params, target.distribution);
        const double logz_err = std::abs(train::trained_log_z(c, run.params) - target.log_z);
        r.pass = tv < 0.01 && logz_err < 0.01;
        r.detail = "N = 64, 2000 iterations; TV = " + fmt(tv) + " (< 0.01), |logZ - oracle| = " + fmt(logz_err) +
                   " (< 0.01)";
    });
}

std::vector<std::string_view> suite_names() { return {"equivalence", "oracle", "gradients", "wrong-reward", "training"}; }

std::vector<CheckResult> run_suite(std::string_view suite) {
    if (suite == "equivalence") {
        return {check_residual_identity(), check_paired_training()};
    }
    if (suite == "oracle") {
        return {check_optimal_marginal()};
    }
    if (suite == "gradients") {
        return {check_gradient_equivalence(), check_finite_differences(), check_snis_weights()};
    }
    if (suite == "wrong-reward") {
        return {check_wrong_reward()};
    }
    if (suite == "training") {
        return {check_training_accuracy(Objective::rtb), check_training_accuracy(Objective::tpcl)};
    }
    throw PreconditionError("unknown suite '" + std::string(suite) +
                            "' (expected equivalence, oracle, gradients, wrong-reward or training)");
}

std::string format_check(const CheckResult& result) {
    std::ostringstream os;
    os.precision(3);
    os << (result.pass ? "PASS " : "FAIL ") << result.name << " (" << result.detail << ") [" << std::fixed
       << result.seconds << " s]";
    return os.str();
}

}  // namespace rtbpcl::cli
