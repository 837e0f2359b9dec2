#include "doctest.h"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "rtbpcl/envs/fixtures.hpp"
#include "rtbpcl/envs/tabular_env.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/objectives/objectives.hpp"
#include "rtbpcl/oracle/oracle.hpp"
#include "rtbpcl/train/sampling.hpp"

using namespace rtbpcl;
using namespace rtbpcl::envs;
using namespace rtbpcl::objectives;

namespace {

struct Setup {
    TabularEnv env;
    grad::ParamStore params;
    grad::Slice logits;
    grad::Slice scalar;

    explicit Setup(double alpha, std::uint64_t seed = 1, double scale = 0.7) : env(t2b3_env(alpha)) {
        TabularPolicy policy(env, params);
        logits = policy.logits();
        scalar = params.add("log_z", 1, 0.3);
        Rng rng = make_rng(seed, 0, 0);
        for (std::size_t i = 0; i < logits.length; ++i) {
            params[logits.offset + i] += scale * standard_normal(rng);
        }
    }

    TabularPolicy policy() const { return TabularPolicy(env, logits); }

    std::vector<Trajectory<StateId>> batch(double epsilon, std::size_t n, std::uint64_t seed) const {
        Rng rng = make_rng(seed, 1, 0);
        return train::behavior_sample(policy(), params, epsilon, n, rng);
    }
};

Trajectory<StateId> flat_trajectory(double log_prior, double log_model, double energy) {
    Trajectory<StateId> t;
    t.states = {0, 1};
    t.logp_prior = {log_prior, 0.0};
    t.logp_model = {log_model, 0.0};
    t.logp_behavior = {log_model, 0.0};
    t.energy = energy;
    return t;
}

std::vector<double> grad_of(const LossSettings& s, const Setup& setup, std::span<const Trajectory<StateId>> batch) {
    return compute_loss(s, setup.policy(), setup.params, batch).gradient;
}

template <class T>
std::span<const T> view(const std::vector<T>& v) {
    return v;
}

}  // namespace

TEST_CASE("objective names") {
    for (auto o : {Objective::rtb, Objective::tpcl, Objective::reinforce_kl, Objective::reinforce_rtbpaper}) {
        CHECK(parse_objective(to_string(o)) == o);
    }
    CHECK(scalar_slice(Objective::rtb) == "log_z");
    CHECK(scalar_slice(Objective::tpcl) == "v0");
    CHECK(!uses_scalar(Objective::reinforce_kl));
    CHECK_THROWS(parse_objective("ppo"));
}

TEST_CASE("residual examples") {
    CHECK(rtb_residual(flat_trajectory(-1.2, -1.2, 0.0), 0.0, 1.0) == 0.0);
    CHECK(tpcl_residual(flat_trajectory(-1.2, -1.2, 0.0), 0.0, 1.0) == 0.0);

    const auto t = flat_trajectory(-0.4, -1.1, 1.3);
    CHECK(rtb_residual(t, 0.2, 2.0) - rtb_residual(t, 0.2, 1.0) == doctest::Approx(1.3 / 2.0).epsilon(1e-14));

    for (double alpha : {0.5, 1.0, 2.0}) {
        Setup s(alpha, 7);
        for (const auto& traj : s.batch(0.3, 100, 11)) {
            const double log_z = 0.37;
            CHECK(std::abs(tpcl_residual(traj, alpha * log_z, alpha) - alpha * rtb_residual(traj, log_z, alpha)) <
                  1e-12);
        }
    }
}

TEST_CASE("RTB and Trust-PCL losses are proportional") {
    for (double alpha : {0.3, 1.0, 2.7}) {
        Setup rtb(alpha, 3);
        Setup tpcl(alpha, 3);
        // Rename the scalar and map it: v0 = alpha log Z.
        grad::ParamStore mapped;
        for (const auto& sl : rtb.params.layout()) {
            const std::string name = sl.name == "log_z" ? "v0" : sl.name;
            mapped.add(name, sl.length);
        }
        mapped.values() = rtb.params.values();
        mapped[rtb.scalar.offset] = alpha * rtb.params[rtb.scalar.offset];
        tpcl.params = mapped;

        const auto batch = rtb.batch(0.2, 32, 5);
        const LossSettings s_rtb{Objective::rtb, alpha, 1.0, 2};
        const LossSettings s_tpcl{Objective::tpcl, alpha, 1.0, 2};
        const auto a = compute_loss(s_rtb, rtb.policy(), rtb.params, view(batch));
        const auto b = compute_loss(s_tpcl, tpcl.policy(), tpcl.params, view(batch));
        CHECK(std::abs(b.value - alpha * alpha * a.value) <= 1e-12 * std::abs(b.value));
        for (std::size_t i = 0; i < rtb.logits.length; ++i) {
            const std::size_t k = rtb.logits.offset + i;
            CHECK(std::abs(b.gradient[k] - alpha * alpha * a.gradient[k]) <=
                  1e-12 * std::max(std::abs(b.gradient[k]), 1e-12));
        }
        const std::size_t z = rtb.scalar.offset;
        CHECK(b.gradient[z] == doctest::Approx(alpha * a.gradient[z]).epsilon(1e-12));
    }
}

TEST_CASE("loss edge cases") {
    Setup s(1.0);
    grad::Tape tape(s.params);
    std::vector<TrajectoryTerms> empty;
    CHECK_THROWS_AS(rtb_loss(tape, empty, tape.constant(0.0), 1.0), PreconditionError);

    SUBCASE("residual-zero batch") {
        const auto oracle = oracle::compute_oracle(s.env);
        for (std::size_t e = 0; e < s.logits.length; ++e) {
            s.params[s.logits.offset + e] = std::log(oracle.pi_star[e]);
        }
        s.params[s.scalar.offset] = oracle.log_z;
        const auto batch = s.batch(0.5, 16, 3);
        const auto out = compute_loss(LossSettings{Objective::rtb, 1.0, 1.0, 2}, s.policy(), s.params, view(batch));
        CHECK(out.value < 1e-25);
        for (double g : out.gradient) {
            CHECK(std::abs(g) < 1e-12);
        }
    }
    SUBCASE("batch order does not change the RTB value") {
        auto batch = s.batch(0.5, 16, 3);
        const LossSettings st{Objective::rtb, 1.0, 1.0, 2};
        const double v1 = compute_loss(st, s.policy(), s.params, view(batch)).value;
        std::reverse(batch.begin(), batch.end());
        const double v2 = compute_loss(st, s.policy(), s.params, view(batch)).value;
        CHECK(v1 == doctest::Approx(v2).epsilon(1e-14));
    }
}

TEST_CASE("SNIS weights") {
    const std::vector<double> lr{-3.0, 0.5, 1.0, -800.0, 2.0};
    const auto w = snis_weights(lr, 4);
    double sum = 0.0;
    for (double x : w) {
        sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 5 * DBL_EPSILON);
    CHECK(w[2] / w[1] == doctest::Approx(std::exp(0.5 / 4.0)).epsilon(1e-13));

    std::vector<double> shifted = lr;
    for (double& x : shifted) {
        x += 4000.0;
    }
    const auto ws = snis_weights(shifted, 4);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(ws[i] == doctest::Approx(w[i]).epsilon(1e-12));
    }

    const auto uniform = snis_weights(std::vector<double>(7, 0.0), 10);
    for (double x : uniform) {
        CHECK(x == 1.0 / 7.0);
    }
    // Every ratio underflows in linear space; still fine in log space.
    const auto tiny = snis_weights(std::vector<double>{-1e4, -1e4 - 1.0}, 1);
    CHECK(tiny[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));

    CHECK_THROWS_AS(snis_weights(std::vector<double>{-INFINITY, -INFINITY}, 1), NonFiniteError);
    CHECK_THROWS_AS(snis_weights(std::vector<double>{NAN}, 1), NonFiniteError);
}

TEST_CASE("off-policy REINFORCE with KL") {
    SUBCASE("single trajectory has no advantage") {
        Setup s(1.0);
        const auto batch = s.batch(0.3, 1, 9);
        const auto out =
            compute_loss(LossSettings{Objective::reinforce_kl, 1.0, 1.0, 2}, s.policy(), s.params, view(batch));
        CHECK(out.value == 0.0);
        for (double g : out.gradient) {
            CHECK(g == 0.0);
        }
    }
    SUBCASE("expected gradient over the full enumeration matches the analytic gradient") {
        for (double alpha : {0.5, 1.0, 2.0}) {
            Setup s(alpha, 13, 1.0);
            const TabularPolicy policy = s.policy();
            const auto table = policy.edge_probs(s.params);
            const auto paths = tabular_enumerate(s.env);

            // Behavior is the prior; each path enters with its prior probability
            // times the exact importance ratio, with the exact expected baseline.
            grad::Tape tape(s.params);
            std::vector<TrajectoryTerms> terms;
            std::vector<double> model_prob;
            double baseline = 0.0;
            for (const auto& p : paths) {
                terms.push_back({policy.path_log_prob(tape, p.edges), p.log_prob, p.log_prob,
                                 s.env.energy(p.states.back())});
                model_prob.push_back(std::exp(terms.back().log_model.value()));
                baseline += model_prob.back() * kl_reward(terms.back(), alpha);
            }
            std::vector<double> coefficients;
            for (std::size_t n = 0; n < paths.size(); ++n) {
                const double weight = std::exp(paths[n].log_prob) * model_prob[n] / std::exp(paths[n].log_prob);
                coefficients.push_back(weight * (kl_reward(terms[n], alpha) - baseline));
            }
            tape.set_output(score_function_loss(tape, terms, coefficients));
            const auto g = grad::gradient(tape, s.params);
            const auto analytic = oracle::kl_objective_gradient(s.env, table);
            double scale = 0.0;
            for (double v : analytic) {
                scale = std::max(scale, std::abs(v));
            }
            for (std::size_t e = 0; e < analytic.size(); ++e) {
                // The loss is minimised, so its gradient is the negated ascent direction.
                CHECK(std::abs(-g[s.logits.offset + e] - analytic[e]) < 1e-8 * scale);
            }
        }
    }
}

TEST_CASE("REINFORCE with the exp(-E) reward") {
    SUBCASE("zero energy leaves only the penalty") {
        Setup s(1.0);
        auto batch = s.batch(0.0, 8, 2);
        for (auto& t : batch) {
            t.energy = 0.0;
        }
        const double lambda = 0.7;
        const auto out =
            compute_loss(LossSettings{Objective::reinforce_rtbpaper, 1.0, lambda, 2}, s.policy(), s.params,
                         view(batch));
        double expected = 0.0;
        for (const auto& t : batch) {
            const double d = t.log_model() - t.log_prior();
            expected += 0.5 * lambda * d * d;
        }
        CHECK(out.value == doctest::Approx(expected / 8.0).epsilon(1e-13));
    }
    SUBCASE("fixed point is the wrong target") {
        // Full-batch deterministic descent over the exact path distribution.
        const TabularEnv env = two_terminal_env();
        grad::ParamStore params;
        const TabularPolicy policy(env, params);
        for (int step = 0; step < 4000; ++step) {
            grad::Tape tape(params);
            const auto paths = tabular_enumerate(env);
            grad::Var loss = tape.constant(0.0);
            std::vector<double> probs;
            std::vector<grad::Var> logs;
            double mean_r = 0.0;
            for (const auto& p : paths) {
                logs.push_back(policy.path_log_prob(tape, p.edges));
                probs.push_back(std::exp(logs.back().value()));
                mean_r += probs.back() * std::exp(-env.energy(p.states.back()));
            }
            for (std::size_t n = 0; n < paths.size(); ++n) {
                const double adv = std::exp(-env.energy(paths[n].states.back())) - mean_r;
                const grad::Var d = logs[n] - paths[n].log_prob;
                loss = loss + probs[n] * (tape.constant(-adv) * logs[n] + grad::square(d) * 0.5);
            }
            tape.set_output(loss);
            const auto g = grad::gradient(tape, params);
            for (std::size_t i = 0; i < g.size(); ++i) {
                params[i] -= 0.5 * g[i];
            }
        }
        const auto marginal = oracle::terminal_marginal(env, policy.edge_probs(params));
        const auto wrong = oracle::wrong_tilted_target(env);
        const auto right = oracle::tilted_target(env).distribution;
        CHECK(std::abs(marginal[0] - wrong[0]) < 0.01);
        CHECK(std::abs(marginal[0] - right[0]) > 0.1);
    }
}

TEST_CASE("gradient equivalence") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        for (std::uint64_t draw = 0; draw < 50; ++draw) {
            Setup s(alpha, 100 + draw);
            const auto batch = s.batch(0.0, 16, draw);
            CHECK(gradient_equivalence_check(s.policy(), s.params, view(batch), 0.4, alpha) < 1e-10);
        }
    }
    Setup s(1.0, 5);
    const auto batch = s.batch(0.0, 16, 1);
    CHECK(gradient_equivalence_check(s.policy(), s.params, view(batch), 0.4, 1.0, 1.0) > 0.0);
}

TEST_CASE("all four losses match finite differences") {
    for (auto o : {Objective::rtb, Objective::tpcl, Objective::reinforce_kl, Objective::reinforce_rtbpaper}) {
        Setup s(0.8, 21);
        if (o == Objective::tpcl) {
            grad::ParamStore p;
            for (const auto& sl : s.params.layout()) {
                p.add(sl.name == "log_z" ? "v0" : sl.name, sl.length);
            }
            p.values() = s.params.values();
            s.params = p;
        }
        const auto batch = s.batch(o == Objective::reinforce_rtbpaper ? 0.0 : 0.3, 12, 4);
        const LossSettings st{o, 0.8, 1.0, 2};
        grad::Tape tape(s.params);
        const auto terms = build_terms(tape, s.policy(), view(batch));
        grad::Var loss;
        switch (o) {
            case Objective::rtb:
                loss = rtb_loss(tape, terms, tape.param(s.params.slice("log_z"), 0), st.alpha);
                break;
            case Objective::tpcl:
                loss = tpcl_loss(tape, terms, tape.param(s.params.slice("v0"), 0), st.alpha);
                break;
            case Objective::reinforce_kl:
                // Coefficients are constants, so differentiate the recorded surrogate.
                loss = reinforce_kl_offpolicy(tape, terms, st.alpha, st.horizon);
                break;
            case Objective::reinforce_rtbpaper:
                loss = reinforce_kl_rtbpaper(tape, terms, st.lambda);
                break;
        }
        tape.set_output(loss);
        CHECK(grad::check_gradient(tape, s.params, 1e-5) < 1e-5);
        const auto g = grad_of(st, s, batch);
        const auto direct = grad::gradient(tape, s.params);
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(g[i] == doctest::Approx(direct[i]).epsilon(1e-12));
        }
    }
}
