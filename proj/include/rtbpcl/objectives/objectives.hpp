#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtbpcl/envs/trajectory.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/grad/tape.hpp"

namespace rtbpcl::objectives {

enum class Objective {
    rtb,                 // relative trajectory balance
    tpcl,                // Trust-PCL
    reinforce_kl,        // off-policy REINFORCE, KL folded into the reward, SNIS
    reinforce_rtbpaper,  // on-policy REINFORCE, reward exp(-E), squared log-ratio penalty
};

Objective parse_objective(std::string_view name);
std::string_view to_string(Objective objective);
bool uses_scalar(Objective objective);
// Name of the scalar slice an objective trains ("log_z" or "v0"); empty if none.
std::string scalar_slice(Objective objective);

// Per-trajectory inputs to a loss: the learned policy's log-density lives on
// the tape, everything else is a constant.
struct TrajectoryTerms {
    grad::Var log_model;
    double log_prior = 0.0;
    double log_behavior = 0.0;
    double energy = 0.0;
};

// Δ_RTB = Σ log π_prior - log Z - Σ log P_φ - E(s_T)/α from cached densities.
template <class State>
double rtb_residual(const envs::Trajectory<State>& traj, double log_z, double alpha) {
    return traj.log_prior() - log_z - traj.log_model() - traj.energy / alpha;
}

// Δ_T-PCL = -V(s_0) + Σ r + α Σ log(π_prior/π_φ) with Σ r = -E(s_T).
template <class State>
double tpcl_residual(const envs::Trajectory<State>& traj, double v0, double alpha) {
    double log_ratio = 0.0;
    for (std::size_t t = 0; t < traj.logp_prior.size(); ++t) {
        log_ratio += traj.logp_prior[t] - traj.logp_model[t];
    }
    return -v0 - traj.energy + alpha * log_ratio;
}

grad::Var rtb_residual(const TrajectoryTerms& terms, grad::Var log_z, double alpha);
grad::Var tpcl_residual(const TrajectoryTerms& terms, grad::Var v0, double alpha);

// ½ mean of squared residuals. Throws PreconditionError on an empty batch.
// When `residuals` is non-null it receives the per-trajectory residual values.
grad::Var rtb_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch, grad::Var log_z, double alpha,
                   std::vector<double>* residuals = nullptr);
grad::Var tpcl_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch, grad::Var v0, double alpha,
                    std::vector<double>* residuals = nullptr);

// Self-normalised importance weights w_n ∝ (π_φ(τ_n)/π_b(τ_n))^{1/T} from
// log-ratios, normalised in log space. Throws NonFiniteError if every ratio
// underflows or any is NaN.
std::vector<double> snis_weights(std::span<const double> log_ratios, std::size_t horizon);

// -Σ_n sg(c_n) log π_φ(τ_n): the common shape of every score-function loss here.
grad::Var score_function_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch,
                              std::span<const double> coefficients);

// KL-regularized reward r_n = -E - α (log π_φ(τ_n) - log π_prior(τ_n)) at the current φ.
double kl_reward(const TrajectoryTerms& terms, double alpha);

// Off-policy REINFORCE with KL regularization: r_n = kl_reward, advantage by
// batch mean, SNIS weights with exponent 1/T, loss -(1/N) Σ sg(w_n r̄_n) log π_φ(τ_n).
grad::Var reinforce_kl_offpolicy(grad::Tape& tape, std::span<const TrajectoryTerms> batch, double alpha,
                                 std::size_t horizon);

// On-policy REINFORCE as used in the RTB comparison: r_n = exp(-E), advantage
// by batch mean, loss (1/N) Σ [-sg(r̄_n) log π_φ(τ_n) + (λ/2)(log π_φ(τ_n)/π_prior(τ_n))²].
grad::Var reinforce_kl_rtbpaper(grad::Tape& tape, std::span<const TrajectoryTerms> batch, double lambda);

struct BatchLoss {
    double value = 0.0;
    std::vector<double> gradient;                 // one entry per ParamStore value
    std::vector<double> per_trajectory_residuals;  // rtb / tpcl only
};

struct LossSettings {
    Objective objective = Objective::rtb;
    double alpha = 1.0;
    double lambda = 1.0;
    std::size_t horizon = 1;  // stochastic transitions per trajectory, for SNIS
};

// A Model exposes `grad::Var trajectory_log_prob(grad::Tape&, const Trajectory<State>&) const`.
template <class Model, class State>
std::vector<TrajectoryTerms> build_terms(grad::Tape& tape, const Model& model,
                                         std::span<const envs::Trajectory<State>> batch) {
    std::vector<TrajectoryTerms> out;
    out.reserve(batch.size());
    for (const auto& traj : batch) {
        out.push_back(TrajectoryTerms{model.trajectory_log_prob(tape, traj), traj.log_prior(), traj.log_behavior(),
                                      traj.energy});
    }
    return out;
}

// Loss value and gradient for one batch. The trainable scalar (log Z for
// RTB, V(s_0) for Trust-PCL) is read from its slice in `params`.
template <class Model, class State>
BatchLoss compute_loss(const LossSettings& settings, const Model& model, const grad::ParamStore& params,
                       std::span<const envs::Trajectory<State>> batch) {
    grad::Tape tape(params);
    const auto terms = build_terms(tape, model, batch);
    BatchLoss out;
    grad::Var loss;
    switch (settings.objective) {
        case Objective::rtb:
            loss = rtb_loss(tape, terms, tape.param(params.slice("log_z"), 0), settings.alpha,
                            &out.per_trajectory_residuals);
            break;
        case Objective::tpcl:
            loss = tpcl_loss(tape, terms, tape.param(params.slice("v0"), 0), settings.alpha,
                             &out.per_trajectory_residuals);
            break;
        case Objective::reinforce_kl:
            loss = reinforce_kl_offpolicy(tape, terms, settings.alpha, settings.horizon);
            break;
        case Objective::reinforce_rtbpaper:
            loss = reinforce_kl_rtbpaper(tape, terms, settings.lambda);
            break;
    }
    tape.set_output(loss);
    out.gradient = grad::backward(tape);
    out.value = loss.value();
    return out;
}

// Appendix-style check on an on-policy batch: returns max_i |α ∂L_RTB/∂φ_i -
// ∂L_RL/∂φ_i| where L_RL = -(1/N) Σ sg(r_n - b) log π_φ(τ_n) with baseline
// b = α log Z + baseline_offset, and log Z is held fixed.
template <class Model, class State>
double gradient_equivalence_check(const Model& model, const grad::ParamStore& params,
                                  std::span<const envs::Trajectory<State>> batch, double log_z, double alpha,
                                  double baseline_offset = 0.0) {
    grad::Tape rtb_tape(params);
    const auto rtb_terms = build_terms(rtb_tape, model, batch);
    rtb_tape.set_output(rtb_loss(rtb_tape, rtb_terms, rtb_tape.constant(log_z), alpha));
    const auto rtb_grad = grad::gradient(rtb_tape, params);

    grad::Tape rl_tape(params);
    const auto rl_terms = build_terms(rl_tape, model, batch);
    const double baseline = alpha * log_z + baseline_offset;
    std::vector<double> coefficients;
    for (const auto& t : rl_terms) {
        coefficients.push_back((kl_reward(t, alpha) - baseline) / static_cast<double>(rl_terms.size()));
    }
    rl_tape.set_output(score_function_loss(rl_tape, rl_terms, coefficients));
    const auto rl_grad = grad::gradient(rl_tape, params);

    double worst = 0.0;
    for (std::size_t i = 0; i < rtb_grad.size(); ++i) {
        worst = std::max(worst, std::abs(alpha * rtb_grad[i] - rl_grad[i]));
    }
    return worst;
}

}  // namespace rtbpcl::objectives
