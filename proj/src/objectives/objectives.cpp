#include "rtbpcl/objectives/objectives.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rtbpcl/error.hpp"

namespace rtbpcl::objectives {

Objective parse_objective(std::string_view name) {
    if (name == "rtb") {
        return Objective::rtb;
    }
    if (name == "tpcl") {
        return Objective::tpcl;
    }
    if (name == "reinforce-kl") {
        return Objective::reinforce_kl;
    }
    if (name == "reinforce-rtbpaper") {
        return Objective::reinforce_rtbpaper;
    }
    throw PreconditionError("unknown objective '" + std::string(name) +
                            "' (expected rtb, tpcl, reinforce-kl or reinforce-rtbpaper)");
}

std::string_view to_string(Objective objective) {
    switch (objective) {
        case Objective::rtb: return "rtb";
        case Objective::tpcl: return "tpcl";
        case Objective::reinforce_kl: return "reinforce-kl";
        case Objective::reinforce_rtbpaper: return "reinforce-rtbpaper";
    }
    return "unknown";
}

bool uses_scalar(Objective objective) { return objective == Objective::rtb || objective == Objective::tpcl; }

std::string scalar_slice(Objective objective) {
    switch (objective) {
        case Objective::rtb: return "log_z";
        case Objective::tpcl: return "v0";
        default: return {};
    }
}

namespace {

void require_batch(std::span<const TrajectoryTerms> batch) {
    if (batch.empty()) {
        throw PreconditionError("loss requires a non-empty batch");
    }
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0)) {
        throw PreconditionError("alpha must be positive");
    }
}

grad::Var half_mean_square(grad::Tape& tape, const std::vector<grad::Var>& residuals) {
    grad::Var sum = tape.constant(0.0);
    for (const auto& r : residuals) {
        sum = sum + grad::square(r);
    }
    return sum * (0.5 / static_cast<double>(residuals.size()));
}

}  // namespace

grad::Var rtb_residual(const TrajectoryTerms& terms, grad::Var log_z, double alpha) {
    return (terms.log_prior - log_z) - terms.log_model - terms.energy / alpha;
}

grad::Var tpcl_residual(const TrajectoryTerms& terms, grad::Var v0, double alpha) {
    return (-v0 - terms.energy) + alpha * (terms.log_prior - terms.log_model);
}

grad::Var rtb_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch, grad::Var log_z, double alpha,
                   std::vector<double>* residuals) {
    require_batch(batch);
    require_alpha(alpha);
    std::vector<grad::Var> deltas;
    deltas.reserve(batch.size());
    for (const auto& t : batch) {
        deltas.push_back(rtb_residual(t, log_z, alpha));
    }
    if (residuals != nullptr) {
        residuals->clear();
        for (const auto& d : deltas) {
            residuals->push_back(d.value());
        }
    }
    return half_mean_square(tape, deltas);
}

grad::Var tpcl_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch, grad::Var v0, double alpha,
                    std::vector<double>* residuals) {
    require_batch(batch);
    require_alpha(alpha);
    std::vector<grad::Var> deltas;
    deltas.reserve(batch.size());
    for (const auto& t : batch) {
        deltas.push_back(tpcl_residual(t, v0, alpha));
    }
    if (residuals != nullptr) {
        residuals->clear();
        for (const auto& d : deltas) {
            residuals->push_back(d.value());
        }
    }
    return half_mean_square(tape, deltas);
}

std::vector<double> snis_weights(std::span<const double> log_ratios, std::size_t horizon) {
    if (log_ratios.empty()) {
        throw PreconditionError("SNIS weights need a non-empty batch");
    }
    if (horizon == 0) {
        throw PreconditionError("SNIS exponent needs horizon >= 1");
    }
    const double inv_t = 1.0 / static_cast<double>(horizon);
    double max_log = -std::numeric_limits<double>::infinity();
    for (double lr : log_ratios) {
        if (std::isnan(lr) || lr == std::numeric_limits<double>::infinity()) {
            throw NonFiniteError("SNIS log-ratio is not finite");
        }
        max_log = std::max(max_log, lr * inv_t);
    }
    if (!std::isfinite(max_log)) {
        throw NonFiniteError("SNIS normaliser underflowed: every importance ratio is zero; "
                             "weights must be normalised in log space from finite log-ratios");
    }
    std::vector<double> w(log_ratios.size());
    double total = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) {
        w[n] = std::exp(log_ratios[n] * inv_t - max_log);
        total += w[n];
    }
    for (double& x : w) {
        x /= total;
    }
    return w;
}

grad::Var score_function_loss(grad::Tape& tape, std::span<const TrajectoryTerms> batch,
                              std::span<const double> coefficients) {
    require_batch(batch);
    if (coefficients.size() != batch.size()) {
        throw PreconditionError("one coefficient per trajectory is required");
    }
    grad::Var sum = tape.constant(0.0);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        sum = sum + tape.constant(coefficients[n]) * batch[n].log_model;
    }
    return -sum;
}

double kl_reward(const TrajectoryTerms& terms, double alpha) {
    return -terms.energy - alpha * (terms.log_model.value() - terms.log_prior);
}

grad::Var reinforce_kl_offpolicy(grad::Tape& tape, std::span<const TrajectoryTerms> batch, double alpha,
                                 std::size_t horizon) {
    require_batch(batch);
    require_alpha(alpha);
    const std::size_t n = batch.size();
    std::vector<double> rewards(n);
    std::vector<double> log_ratios(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rewards[i] = kl_reward(batch[i], alpha);
        log_ratios[i] = batch[i].log_model.value() - batch[i].log_behavior;
        mean += rewards[i];
    }
    mean /= static_cast<double>(n);
    const auto weights = snis_weights(log_ratios, horizon);
    std::vector<double> coefficients(n);
    for (std::size_t i = 0; i < n; ++i) {
        coefficients[i] = weights[i] * (rewards[i] - mean) / static_cast<double>(n);
    }
    return score_function_loss(tape, batch, coefficients);
}

grad::Var reinforce_kl_rtbpaper(grad::Tape& tape, std::span<const TrajectoryTerms> batch, double lambda) {
    require_batch(batch);
    const std::size_t n = batch.size();
    std::vector<double> rewards(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rewards[i] = std::exp(-batch[i].energy);
        mean += rewards[i];
    }
    mean /= static_cast<double>(n);
    grad::Var sum = tape.constant(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const grad::Var advantage = tape.constant(rewards[i] - mean);
        const grad::Var penalty = grad::square(batch[i].log_model - batch[i].log_prior) * (0.5 * lambda);
        sum = sum + (penalty - advantage * batch[i].log_model);
    }
    return sum / static_cast<double>(n);
}

}  // namespace rtbpcl::objectives
