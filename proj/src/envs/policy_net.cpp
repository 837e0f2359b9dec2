#include "rtbpcl/envs/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rtbpcl/error.hpp"

namespace rtbpcl::envs {

namespace {

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw NonFiniteError(std::string("policy network produced a non-finite ") + what);
    }
}

}  // namespace

PolicyNet::PolicyNet(PolicyNetConfig config, grad::ParamStore& params, Rng& init_rng, const GmmDiffusionEnv* anchor,
                     const std::string& prefix)
    : config_(std::move(config)), anchor_(anchor) {
    if (!(config_.log_std_min < config_.log_std_max)) {
        throw PreconditionError("policy log-std bounds are inverted");
    }
    if (config_.horizon == 0) {
        throw PreconditionError("policy horizon must be positive");
    }
    std::vector<std::size_t> sizes{kInputs};
    sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
    sizes.push_back(4);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        const std::string tag = prefix + ".l" + std::to_string(l);
        layer.weights = params.add(tag + ".w", layer.in * layer.out);
        layer.bias = params.add(tag + ".b", layer.out);
        const bool head = l + 2 == sizes.size();
        if (!head) {
            std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(layer.in)));
            for (double& w : params.view(layer.weights.name)) {
                w = init(init_rng);
            }
        }
        layers_.push_back(layer);
    }
}

PolicyNet::PolicyNet(PolicyNetConfig config, const grad::ParamStore& params, const GmmDiffusionEnv* anchor,
                     const std::string& prefix)
    : config_(std::move(config)), anchor_(anchor) {
    std::vector<std::size_t> sizes{kInputs};
    sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
    sizes.push_back(4);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        const std::string tag = prefix + ".l" + std::to_string(l);
        layer.weights = params.slice(tag + ".w");
        layer.bias = params.slice(tag + ".b");
        if (layer.weights.length != layer.in * layer.out || layer.bias.length != layer.out) {
            throw PreconditionError("parameter slice sizes under '" + tag + "' do not match the network shape");
        }
        layers_.push_back(layer);
    }
}

std::array<double, PolicyNet::kInputs> PolicyNet::features(const Point& x, std::size_t t, std::size_t horizon) {
    const double tau = static_cast<double>(t) / static_cast<double>(horizon);
    const double w = std::numbers::pi * tau;
    return {x[0], x[1], tau, std::sin(w), std::cos(w), std::sin(2.0 * w), std::cos(2.0 * w)};
}

GaussianMoments PolicyNet::base(std::size_t t, const Point& x) const {
    if (anchor_ != nullptr && config_.anchor_to_prior) {
        return anchor_->prior_moments(t, x);
    }
    const double ls = std::log(config_.sigma_init);
    return GaussianMoments{x, Point{ls, ls}};
}

void PolicyNet::check_step(std::size_t t) const {
    if (t >= config_.horizon) {
        throw PreconditionError("step " + std::to_string(t) + " is outside the policy horizon " +
                                std::to_string(config_.horizon));
    }
}

template <class S, class Affine>
GaussianParams<S> PolicyNet::forward(Affine&& affine, std::vector<S> h, S zero, std::size_t t, const Point& x) const {
    using std::tanh;
    const GaussianMoments anchor = base(t, x);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (l > 0) {
            for (S& v : h) {
                v = tanh(v);
            }
        }
        const Layer& layer = layers_[l];
        std::vector<S> next;
        next.reserve(layer.out);
        for (std::size_t j = 0; j < layer.out; ++j) {
            next.push_back(affine(layer.weights.offset + j * layer.in, layer.bias.offset + j, h));
        }
        h = std::move(next);
    }

    const double lo = config_.log_std_min;
    const double hi = config_.log_std_max;
    GaussianParams<S> out{{zero, zero}, {zero, zero}};
    for (std::size_t d = 0; d < 2; ++d) {
        out.mean[d] = h[d] + anchor.mean[d];
        const double u = std::clamp(2.0 * (anchor.log_std[d] - lo) / (hi - lo) - 1.0, -1.0 + 1e-9, 1.0 - 1e-9);
        const S squashed = tanh(h[2 + d] + std::atanh(u));
        out.log_std[d] = (squashed + 1.0) * (0.5 * (hi - lo)) + lo;
    }
    return out;
}

GaussianParams<double> PolicyNet::transition(const grad::ParamStore& params, std::size_t t, const Point& x) const {
    check_step(t);
    const double* p = params.values().data();
    const auto feats = features(x, t, config_.horizon);
    auto dense = [p](std::size_t w, std::size_t b, const std::vector<double>& in) {
        double acc = p[b];
        for (std::size_t i = 0; i < in.size(); ++i) {
            acc += p[w + i] * in[i];
        }
        return acc;
    };
    auto out = forward<double>(dense, std::vector<double>(feats.begin(), feats.end()), 0.0, t, x);
    for (std::size_t d = 0; d < 2; ++d) {
        check_finite(out.mean[d], "mean");
        check_finite(out.log_std[d], "log-std");
    }
    return out;
}

GaussianParams<grad::Var> PolicyNet::transition(grad::Tape& tape, std::size_t t, const Point& x) const {
    check_step(t);
    const grad::Var zero = tape.constant(0.0);
    std::vector<grad::Var> inputs;
    for (double f : features(x, t, config_.horizon)) {
        inputs.push_back(tape.constant(f));
    }
    auto dense = [&tape](std::size_t w, std::size_t b, const std::vector<grad::Var>& in) {
        return tape.affine(w, b, in);
    };
    auto out = forward<grad::Var>(dense, std::move(inputs), zero, t, x);
    for (std::size_t d = 0; d < 2; ++d) {
        check_finite(out.mean[d].value(), "mean");
        check_finite(out.log_std[d].value(), "log-std");
    }
    return out;
}

double PolicyNet::log_prob(const grad::ParamStore& params, std::size_t t, const Point& x, const Point& next) const {
    return diag_gaussian_log_prob(transition(params, t, x), next);
}

grad::Var PolicyNet::log_prob(grad::Tape& tape, std::size_t t, const Point& x, const Point& next) const {
    return diag_gaussian_log_prob(transition(tape, t, x), next);
}

Point PolicyNet::sample(const grad::ParamStore& params, std::size_t t, const Point& x, Rng& rng) const {
    const auto g = transition(params, t, x);
    return Point{g.mean[0] + std::exp(g.log_std[0]) * standard_normal(rng),
                 g.mean[1] + std::exp(g.log_std[1]) * standard_normal(rng)};
}

grad::Var PolicyNet::trajectory_log_prob(grad::Tape& tape, const Trajectory<DiffusionState>& traj) const {
    grad::Var sum = tape.constant(0.0);
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
        sum = sum + log_prob(tape, t, traj.states[t].x, traj.states[t + 1].x);
    }
    return sum;
}

double PolicyNet::trajectory_log_prob(const grad::ParamStore& params, const Trajectory<DiffusionState>& traj) const {
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
        sum += log_prob(params, t, traj.states[t].x, traj.states[t + 1].x);
    }
    return sum;
}

}  // namespace rtbpcl::envs
