#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rtbpcl/objectives/objectives.hpp"

namespace rtbpcl::cli {

// Outcome of one self-contained numerical check.
struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // measured values vs thresholds
    double seconds = 0.0;
};

// Δ_T-PCL = αΔ_RTB, L_T-PCL = α²L_RTB and the matching gradients over 1000
// random (env, φ, log Z, batch) draws for each α in {0.3, 0.5, 1, 2, 2.7}.
CheckResult check_residual_identity(std::uint64_t seed = 1);

// RTB and Trust-PCL trained side by side from the same seed, with v0 = α log Z
// and lr_v0 = α lr_logZ: per-iteration losses satisfy L_T = α² L_R.
CheckResult check_paired_training(std::uint64_t seed = 11);

// On 200 random tabular environments the optimal policy's terminal marginal
// equals the tilted target and exp(V(s_0)/α) equals the enumerated Z.
CheckResult check_optimal_marginal(std::uint64_t seed = 2);

// On-policy α∇L_RTB = ∇L_RL with baseline α log Z on 50 random
// configurations, and the identity breaks when the baseline is shifted by 1.
CheckResult check_gradient_equivalence(std::uint64_t seed = 3);

// Reverse-mode vs central differences (ε = 1e-5) for every objective on the
// tabular fixtures.
CheckResult check_finite_differences(std::uint64_t seed = 6);

// SNIS weights sum to 1 and equal 1/N for on-policy batches.
CheckResult check_snis_weights(std::uint64_t seed = 7);

// The reward exp(-E) drives the on-policy variant to the wrong tilted target
// on the two-terminal environment while the KL-reward variant reaches the
// correct one.
CheckResult check_wrong_reward(std::uint64_t seed = 4);

// RTB or Trust-PCL on the depth-2 branching-3 fixture: TV < 0.01 to the
// tilted target and |log Z error| < 0.01 within 2000 iterations at N = 64.
CheckResult check_training_accuracy(objectives::Objective objective, std::uint64_t seed = 5);

std::vector<std::string_view> suite_names();
// Throws PreconditionError for an unknown suite.
std::vector<CheckResult> run_suite(std::string_view suite);

// "PASS name (detail) [1.23 s]" or "FAIL ...".
std::string format_check(const CheckResult& result);

}  // namespace rtbpcl::cli
