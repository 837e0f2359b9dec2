// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria. Usage: acceptance [figure_dir]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rtbpcl/cli/checks.hpp"
#include "rtbpcl/cli/figure.hpp"
#include "rtbpcl/error.hpp"

using namespace rtbpcl;
using namespace rtbpcl::cli;

namespace {

struct Criterion {
    int id;
    std::string title;
    std::vector<CheckResult> checks;
    double budget_seconds;  // per check
};

int report(const Criterion& c) {
    bool pass = true;
    bool in_budget = true;
    double seconds = 0.0;
    std::ostringstream detail;
    for (const auto& r : c.checks) {
        pass = pass && r.pass;
        in_budget = in_budget && r.seconds <= c.budget_seconds;
        seconds += r.seconds;
        detail << "\n    " << format_check(r);
    }
    pass = pass && in_budget;
    std::printf("%s criterion %d: %s [%.1f s, budget %.0f s per check%s]%s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                seconds, c.budget_seconds, in_budget ? "" : ", over budget", detail.str().c_str());
    std::fflush(stdout);
    return pass ? 0 : 1;
}

CheckResult figure_check(const std::filesystem::path& dir) {
    CheckResult r;
    r.name = "25-mode comparison over 1e5 samples per sampler";
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto result = run_figure(default_figure_options(), dir, [](const std::string& msg) {
            std::cerr << "  figure: " << msg << '\n';
        });
        const double rtb = result.panel("rtb").mode_tv;
        const double tpcl = result.panel("tpcl").mode_tv;
        const double kl = result.panel("reinforce_kl").mode_tv;
        const double alg1 = result.panel("reinforce_rtbpaper").mode_tv;
        r.pass = rtb <= 0.05 && kl <= 0.05 && alg1 >= 2.0 * std::max(rtb, kl);
        std::ostringstream os;
        os.precision(4);
        os << "mode TV: rtb = " << rtb << " (<= 0.05), reinforce-kl = " << kl
           << " (<= 0.05), reinforce-rtbpaper = " << alg1 << " (>= 2 x " << std::max(rtb, kl)
           << "); trust-pcl = " << tpcl << "; outputs in " << dir.string();
        r.detail = os.str();
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path figure_dir =
        argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::current_path() / "acceptance_figure";
    int failed = 0;
    failed += report({1, "RTB / Trust-PCL residual, loss and gradient identity", {check_residual_identity()}, 10});
    failed += report({2, "optimal policy reaches the tilted marginal", {check_optimal_marginal()}, 30});
    failed += report({3, "RTB gradient equals REINFORCE gradient with baseline alpha log Z",
                      {check_gradient_equivalence()}, 10});
    failed += report({4, "exp(-E) reward converges to the wrong target, KL reward to the right one",
                      {check_wrong_reward()}, 120});
    failed += report({5, "RTB and Trust-PCL training accuracy on the depth-2 fixture",
                      {check_training_accuracy(objectives::Objective::rtb),
                       check_training_accuracy(objectives::Objective::tpcl)},
                      120});
    failed += report({6, "25-mode mixture: RTB and off-policy REINFORCE beat the exp(-E) baseline",
                      {figure_check(figure_dir)}, 1800});
    failed += report({7, "finite-difference gradients and SNIS normalisation",
                      {check_finite_differences(), check_snis_weights()}, 600});
    std::printf("%d of 7 criteria failed\n", failed);
    return failed;
}
