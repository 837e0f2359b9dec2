#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rtbpcl/envs/fixtures.hpp"
#include "rtbpcl/envs/gmm_env.hpp"
#include "rtbpcl/error.hpp"
#include "rtbpcl/eval/eval.hpp"
#include "rtbpcl/oracle/oracle.hpp"

using namespace rtbpcl;
using namespace rtbpcl::envs;
using namespace rtbpcl::eval;

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t k) {
    std::vector<double> p(k);
    double s = 0.0;
    for (double& x : p) {
        x = -std::log(uniform01(rng) + 1e-300);
        s += x;
    }
    for (double& x : p) {
        x /= s;
    }
    return p;
}

}  // namespace

TEST_CASE("mode histogram") {
    const Gmm g = grid_gmm();
    SUBCASE("one sample per centre") {
        const auto h = mode_histogram(g.means, g);
        for (auto c : h.counts) {
            CHECK(c == 1);
        }
        CHECK(h.unassigned == 0);
        CHECK(mode_tv(h, g.weights) < 1e-15);
    }
    SUBCASE("all samples at centre 0") {
        const std::vector<Point> pts(40, g.means[0]);
        const auto h = mode_histogram(pts, g);
        CHECK(h.counts[0] == 40);
        CHECK(h.total() == 40);
        CHECK(std::count(h.counts.begin(), h.counts.end(), 0u) == 24);
    }
    SUBCASE("ties go to the lowest index and far points are unassigned") {
        const Point mid{(g.means[0][0] + g.means[1][0]) / 2.0, (g.means[0][1] + g.means[1][1]) / 2.0};
        const std::vector<Point> pts{mid, Point{50.0, 50.0}};
        const auto h = mode_histogram(pts, g);
        CHECK(h.counts[0] == 1);
        CHECK(h.unassigned == 1);
        CHECK(h.radius == doctest::Approx(15.0 * g.sigma));
        // Half the mass is unassigned and counts fully against the model.
        std::vector<double> w(25, 0.0);
        w[0] = 1.0;
        CHECK(mode_tv(h, w) == doctest::Approx(0.5 * 0.5 + 0.5));
    }
    SUBCASE("permuting centres permutes counts") {
        Rng rng = make_rng(3, 0, 0);
        std::vector<Point> pts;
        for (int i = 0; i < 500; ++i) {
            pts.push_back(gmm_sample(g, rng));
        }
        Gmm rev = g;
        std::reverse(rev.means.begin(), rev.means.end());
        const auto a = mode_histogram(pts, g);
        const auto b = mode_histogram(pts, rev);
        for (std::size_t k = 0; k < 25; ++k) {
            CHECK(a.counts[k] == b.counts[24 - k]);
        }
    }
    SUBCASE("exact target draws") {
        const Gmm target = GmmDiffusionEnv::fixture().target_gmm();
        Rng rng = make_rng(4, 0, 0);
        std::vector<Point> pts;
        for (int i = 0; i < 100000; ++i) {
            pts.push_back(gmm_sample(target, rng));
        }
        CHECK(mode_tv(mode_histogram(pts, target), target.weights) < 0.02);
    }
    CHECK_THROWS_AS(mode_histogram(std::vector<Point>{}, g), PreconditionError);
}

TEST_CASE("total variation") {
    const std::vector<double> a{0.75, 0.25};
    const std::vector<double> b{0.5, 0.5};
    CHECK(tv_distance(a, a) == 0.0);
    CHECK(tv_distance(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) == 1.0);
    CHECK(tv_distance(a, b) == 0.25);
    CHECK_THROWS_AS(tv_distance(a, std::vector<double>{1.0}), PreconditionError);
    CHECK_THROWS_AS(tv_distance(a, std::vector<double>{0.5, 0.6}), PreconditionError);

    Rng rng = make_rng(5, 0, 0);
    for (int i = 0; i < 500; ++i) {
        const auto p = random_simplex(rng, 6);
        const auto q = random_simplex(rng, 6);
        const auto r = random_simplex(rng, 6);
        CHECK(tv_distance(p, q) == tv_distance(q, p));
        CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15);
        CHECK(tv_distance(p, q) > 0.0);
    }
}

TEST_CASE("log Z reports") {
    SUBCASE("tabular reference is the oracle") {
        const TabularEnv env = t2b3_env(0.6);
        const auto r = logz_report(1.0, env);
        CHECK(r.reference == oracle::tilted_target(env).log_z);
        CHECK(r.abs_err == std::abs(1.0 - r.reference));
    }
    SUBCASE("zero energy") {
        const Gmm prior = grid_gmm();
        const GmmDiffusionEnv env(prior, prior.weights, GmmDiffusionEnv::geometric_schedule(10), 1.0);
        Rng rng = make_rng(6, 0, 0);
        CHECK(std::abs(importance_log_z(env, rng, 2000)) < 1e-12);
    }
    SUBCASE("fixture reference") {
        // exp(-E) is the target/prior density ratio, so Z = 1 at alpha = 1.
        Rng rng = make_rng(7, 0, 0);
        const auto r = logz_report(0.0, GmmDiffusionEnv::fixture(), rng, 100000);
        CHECK(std::abs(r.reference) < 0.01);
    }
}

TEST_CASE("sample csv round trip") {
    const auto path = std::filesystem::temp_directory_path() / "rtbpcl_test_samples.csv";
    const std::vector<Point> pts{{0.1, -0.2}, {1.0 / 3.0, 2e-300}, {-7.5, 1e10}};
    write_samples_csv(path, pts);
    const auto back = read_samples_csv(path);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(back[i] == pts[i]);
    }
    std::filesystem::remove(path);
    CHECK_THROWS(read_samples_csv(path));
}

TEST_CASE("histogram json") {
    const Gmm g = grid_gmm();
    const auto j = to_json(mode_histogram(g.means, g), g.weights);
    CHECK(j.at("total") == 25);
    CHECK(j.at("counts").size() == 25);
}
