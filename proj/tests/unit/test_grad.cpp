#include "doctest.h"

#include <cmath>
#include <cstring>

#include "rtbpcl/error.hpp"
#include "rtbpcl/grad/param_store.hpp"
#include "rtbpcl/grad/tape.hpp"
#include "rtbpcl/rng.hpp"

using namespace rtbpcl;
using namespace rtbpcl::grad;

TEST_CASE("param store layout") {
    ParamStore p;
    const auto a = p.add("a", 3, 1.0);
    const auto b = p.add("b", 2, -1.0);
    CHECK(a.offset == 0);
    CHECK(b.offset == 3);
    CHECK(p.size() == 5);
    CHECK(p.view("b")[1] == -1.0);
    CHECK(p.contains("a"));
    CHECK_FALSE(p.contains("c"));
    CHECK_THROWS_AS(p.slice("c"), PreconditionError);
    CHECK_THROWS_AS(p.add("a", 1), PreconditionError);
}

TEST_CASE("param store rebuild rejects gaps and overlaps") {
    CHECK_NOTHROW(ParamStore({{"x", 0, 2}, {"y", 2, 1}}, {1, 2, 3}));
    CHECK_THROWS_AS(ParamStore({{"x", 0, 2}, {"y", 3, 1}}, {1, 2, 3, 4}), PreconditionError);
    CHECK_THROWS_AS(ParamStore({{"x", 0, 2}, {"y", 1, 2}}, {1, 2, 3}), PreconditionError);
    CHECK_THROWS_AS(ParamStore({{"x", 0, 2}}, {1, 2, 3}), PreconditionError);
    CHECK_THROWS_AS(ParamStore({{"x", 0, 1}, {"x", 1, 1}}, {1, 2}), PreconditionError);
}

TEST_CASE("evaluate: identities and domain errors") {
    ParamStore p;
    p.add("x", 1, 3.5);
    {
        Tape t(p);
        t.set_output(log(exp(t.param(0))));
        CHECK(evaluate(t, p) == doctest::Approx(3.5).epsilon(1e-15));
    }
    {
        Tape t(p);
        t.set_output(t.param(0) * 0.0 + 7.0);
        for (double x : {-2.0, 0.0, 11.0}) {
            p[0] = x;
            CHECK(evaluate(t, p) == 7.0);
        }
    }
    {
        p[0] = 1.0;
        Tape t(p);
        t.set_output(log(t.param(0)));
        p[0] = 0.0;
        CHECK_THROWS_AS(evaluate(t, p), NonFiniteError);
        try {
            evaluate(t, p);
        } catch (const NonFiniteError& e) {
            CHECK(std::string(e.what()).find("log") != std::string::npos);
        }
    }
}

TEST_CASE("analytic derivatives") {
    ParamStore p;
    p.add("x", 1, 3.0);
    p.add("unused", 2, 1.0);
    Tape t(p);
    t.set_output(square(t.param(0)));
    const auto g = gradient(t, p);
    CHECK(g[0] == doctest::Approx(6.0));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);

    p[0] = 2.0;
    Tape t2(p);
    t2.set_output(log(t2.param(0)));
    CHECK(gradient(t2, p)[0] == doctest::Approx(0.5));
}

TEST_CASE("every op matches finite differences") {
    ParamStore p;
    p.add("x", 2);
    p[0] = 0.7;
    p[1] = -1.3;
    Tape t(p);
    const Var x = t.param(0);
    const Var y = t.param(1);
    Var out = (x + y) * (x - y) / (2.0 + square(y));
    out = out + exp(x) * tanh(y) - softplus(y * 3.0) + log(1.5 + x) + (-x) * y;
    t.set_output(out);
    CHECK(check_gradient(t, p, 1e-5) < 1e-8);
}

TEST_CASE("two-layer tanh network gradient vs finite differences") {
    Rng rng = make_rng(3, 0, 0);
    ParamStore p;
    const auto w1 = p.add("w1", 4 * 3);
    const auto b1 = p.add("b1", 4);
    const auto w2 = p.add("w2", 4);
    for (double& v : p.values()) {
        v = standard_normal(rng);
    }
    const double input[3] = {0.3, -0.8, 1.1};
    Tape t(p);
    Var out = t.constant(0.0);
    for (std::size_t j = 0; j < 4; ++j) {
        Var acc = t.param(b1, j);
        for (std::size_t i = 0; i < 3; ++i) {
            acc = acc + t.param(w1, j * 3 + i) * input[i];
        }
        out = out + t.param(w2, j) * tanh(acc);
    }
    t.set_output(square(out - 0.25));
    CHECK(check_gradient(t, p, 1e-5) < 1e-6);
}

TEST_CASE("fused affine nodes agree with the scalar graph") {
    Rng rng = make_rng(4, 0, 0);
    ParamStore p;
    const auto w1 = p.add("w1", 4 * 3);
    const auto b1 = p.add("b1", 4);
    const auto w2 = p.add("w2", 4);
    const auto b2 = p.add("b2", 1);
    for (double& v : p.values()) {
        v = standard_normal(rng);
    }
    const double input[3] = {0.3, -0.8, 1.1};

    Tape scalar(p);
    Var out = scalar.param(b2, 0);
    for (std::size_t j = 0; j < 4; ++j) {
        Var acc = scalar.param(b1, j);
        for (std::size_t i = 0; i < 3; ++i) {
            acc = acc + scalar.param(w1, j * 3 + i) * input[i];
        }
        out = out + scalar.param(w2, j) * tanh(acc);
    }
    scalar.set_output(square(out));

    Tape fused(p);
    std::vector<Var> x;
    for (double v : input) {
        x.push_back(fused.constant(v));
    }
    std::vector<Var> h;
    for (std::size_t j = 0; j < 4; ++j) {
        h.push_back(tanh(fused.affine(w1.offset + j * 3, b1.offset + j, x)));
    }
    fused.set_output(square(fused.affine(w2.offset, b2.offset, h)));

    CHECK(fused.size() < scalar.size());
    CHECK(evaluate(fused, p) == doctest::Approx(evaluate(scalar, p)).epsilon(1e-14));
    const auto gs = gradient(scalar, p);
    const auto gf = gradient(fused, p);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        CHECK(gf[i] == doctest::Approx(gs[i]).epsilon(1e-12));
    }
    CHECK(check_gradient(fused, p, 1e-5) < 1e-6);

    // Re-evaluation follows the store it is given.
    ParamStore q = p;
    q[b2.offset] += 1.0;
    const double moved = evaluate(fused, q);
    CHECK(moved != evaluate(fused, p));
    CHECK_THROWS_AS(fused.affine(p.size() - 1, 0, x), PreconditionError);
}

TEST_CASE("quadratic loss is differentiated to roundoff") {
    ParamStore p;
    p.add("x", 3);
    p[0] = 1.0;
    p[1] = -2.0;
    p[2] = 0.5;
    Tape t(p);
    t.set_output(square(t.param(0) - 1.5) + 3.0 * square(t.param(1)) + t.param(0) * t.param(2));
    CHECK(check_gradient(t, p, 1e-5) < 1e-8);
    CHECK_THROWS_AS(check_gradient(t, p, 0.0), PreconditionError);
}

TEST_CASE("linearity of the gradient") {
    Rng rng = make_rng(5, 0, 0);
    ParamStore p;
    p.add("x", 3);
    for (double& v : p.values()) {
        v = standard_normal(rng);
    }
    auto f = [](Tape& t) { return tanh(t.param(0) * t.param(1)) + exp(t.param(2) * 0.3); };
    auto g = [](Tape& t) { return square(t.param(0) - t.param(2)) + softplus(t.param(1)); };
    const double a = 1.7;
    const double b = -0.4;
    Tape tf(p);
    tf.set_output(f(tf));
    Tape tg(p);
    tg.set_output(g(tg));
    Tape tc(p);
    tc.set_output(a * f(tc) + b * g(tc));
    const auto gf = gradient(tf, p);
    const auto gg = gradient(tg, p);
    const auto gc = gradient(tc, p);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(gc[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
    }
}

TEST_CASE("stop-gradient blocks the backward pass") {
    ParamStore p;
    p.add("x", 1, 2.0);
    Tape t(p);
    const Var x = t.param(0);
    t.set_output(t.stop_gradient(x) * x);
    CHECK(gradient(t, p)[0] == doctest::Approx(2.0));
}

TEST_CASE("repeated evaluation is bit-identical") {
    ParamStore p;
    p.add("x", 2);
    p[0] = 0.123;
    p[1] = 4.56;
    Tape t(p);
    t.set_output(log(softplus(t.param(0)) + exp(tanh(t.param(1)))) / (1.0 + square(t.param(0))));
    const double first = evaluate(t, p);
    const double second = evaluate(t, p);
    CHECK(std::memcmp(&first, &second, sizeof(double)) == 0);
    CHECK(backward(t) == gradient(t, p));
}
