#include <catch2/catch_amalgamated.hpp>

#include "hyfts/systems.hpp"

#include <cmath>

using namespace hyfts;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("every registry entry passes system and Lyapunov validation", "[systems]") {
    for (const auto& ex : registry()) {
        INFO(ex.doc.name);
        const auto sys = compile_system(ex.doc);
        CHECK(validate_system(sys.def).empty());
        CHECK(validate_lyapunov(sys.lyapunov, sys.def.dimension).empty());
        CHECK(sys.lyapunov.functions.size() == sys.def.flows.size());
    }
}

TEST_CASE("five-mode flows match their printed form", "[systems]") {
    const auto sys = compile_system(five_mode().doc);
    REQUIRE(sys.def.flows.size() == 5);
    Vec out(2);

    // f5 at (1, 1): (1 - 20, -10)
    sys.def.flows[4](Vec{1.0, 1.0}, out);
    CHECK_THAT(out[0], WithinAbs(-19.0, 1e-12));
    CHECK_THAT(out[1], WithinAbs(-10.0, 1e-12));

    // f3 is the linear spiral
    sys.def.flows[2](Vec{1.0, 0.0}, out);
    CHECK(out[0] == -1.0);
    CHECK(out[1] == 1.0);

    // f1 at (2, 1): (0.01*4 + 1, -0.01*8 + 1)
    sys.def.flows[0](Vec{2.0, 1.0}, out);
    CHECK_THAT(out[0], WithinAbs(1.04, 1e-12));
    CHECK_THAT(out[1], WithinAbs(0.92, 1e-12));

    // jump g at (1, -2): (-1.1, 2.2)
    sys.def.jumps[0](Vec{1.0, -2.0}, out);
    CHECK_THAT(out[0], WithinAbs(-1.1, 1e-12));
    CHECK_THAT(out[1], WithinAbs(2.2, 1e-12));

    // all five flows vanish at the origin (needs sign(0) = 0)
    for (const auto& f : sys.def.flows) {
        f(Vec{0.0, 0.0}, out);
        CHECK(out[0] == 0.0);
        CHECK(out[1] == 0.0);
    }
}

TEST_CASE("five-mode Lyapunov functions match their matrices", "[systems]") {
    const auto sys = compile_system(five_mode().doc);
    CHECK(eval_V(sys.lyapunov, 1, Vec{1.0, 1.0}) == 13.0);  // P2
    CHECK(eval_V(sys.lyapunov, 0, Vec{1.0, 1.0}) == 2.0);   // P1 = I
    // V5 = (20/3)|x1|^{3/2} + x2^2/2
    CHECK_THAT(eval_V(sys.lyapunov, 4, Vec{1.0, 1.0}), WithinRel(20.0 / 3.0 + 0.5, 1e-14));

    // derivative identity along f5: vdot5 = -200|x1|^{5/4}
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 100; ++i) {
        const Vec x{u(rng), u(rng)};
        if (std::fabs(x[0]) < 1e-8) continue;
        const double expected = -200.0 * std::pow(std::fabs(x[0]), 1.25);
        CHECK_THAT(vdot_along(sys.lyapunov, 4, sys.def.flows[4], x), WithinRel(expected, 1e-8));
    }
}

TEST_CASE("scalar oracle worked values", "[systems]") {
    const auto ex = scalar_fts(2.0, 0.75);  // xdot = -2 sign(x)|x|^{1/2}
    REQUIRE(ex.settling_oracle);
    CHECK_THAT(ex.settling_oracle(Vec{1.0}), WithinAbs(1.0, 1e-14));
    CHECK(ex.settling_oracle(Vec{0.0}) == 0.0);
    CHECK_THAT(ex.settling_oracle(Vec{4.0}), WithinAbs(2.0, 1e-14));

    CHECK_THROWS_AS(scalar_fts(-1.0, 0.75), std::invalid_argument);
    CHECK_THROWS_AS(scalar_fts(1.0, 0.4), std::invalid_argument);  // exponent <= 0
    CHECK_THROWS_AS(scalar_fts(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("scalar simulation matches the closed-form settling time", "[systems]") {
    const auto ex = scalar_fts(2.0, 0.75);
    const auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;
    cfg.t_end = 4.0;
    const auto traj = simulate(sys.def, Vec{1.0}, cfg);
    REQUIRE(traj.truncation == Truncation::Converged);
    CHECK_THAT(traj.t_final, WithinRel(ex.settling_oracle(Vec{1.0}), 0.02));
}

TEST_CASE("unstable-only never settles from (0.5, 0.5)", "[systems]") {
    const auto ex = unstable_only();
    const auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;  // 10 s horizon
    const auto traj = simulate(sys.def, Vec{0.5, 0.5}, cfg);
    CHECK(traj.truncation != Truncation::Converged);
    CHECK_FALSE(settling_time(traj, 1e-4).has_value());
    // the FTS mode never activates
    CHECK(segment_intervals(traj, 4).activations.empty());
}

TEST_CASE("find_example resolves names and aliases", "[systems]") {
    CHECK(find_example("five-mode") != nullptr);
    CHECK(find_example("paper") == find_example("five-mode"));
    CHECK(find_example("scalar-fts") != nullptr);
    CHECK(find_example("nope") == nullptr);
}

TEST_CASE("five-mode qualitative run shows all three growth mechanisms", "[systems]") {
    // short horizon, small radius: jumps, switches, and unstable segments all
    // push some V_i upward before anything settles or diverges
    const auto ex = five_mode();
    auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;
    cfg.dt = 1e-3;
    cfg.t_end = 2.0;
    const auto traj = simulate(sys.def, Vec{0.08, 0.06}, cfg);
    const auto cs = condition_sums(traj, sys.lyapunov, sys.def.policy.fts_mode);

    CHECK(cs.max_jump_sum() > 0.0);  // jumps amplify every V
    bool positive_switch_term = false;
    double prev = 0.0;
    for (double p : cs.switch_sum.partials) {
        if (p > prev + 1e-15) positive_switch_term = true;
        prev = p;
    }
    CHECK(positive_switch_term);
    bool positive_flow_term = false;
    prev = 0.0;
    for (double p : cs.flow_sum.partials) {
        if (p > prev + 1e-15) positive_flow_term = true;
        prev = p;
    }
    CHECK(positive_flow_term);
    CHECK(cs.telescoping_residual < 1e-9);
}

TEST_CASE("five-mode is locally FTS: tiny radii settle, unit radii do not", "[systems]") {
    const auto ex = five_mode();
    auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;
    cfg.dt = 1e-3;  // keeps this test quick; convergence is step-size robust here

    const auto small = simulate(sys.def, Vec{0.0008, 0.0006}, cfg);
    CHECK(small.truncation == Truncation::Converged);

    const auto unit = simulate(sys.def, Vec{0.8, 0.6}, cfg);
    CHECK(unit.truncation == Truncation::Diverged);
}
