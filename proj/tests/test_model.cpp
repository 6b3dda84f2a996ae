#include <catch2/catch_amalgamated.hpp>

#include "hyfts/integrate.hpp"
#include "hyfts/model.hpp"

#include <cmath>

using namespace hyfts;

namespace {

FlowFn linear_decay() {
    return [](std::span<const double> x, std::span<double> dx) {
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = -x[i];
    };
}

HybridSystemDef tiny_system() {
    HybridSystemDef def;
    def.dimension = 1;
    def.flows.push_back(linear_decay());
    def.jumps.push_back([](std::span<const double> x, std::span<double> out) {
        out[0] = -1.1 * x[0];
    });
    def.policy.modes = PeriodicModes{{{0, 1.0}}};
    def.policy.jumps = NoJumps{};
    def.policy.t_d = 0.1;
    def.policy.fts_mode = 0;
    return def;
}

/// Hand-built trajectory: one segment [0,1) of the given mode with jumps at
/// the given instants (state content irrelevant for interval bookkeeping).
HybridTrajectory interval_fixture(std::vector<double> jump_times) {
    HybridTrajectory traj;
    traj.dimension = 1;
    traj.num_modes = 2;
    traj.t0 = 0.0;
    traj.x0 = {1.0};
    FlowSegment s;
    s.mode = 0;
    s.t_start = 0.0;
    s.t_end = 1.0;
    double t = 0.0;
    auto push = [&](double ti, double val) {
        s.times.push_back(ti);
        s.states.push_back(val);
    };
    push(0.0, 1.0);
    for (double tj : jump_times) {
        push(tj, 1.0);  // pre
        push(tj, -1.1); // post
        (void)t;
    }
    push(1.0, 0.5);
    traj.segments.push_back(s);
    for (double tj : jump_times) {
        JumpEvent je;
        je.t = tj;
        je.jump_index = 0;
        je.active_mode = 0;
        je.segment = 0;
        je.x_before = {1.0};
        je.x_after = {-1.1};
        // locate the pre sample index
        for (std::size_t k = 0; k < traj.segments[0].times.size(); ++k)
            if (traj.segments[0].times[k] == tj) {
                je.pre_sample = k;
                break;
            }
        traj.jump_events.push_back(je);
    }
    traj.truncation = Truncation::Horizon;
    traj.t_final = 1.0;
    return traj;
}

}  // namespace

TEST_CASE("validate_system flags a non-vanishing flow", "[model]") {
    auto def = tiny_system();
    CHECK(validate_system(def).empty());

    def.flows[0] = [](std::span<const double> x, std::span<double> dx) {
        dx[0] = x[0] + 1.0;  // f(0) = 1 != 0
    };
    const auto v = validate_system(def);
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().find("f1") != std::string::npos);
}

TEST_CASE("validate_system accepts amplifying sign-flip jumps", "[model]") {
    auto def = tiny_system();  // g(x) = -1.1x vanishes at 0
    CHECK(validate_system(def).empty());
}

TEST_CASE("validate_system checks policy shape", "[model]") {
    auto def = tiny_system();
    def.policy.t_d = 0.0;
    CHECK_FALSE(validate_system(def).empty());
    def = tiny_system();
    def.policy.modes = PeriodicModes{{{5, 1.0}}};
    CHECK_FALSE(validate_system(def).empty());
    def = tiny_system();
    def.policy.jumps = ScheduledJumps{{{0.2, 0}, {0.1, 0}}};  // not increasing
    CHECK_FALSE(validate_system(def).empty());
}

TEST_CASE("bar windows pick the longest jump-free sub-interval", "[model]") {
    // worked case: T = [0,1), jumps {0.2, 0.4, 0.75} -> bar T = [0.4, 0.75)
    auto traj = interval_fixture({0.2, 0.4, 0.75});
    auto mi = segment_intervals(traj, 0);
    REQUIRE(mi.activations.size() == 1);
    CHECK(mi.activations[0] == std::pair{0.0, 1.0});
    CHECK(mi.jump_times == std::vector<double>{0.2, 0.4, 0.75});
    REQUIRE(mi.bar_windows.size() == 1);
    CHECK(mi.bar_windows[0].first == 0.4);
    CHECK(mi.bar_windows[0].second == 0.75);
}

TEST_CASE("a jump-free interval is its own bar window", "[model]") {
    auto traj = interval_fixture({});
    auto mi = segment_intervals(traj, 0);
    CHECK(mi.bar_windows[0] == std::pair{0.0, 1.0});
    CHECK(mi.jump_times.empty());
}

TEST_CASE("equal-length candidates tie-break to the earliest", "[model]") {
    // derived: [0,0.5) and [0.5,1) have equal length; earliest wins
    auto traj = interval_fixture({0.5});
    auto mi = segment_intervals(traj, 0);
    CHECK(mi.bar_windows[0] == std::pair{0.0, 0.5});
}

TEST_CASE("segment_intervals rejects bad mode indices", "[model]") {
    auto traj = interval_fixture({});
    CHECK_THROWS_AS(segment_intervals(traj, -1), std::out_of_range);
    CHECK_THROWS_AS(segment_intervals(traj, 2), std::out_of_range);
    CHECK(segment_intervals(traj, 1).activations.empty());  // valid but inactive
}

TEST_CASE("check_min_dwell compares bar lengths against t_d", "[model]") {
    // lengths {0.1, 0.1, 0.12} vs t_d = 0.1 -> true
    HybridTrajectory traj;
    traj.dimension = 1;
    traj.num_modes = 1;
    traj.t_final = 3.0;
    traj.truncation = Truncation::Horizon;
    auto seg = [&](double a, double b) {
        FlowSegment s;
        s.mode = 0;
        s.t_start = a;
        s.t_end = b;
        s.times = {a, b};
        s.states = {1.0, 1.0};
        traj.segments.push_back(s);
    };
    seg(0.0, 0.1);
    seg(1.0, 1.1);
    seg(2.0, 2.12);
    CHECK(check_min_dwell(traj, 0, 0.1));

    HybridTrajectory short_traj;
    short_traj.dimension = 1;
    short_traj.num_modes = 1;
    short_traj.t_final = 1.0;
    short_traj.truncation = Truncation::Horizon;
    FlowSegment s;
    s.mode = 0;
    s.t_start = 0.0;
    s.t_end = 0.09;
    s.times = {0.0, 0.09};
    s.states = {1.0, 1.0};
    short_traj.segments.push_back(s);
    CHECK_FALSE(check_min_dwell(short_traj, 0, 0.1));
}

TEST_CASE("check_min_dwell is vacuously true without activations", "[model]") {
    auto traj = interval_fixture({});
    CHECK(check_min_dwell(traj, 1, 0.1));  // mode 1 never active
}

TEST_CASE("adt_count_check covers the worked examples", "[model]") {
    HybridTrajectory traj;
    traj.dimension = 1;
    traj.num_modes = 1;
    for (int k = 1; k <= 10; ++k) {
        JumpEvent je;
        je.t = 0.1 * k;
        traj.jump_events.push_back(je);
    }
    // densest window [0.1, 1.0]: 10 jumps <= 1 + 10*0.9
    CHECK(adt_count_check(traj, 1, 10.0));
    CHECK_FALSE(adt_count_check(traj, 1, 0.0));  // any 2-jump window exceeds 1

    HybridTrajectory empty;
    empty.dimension = 1;
    CHECK(adt_count_check(empty, 1, 0.0));  // no jumps
    CHECK_THROWS_AS(adt_count_check(empty, 0, 0.0), std::invalid_argument);
}

TEST_CASE("simulated segmentation partitions the horizon", "[model][integrate]") {
    HybridSystemDef def;
    def.dimension = 2;
    def.flows.push_back([](std::span<const double> x, std::span<double> dx) {
        dx[0] = -x[0] - x[1];
        dx[1] = x[0] - x[1];
    });
    def.flows.push_back(linear_decay());
    def.jumps.push_back([](std::span<const double> x, std::span<double> out) {
        out[0] = -1.1 * x[0];
        out[1] = -1.1 * x[1];
    });
    def.policy.modes = PeriodicModes{{{0, 0.2}, {1, 0.2}}};
    def.policy.jumps = PeriodicJumps{0.1, 0.1, 0};
    def.policy.t_d = 0.1;
    def.policy.fts_mode = 0;

    IntegrationConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    auto traj = simulate(def, std::vector<double>{1.0, 0.5}, cfg);

    // segments tile [t0, t_final) and alternate modes
    REQUIRE_FALSE(traj.segments.empty());
    CHECK(traj.segments.front().t_start == 0.0);
    for (std::size_t i = 0; i + 1 < traj.segments.size(); ++i) {
        CHECK(traj.segments[i].t_end == traj.segments[i + 1].t_start);
        CHECK(traj.segments[i].t_end > traj.segments[i].t_start);
    }
    CHECK_THAT(traj.segments.back().t_end, Catch::Matchers::WithinAbs(1.0, 1e-12));

    // every jump lies inside its segment's half-open interval, and
    // x_after = g(x_before) exactly
    for (const auto& je : traj.jump_events) {
        const auto& s = traj.segments[je.segment];
        CHECK(je.t >= s.t_start);
        CHECK(je.t < s.t_end);
        CHECK(je.x_after[0] == -1.1 * je.x_before[0]);
        CHECK(je.x_after[1] == -1.1 * je.x_before[1]);
    }
    // union of per-mode activations == all segments
    const auto m0 = segment_intervals(traj, 0);
    const auto m1 = segment_intervals(traj, 1);
    CHECK(m0.activations.size() + m1.activations.size() == traj.segments.size());

    // interior of each bar window contains no jump
    for (int mode : {0, 1}) {
        const auto mi = segment_intervals(traj, mode);
        for (const auto& [a, b] : mi.bar_windows)
            for (double tj : mi.jump_times) {
                const bool interior = tj > a + 1e-15 && tj < b - 1e-15;
                CHECK_FALSE(interior);
            }
    }
}
