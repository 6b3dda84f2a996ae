#include <catch2/catch_amalgamated.hpp>

#include "hyfts/io.hpp"
#include "hyfts/systems.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

using namespace hyfts;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("hyfts_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

#ifdef HYFTS_CLI
int run_cli(const std::string& args) {
    const std::string cmd = std::string(HYFTS_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}
#endif

}  // namespace

TEST_CASE("registry documents survive save/load exactly", "[io]") {
    const auto dir = temp_dir("roundtrip");
    for (const auto& ex : registry()) {
        INFO(ex.doc.name);
        const auto path = dir / (ex.doc.name + ".json");
        io::save_system(ex.doc, path);
        const auto loaded = io::load_system(path);
        CHECK(io::documents_equal(ex.doc, loaded));

        // behavioral check: compiled flows and V agree bitwise on random states
        const auto a = compile_system(ex.doc);
        const auto b = compile_system(loaded);
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        Vec x(static_cast<std::size_t>(ex.doc.dimension));
        Vec fa(x.size()), fb(x.size());
        for (int trial = 0; trial < 25; ++trial) {
            for (auto& xi : x) xi = u(rng);
            for (std::size_t m = 0; m < a.def.flows.size(); ++m) {
                a.def.flows[m](x, fa);
                b.def.flows[m](x, fb);
                CHECK(fa == fb);
            }
            for (std::size_t m = 0; m < a.lyapunov.functions.size(); ++m)
                CHECK(eval_V(a.lyapunov, static_cast<int>(m), x) ==
                      eval_V(b.lyapunov, static_cast<int>(m), x));
        }
    }
}

TEST_CASE("trajectory CSV re-parses under its schema", "[io]") {
    const auto ex = five_mode();
    auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    const auto traj = simulate(sys.def, Vec{0.05, 0.04}, cfg);
    const std::string csv = io::trajectory_csv(traj);
    const auto rows = io::parse_trajectory_csv(csv);

    std::size_t samples = 0;
    for (const auto& s : traj.segments) samples += s.sample_count();
    REQUIRE(rows.size() == samples);

    // times non-decreasing; events consistent with the jump/switch counts
    std::size_t jumps = 0, switches = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].x.size() == 2);
        if (i > 0) CHECK(rows[i].t >= rows[i - 1].t);
        if (rows[i].event == "jump") ++jumps;
        if (rows[i].event == "switch") ++switches;
    }
    CHECK(jumps == traj.jump_events.size());
    CHECK(switches == traj.segments.size() - 1);

    // first row reproduces x0 exactly
    CHECK(rows[0].x[0] == 0.05);
    CHECK(rows[0].x[1] == 0.04);
}

TEST_CASE("manifest carries the truncation reason and settling time", "[io]") {
    const auto ex = scalar_fts();
    auto sys = compile_system(ex.doc);
    const auto traj = simulate(sys.def, Vec{1.0}, sys.integration);
    const auto j = io::manifest_json(traj, settling_time(traj, 1e-9));
    CHECK(j.at("truncation") == "converged");
    CHECK(j.at("settling_time").get<double>() > 0.9);
    CHECK(j.at("dimension") == 1);
}

TEST_CASE("plot CSVs have the documented headers", "[io]") {
    const auto ex = five_mode();
    auto sys = compile_system(ex.doc);
    auto cfg = sys.integration;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    const auto traj = simulate(sys.def, Vec{0.05, 0.04}, cfg);
    CHECK(io::switching_signal_csv(traj).starts_with("t,mode\n"));
    CHECK(io::states_csv(traj).starts_with("t,x1,x2\n"));
    CHECK(io::norm_log10_csv(traj).starts_with("t,log10_norm\n"));
    CHECK(io::lyapunov_csv(traj, sys.lyapunov).starts_with("t,V1,V2,V3,V4,V5\n"));
}

#ifdef HYFTS_CLI

TEST_CASE("cli: simulate writes outputs and exits 0", "[cli]") {
    const auto dir = temp_dir("cli_sim");
    const int rc = run_cli("simulate --example paper --x0 0.05,0.04 --dt 1e-3 --t-end 1 --out " +
                           dir.string());
    CHECK(rc == 0);
    for (const char* f : {"trajectory.csv", "manifest.json", "switching_signal.csv",
                          "states.csv", "norm_log10.csv", "lyapunov.csv"})
        CHECK(fs::exists(dir / f));
}

TEST_CASE("cli: zero start converges immediately", "[cli]") {
    const auto dir = temp_dir("cli_zero");
    const int rc = run_cli("simulate --example paper --x0 0,0 --out " + dir.string());
    CHECK(rc == 0);
    const auto manifest = slurp(dir / "manifest.json");
    CHECK(manifest.find("\"converged\"") != std::string::npos);
}

TEST_CASE("cli: invalid system file exits 1 with a violation message", "[cli]") {
    const auto dir = temp_dir("cli_bad");
    auto doc = scalar_fts().doc;
    doc.flows[0][0] = "x1 + 1";  // f(0) = 1: violates the equilibrium assumption
    io::save_system(doc, dir / "bad.json");
    const int rc = run_cli("simulate --system " + (dir / "bad.json").string() +
                           " --x0 1 --out " + dir.string());
    CHECK(rc == 1);
}

TEST_CASE("cli: certify needs 3 distinct radii", "[cli]") {
    const auto dir = temp_dir("cli_radii");
    const int rc = run_cli("certify --example scalar-fts --radii 1.0 --out " + dir.string());
    CHECK(rc == 1);
}

TEST_CASE("cli: certify verdicts map to exit codes", "[cli]") {
    const auto dir = temp_dir("cli_verdicts");
    CHECK(run_cli("certify --example scalar-fts --out " + (dir / "a").string()) == 0);
    const int unstable = run_cli("certify --example unstable-only --out " + (dir / "b").string());
    CHECK((unstable == 3 || unstable == 4));
    CHECK(fs::exists(dir / "a" / "certificate.json"));
    CHECK(fs::exists(dir / "a" / "envelopes.csv"));
    CHECK(fs::exists(dir / "a" / "summary.txt"));
}

TEST_CASE("cli: lemma1 suite exits 0 with tiny slack", "[cli]") {
    const auto dir = temp_dir("cli_lemma");
    CHECK(run_cli("lemma1 --count 1000 --seed 42 --out " + dir.string()) == 0);
    const auto stats = slurp(dir / "lemma1_stats.json");
    CHECK(stats.find("\"all_hold\": true") != std::string::npos);
    CHECK(run_cli("lemma1 --count 0 --out " + dir.string()) == 0);  // vacuous
}

TEST_CASE("cli: identical config and seed give bit-identical outputs", "[cli]") {
    const auto dir = temp_dir("cli_det");
    const std::string args =
        " --example scalar-fts-pair --x0 0.7 --seed 7 --t-end 4 --out ";
    REQUIRE(run_cli("simulate" + args + (dir / "r1").string()) == 0);
    REQUIRE(run_cli("simulate" + args + (dir / "r2").string()) == 0);
    for (const char* f : {"trajectory.csv", "manifest.json", "lyapunov.csv"})
        CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));

    const std::string cargs = " --example scalar-fts --seed 3 --out ";
    REQUIRE(run_cli("certify" + cargs + (dir / "c1").string()) == 0);
    REQUIRE(run_cli("certify" + cargs + (dir / "c2").string()) == 0);
    CHECK(slurp(dir / "c1" / "certificate.json") == slurp(dir / "c2" / "certificate.json"));
    CHECK(slurp(dir / "c1" / "envelopes.csv") == slurp(dir / "c2" / "envelopes.csv"));
}

TEST_CASE("cli: sweep writes the summary table", "[cli]") {
    const auto dir = temp_dir("cli_sweep");
    const int rc = run_cli("sweep --example scalar-fts --radii 0.25,1 --angles 2 --out " +
                            dir.string());
    CHECK(rc == 0);
    const auto csv = slurp(dir / "sweep_summary.csv");
    CHECK(csv.starts_with("radius,x0_1,truncation,settling_time\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 runs
}

#endif  // HYFTS_CLI
