// hyfts: simulate hybrid systems with switching flows and state jumps, and
// check finite-time-stability certificates along the way.
//
// Subcommands:
//   list-examples            show the built-in system registry
//   simulate                 one run; writes trajectory, manifest, plot data
//   sweep                    batch runs over radii x directions
//   certify                  sweep + certificate report and verdict
//   lemma1                   randomized power-sum inequality suite
//
// Exit codes: 0 success (certify: FTS-evidence), 1 configuration error,
// 2 simulation failure, 3 certificate violated, 4 inconclusive.

#include "hyfts/certificate.hpp"
#include "hyfts/io.hpp"
#include "hyfts/systems.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace hyfts;

struct CommonArgs {
    std::string example;
    std::string system_path;
    std::string out_dir = "out";
    std::optional<double> dt, t_end, dwell, jump_period, t_d;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    auto* ex = cmd->add_option("--example", args.example, "built-in system name");
    auto* sy = cmd->add_option("--system", args.system_path, "system definition JSON file");
    ex->excludes(sy);
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--dt", args.dt, "integration step override");
    cmd->add_option("--t-end", args.t_end, "horizon override (seconds)");
    cmd->add_option("--dwell", args.dwell, "mode dwell override (seconds, all modes)");
    cmd->add_option("--jump-period", args.jump_period, "periodic jump spacing override");
    cmd->add_option("--td", args.t_d, "minimum jump-free dwell t_d override");
    cmd->add_option("--seed", args.seed, "seed for random schedules and sweep directions");
}

struct ResolvedSystem {
    SystemDocument doc;
    SweepSpec sweep;
};

ResolvedSystem resolve_system(const CommonArgs& args) {
    ResolvedSystem rs;
    if (!args.example.empty()) {
        const ExampleEntry* ex = find_example(args.example);
        if (!ex) throw std::invalid_argument("unknown example '" + args.example +
                                             "' (see list-examples)");
        rs.doc = ex->doc;
        rs.sweep = ex->default_sweep;
    } else if (!args.system_path.empty()) {
        rs.doc = io::load_system(args.system_path);
        rs.sweep.radii = {0.25, 0.5, 1.0, 2.0};
        rs.sweep.angles = 8;
    } else {
        throw std::invalid_argument("one of --example or --system is required");
    }

    if (args.dt) rs.doc.integration.dt = *args.dt;
    if (args.t_end) rs.doc.integration.t_end = *args.t_end;
    if (args.t_d) rs.doc.policy.t_d = *args.t_d;
    if (args.dwell) {
        if (auto* pm = std::get_if<PeriodicModes>(&rs.doc.policy.modes))
            for (auto& st : pm->sequence) st.duration = *args.dwell;
        else
            for (auto& d : std::get<RandomModes>(rs.doc.policy.modes).dwell) d = *args.dwell;
    }
    if (args.jump_period) {
        if (auto* pj = std::get_if<PeriodicJumps>(&rs.doc.policy.jumps)) {
            pj->period = *args.jump_period;
            pj->offset = *args.jump_period;
        } else {
            rs.doc.policy.jumps = PeriodicJumps{*args.jump_period, *args.jump_period, 0};
        }
    }
    if (args.seed) {
        if (auto* rm = std::get_if<RandomModes>(&rs.doc.policy.modes)) rm->seed = *args.seed;
        rs.sweep.seed = *args.seed;
    }
    return rs;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::string field;
    std::istringstream in(text);
    while (std::getline(in, field, ',')) {
        if (field.empty()) continue;
        out.push_back(std::stod(field));
    }
    return out;
}

int report_config_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}

int cmd_list_examples() {
    std::printf("%-16s %-4s %-6s %s\n", "name", "dim", "modes", "description");
    for (const auto& ex : registry()) {
        std::string name = ex.doc.name;
        for (const auto& alias : ex.aliases) name += " (" + alias + ")";
        std::printf("%-16s %-4d %-6zu %s\n", name.c_str(), ex.doc.dimension,
                    ex.doc.flows.size(), ex.doc.description.c_str());
    }
    return 0;
}

int cmd_simulate(const CommonArgs& common, const std::string& x0_text) {
    ResolvedSystem rs;
    CompiledSystem sys;
    Vec x0;
    try {
        rs = resolve_system(common);
        sys = compile_system(rs.doc);
        x0 = parse_csv_doubles(x0_text);
        if (static_cast<int>(x0.size()) != rs.doc.dimension)
            throw std::invalid_argument("--x0 must have " + std::to_string(rs.doc.dimension) +
                                        " components");
        const auto violations = validate_system(sys.def);
        if (!violations.empty()) {
            std::cerr << "invalid system:\n";
            for (const auto& v : violations) std::cerr << "  - " << v << "\n";
            return 1;
        }
        sys.integration.validate();
    } catch (const std::exception& e) {
        return report_config_error(e);
    }

    HybridTrajectory traj;
    try {
        traj = simulate(sys.def, x0, sys.integration);
    } catch (const std::exception& e) {
        std::cerr << "simulation failed: " << e.what() << "\n";
        return 2;
    }

    const auto settling = settling_time(traj, sys.integration.origin_tol);
    try {
        const fs::path out(common.out_dir);
        fs::create_directories(out);
        io::write_text(out / "trajectory.csv", io::trajectory_csv(traj));
        io::write_text(out / "manifest.json", io::manifest_json(traj, settling).dump(2) + "\n");
        io::write_text(out / "switching_signal.csv", io::switching_signal_csv(traj));
        io::write_text(out / "states.csv", io::states_csv(traj));
        io::write_text(out / "norm_log10.csv", io::norm_log10_csv(traj));
        io::write_text(out / "lyapunov.csv", io::lyapunov_csv(traj, sys.lyapunov));
    } catch (const std::exception& e) {
        return report_config_error(e);
    }
    std::printf("simulated %s to t = %.6g (%s)%s\n", rs.doc.name.c_str(), traj.t_final,
                to_string(traj.truncation),
                settling ? ("; settled at " + std::to_string(*settling)).c_str() : "");
    return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& radii_text, int angles) {
    ResolvedSystem rs;
    CompiledSystem sys;
    try {
        rs = resolve_system(common);
        sys = compile_system(rs.doc);
        if (!radii_text.empty()) rs.sweep.radii = parse_csv_doubles(radii_text);
        if (angles > 0) rs.sweep.angles = angles;
        if (rs.sweep.radii.empty()) throw std::invalid_argument("--radii must be non-empty");
        const auto violations = validate_system(sys.def);
        if (!violations.empty())
            throw std::invalid_argument("invalid system: " + violations.front());
    } catch (const std::exception& e) {
        return report_config_error(e);
    }

    CertifyOptions opt;
    const auto evidence = run_sweep(sys.def, sys.lyapunov, sys.integration, rs.sweep, opt);
    std::string csv = "radius,";
    for (int i = 1; i <= rs.doc.dimension; ++i) csv += "x0_" + std::to_string(i) + ",";
    csv += "truncation,settling_time\n";
    for (const auto& ev : evidence) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", ev.radius);
        csv += buf;
        for (double xi : ev.x0) {
            std::snprintf(buf, sizeof buf, ",%.17g", xi);
            csv += buf;
        }
        csv += ",";
        csv += to_string(ev.truncation);
        if (ev.settling) {
            std::snprintf(buf, sizeof buf, ",%.17g", *ev.settling);
            csv += buf;
        } else {
            csv += ",";
        }
        csv += "\n";
    }
    try {
        const fs::path out(common.out_dir);
        fs::create_directories(out);
        io::write_text(out / "sweep_summary.csv", csv);
    } catch (const std::exception& e) {
        return report_config_error(e);
    }
    std::printf("swept %zu initial conditions; summary in %s/sweep_summary.csv\n",
                evidence.size(), common.out_dir.c_str());
    return 0;
}

int cmd_certify(const CommonArgs& common, const std::string& radii_text, int angles,
                bool use_theorem3) {
    ResolvedSystem rs;
    CompiledSystem sys;
    try {
        rs = resolve_system(common);
        sys = compile_system(rs.doc);
        if (!radii_text.empty()) rs.sweep.radii = parse_csv_doubles(radii_text);
        if (angles > 0) rs.sweep.angles = angles;
        std::vector<double> distinct = rs.sweep.radii;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 3)
            throw std::invalid_argument("certify needs at least 3 distinct radii");
        const auto violations = validate_system(sys.def);
        if (!violations.empty())
            throw std::invalid_argument("invalid system: " + violations.front());
    } catch (const std::exception& e) {
        return report_config_error(e);
    }

    CertifyOptions opt;
    CertificateReport rep;
    try {
        const auto evidence = run_sweep(sys.def, sys.lyapunov, sys.integration, rs.sweep, opt);
        rep = use_theorem3 ? theorem3_verdict(evidence, sys.def.flows.size(), opt)
                           : theorem2_verdict(evidence, sys.lyapunov, rs.doc.policy.t_d, opt);
    } catch (const std::exception& e) {
        return report_config_error(e);
    }

    const std::string summary = io::summary_text(rep);
    try {
        const fs::path out(common.out_dir);
        fs::create_directories(out);
        io::write_text(out / "certificate.json", io::certificate_json(rep).dump(2) + "\n");
        io::write_text(out / "envelopes.csv", io::envelopes_csv(rep));
        io::write_text(out / "summary.txt", summary);
    } catch (const std::exception& e) {
        return report_config_error(e);
    }
    std::fputs(summary.c_str(), stdout);
    switch (rep.verdict) {
        case Verdict::FtsEvidence: return 0;
        case Verdict::Violated: return 3;
        case Verdict::Inconclusive: return 4;
    }
    return 4;
}

int cmd_lemma1(std::size_t count, std::uint64_t seed, const std::string& out_dir) {
    const auto suite = lemma1_random_suite(count, seed);
    nlohmann::json j;
    j["cases"] = suite.cases;
    j["min_slack"] = suite.min_slack;
    j["all_hold"] = suite.all_hold;
    if (count == 0) j["note"] = "vacuous: no cases requested";
    try {
        const fs::path out(out_dir);
        fs::create_directories(out);
        io::write_text(out / "lemma1_stats.json", j.dump(2) + "\n");
    } catch (const std::exception& e) {
        return report_config_error(e);
    }
    std::printf("%zu cases, min slack %.3g%s\n", suite.cases, suite.min_slack,
                count == 0 ? " (vacuous)" : "");
    return suite.all_hold ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid-system simulation and finite-time-stability certificates"};
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("list-examples", "show the built-in system registry");

    CommonArgs sim_args;
    std::string x0_text;
    auto* sim_cmd = app.add_subcommand("simulate", "run one trajectory and write plot data");
    add_common(sim_cmd, sim_args);
    sim_cmd->add_option("--x0", x0_text, "initial state, comma-separated")->required();

    CommonArgs sweep_args;
    std::string sweep_radii;
    int sweep_angles = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "batch-simulate radii x directions");
    add_common(sweep_cmd, sweep_args);
    sweep_cmd->add_option("--radii", sweep_radii, "initial-condition radii, comma-separated");
    sweep_cmd->add_option("--angles", sweep_angles, "directions per radius");

    CommonArgs cert_args;
    std::string cert_radii;
    int cert_angles = 0;
    bool theorem3 = false;
    auto* cert_cmd = app.add_subcommand("certify", "sweep and emit the certificate verdict");
    add_common(cert_cmd, cert_args);
    cert_cmd->add_option("--radii", cert_radii, "initial-condition radii (need >= 3 distinct)");
    cert_cmd->add_option("--angles", cert_angles, "directions per radius");
    cert_cmd->add_flag("--theorem3", theorem3, "use the all-modes-FTS certificate");

    std::size_t lemma_count = 1000;
    std::uint64_t lemma_seed = 42;
    std::string lemma_out = "out";
    auto* lemma_cmd = app.add_subcommand("lemma1", "randomized power-sum inequality suite");
    lemma_cmd->add_option("--count", lemma_count, "number of random cases")->capture_default_str();
    lemma_cmd->add_option("--seed", lemma_seed, "RNG seed")->capture_default_str();
    lemma_cmd->add_option("--out", lemma_out, "output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (list_cmd->parsed()) return cmd_list_examples();
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, x0_text);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_radii, sweep_angles);
    if (cert_cmd->parsed()) return cmd_certify(cert_args, cert_radii, cert_angles, theorem3);
    if (lemma_cmd->parsed()) return cmd_lemma1(lemma_count, lemma_seed, lemma_out);
    return 1;
}
