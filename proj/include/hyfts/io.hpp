#pragma once

// On-disk formats: the JSON system-definition document, trajectory CSV with an
// event column, run manifests, plot-data CSVs, and certificate reports.
// External files use 1-based mode / variable / jump indices; everything
// in-memory is 0-based. Doubles are written with 17 significant digits so
// save/load round-trips are exact.

#include "hyfts/certificate.hpp"
#include "hyfts/systems.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hyfts::io {

using nlohmann::json;

// --- system document ---------------------------------------------------------

inline json to_json(const SystemDocument& doc) {
    json j;
    j["name"] = doc.name;
    if (!doc.description.empty()) j["description"] = doc.description;
    j["dimension"] = doc.dimension;
    j["flows"] = doc.flows;
    j["jumps"] = doc.jumps;
    if (doc.flow_guard) j["flow_guard"] = *doc.flow_guard;
    if (doc.jump_guard) j["jump_guard"] = *doc.jump_guard;

    j["lyapunov"] = json::array();
    for (const auto& ld : doc.lyapunov) {
        json e;
        switch (ld.kind) {
            case LyapunovDoc::Kind::Quadratic:
                e["type"] = "quadratic";
                e["matrix"] = ld.matrix;
                break;
            case LyapunovDoc::Kind::PowerSum: {
                e["type"] = "power_sum";
                e["terms"] = json::array();
                for (const auto& t : ld.terms)
                    e["terms"].push_back(
                        {{"coeff", t.coeff}, {"var", t.var + 1}, {"power", t.power}});
                break;
            }
            case LyapunovDoc::Kind::Expression:
                e["type"] = "expression";
                e["expr"] = ld.expression;
                break;
        }
        j["lyapunov"].push_back(std::move(e));
    }

    json fts;
    fts["mode"] = doc.policy.fts_mode + 1;
    if (doc.c) fts["c"] = *doc.c;
    if (doc.beta) fts["beta"] = *doc.beta;
    j["fts"] = std::move(fts);

    json pol;
    if (const auto* pm = std::get_if<PeriodicModes>(&doc.policy.modes)) {
        json seq = json::array();
        for (const auto& st : pm->sequence) seq.push_back({st.mode + 1, st.duration});
        pol["mode_schedule"] = {{"type", "periodic"}, {"sequence", std::move(seq)}};
    } else {
        const auto& rm = std::get<RandomModes>(doc.policy.modes);
        pol["mode_schedule"] = {{"type", "random"}, {"dwell", rm.dwell}, {"seed", rm.seed}};
    }
    if (std::holds_alternative<NoJumps>(doc.policy.jumps)) {
        pol["jump_schedule"] = {{"type", "none"}};
    } else if (const auto* pj = std::get_if<PeriodicJumps>(&doc.policy.jumps)) {
        pol["jump_schedule"] = {{"type", "periodic"},
                                {"period", pj->period},
                                {"offset", pj->offset},
                                {"jump", pj->jump_index + 1}};
    } else if (const auto* sj = std::get_if<ScheduledJumps>(&doc.policy.jumps)) {
        json times = json::array();
        for (const auto& [t, idx] : sj->times) times.push_back({t, idx + 1});
        pol["jump_schedule"] = {{"type", "times"}, {"times", std::move(times)}};
    } else {
        pol["jump_schedule"] = {{"type", "guard"},
                                {"jump", std::get<GuardJumps>(doc.policy.jumps).jump_index + 1}};
    }
    pol["t_d"] = doc.policy.t_d;
    j["policy"] = std::move(pol);

    j["integration"] = {{"dt", doc.integration.dt},
                        {"t_end", doc.integration.t_end},
                        {"guard_tol", doc.integration.guard_tol},
                        {"origin_tol", doc.integration.origin_tol},
                        {"max_norm", doc.integration.max_norm}};
    return j;
}

inline SystemDocument document_from_json(const json& j) {
    SystemDocument doc;
    doc.name = j.value("name", "");
    doc.description = j.value("description", "");
    doc.dimension = j.at("dimension").get<int>();
    doc.flows = j.at("flows").get<std::vector<std::vector<std::string>>>();
    if (j.contains("jumps")) doc.jumps = j.at("jumps").get<std::vector<std::vector<std::string>>>();
    if (j.contains("flow_guard")) doc.flow_guard = j.at("flow_guard").get<std::string>();
    if (j.contains("jump_guard")) doc.jump_guard = j.at("jump_guard").get<std::string>();

    if (j.contains("lyapunov")) {
        for (const auto& e : j.at("lyapunov")) {
            LyapunovDoc ld;
            const std::string type = e.at("type").get<std::string>();
            if (type == "quadratic") {
                ld.kind = LyapunovDoc::Kind::Quadratic;
                ld.matrix = e.at("matrix").get<std::vector<std::vector<double>>>();
            } else if (type == "power_sum") {
                ld.kind = LyapunovDoc::Kind::PowerSum;
                for (const auto& t : e.at("terms"))
                    ld.terms.push_back({t.at("coeff").get<double>(),
                                        t.at("var").get<int>() - 1,
                                        t.at("power").get<double>()});
            } else if (type == "expression") {
                ld.kind = LyapunovDoc::Kind::Expression;
                ld.expression = e.at("expr").get<std::string>();
            } else {
                throw std::invalid_argument("unknown lyapunov type: " + type);
            }
            doc.lyapunov.push_back(std::move(ld));
        }
    }

    if (j.contains("fts")) {
        const auto& f = j.at("fts");
        doc.policy.fts_mode = f.value("mode", 1) - 1;
        if (f.contains("c") && !f.at("c").is_null()) doc.c = f.at("c").get<double>();
        if (f.contains("beta") && !f.at("beta").is_null()) doc.beta = f.at("beta").get<double>();
    }

    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        if (p.contains("mode_schedule")) {
            const auto& ms = p.at("mode_schedule");
            const std::string type = ms.value("type", "periodic");
            if (type == "periodic") {
                PeriodicModes pm;
                for (const auto& st : ms.at("sequence"))
                    pm.sequence.push_back({st.at(0).get<int>() - 1, st.at(1).get<double>()});
                doc.policy.modes = std::move(pm);
            } else if (type == "random") {
                RandomModes rm;
                rm.dwell = ms.at("dwell").get<std::vector<double>>();
                rm.seed = ms.value("seed", std::uint64_t{0});
                doc.policy.modes = std::move(rm);
            } else {
                throw std::invalid_argument("unknown mode_schedule type: " + type);
            }
        }
        if (p.contains("jump_schedule")) {
            const auto& js = p.at("jump_schedule");
            const std::string type = js.value("type", "none");
            if (type == "none") {
                doc.policy.jumps = NoJumps{};
            } else if (type == "periodic") {
                doc.policy.jumps = PeriodicJumps{js.at("period").get<double>(),
                                                 js.at("offset").get<double>(),
                                                 js.value("jump", 1) - 1};
            } else if (type == "times") {
                ScheduledJumps sj;
                for (const auto& t : js.at("times"))
                    sj.times.emplace_back(t.at(0).get<double>(), t.at(1).get<int>() - 1);
                doc.policy.jumps = std::move(sj);
            } else if (type == "guard") {
                doc.policy.jumps = GuardJumps{js.value("jump", 1) - 1};
            } else {
                throw std::invalid_argument("unknown jump_schedule type: " + type);
            }
        }
        doc.policy.t_d = p.value("t_d", 0.1);
    }

    if (j.contains("integration")) {
        const auto& i = j.at("integration");
        doc.integration.dt = i.value("dt", 1e-4);
        doc.integration.t_end = i.value("t_end", 20.0);
        doc.integration.guard_tol = i.value("guard_tol", 1e-9);
        doc.integration.origin_tol = i.value("origin_tol", 1e-9);
        doc.integration.max_norm = i.value("max_norm", 1e9);
    }
    return doc;
}

inline void save_system(const SystemDocument& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(doc).dump(2) << "\n";
}

inline SystemDocument load_system(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    json j;
    in >> j;
    return document_from_json(j);
}

inline bool documents_equal(const SystemDocument& a, const SystemDocument& b) {
    return to_json(a) == to_json(b);
}

// --- trajectory CSV ------------------------------------------------------------

namespace detail {

inline void fmt(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace detail

/// Schema: t,mode,x1..xn,event,jump — mode and jump indices are 1-based,
/// event is none|switch|jump (post-jump rows repeat the instant), jump is 0
/// when no jump applies.
inline std::string trajectory_csv(const HybridTrajectory& traj) {
    std::string out = "t,mode";
    for (int i = 1; i <= traj.dimension; ++i) out += ",x" + std::to_string(i);
    out += ",event,jump\n";
    for (std::size_t si = 0; si < traj.segments.size(); ++si) {
        const auto& s = traj.segments[si];
        for (std::size_t k = 0; k < s.sample_count(); ++k) {
            const char* event = "none";
            int jump_no = 0;
            for (const auto& je : traj.jump_events)
                if (je.segment == si && je.pre_sample + 1 == k) {
                    event = "jump";
                    jump_no = je.jump_index + 1;
                }
            if (k == 0 && si > 0 && std::string(event) == "none") event = "switch";
            detail::fmt(out, s.times[k]);
            out += "," + std::to_string(s.mode + 1);
            const auto x = traj.state_at(s, k);
            for (double xi : x) {
                out += ",";
                detail::fmt(out, xi);
            }
            out += ",";
            out += event;
            out += "," + std::to_string(jump_no);
            out += "\n";
        }
    }
    return out;
}

struct TrajectoryCsvRow {
    double t;
    int mode;
    std::vector<double> x;
    std::string event;
    int jump;
};

/// Minimal reader for the schema above (used by the round-trip self-test).
inline std::vector<TrajectoryCsvRow> parse_trajectory_csv(const std::string& text) {
    std::vector<TrajectoryCsvRow> rows;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) return rows;  // header
    const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrajectoryCsvRow row;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != cols) throw std::runtime_error("malformed trajectory CSV row");
        row.t = std::stod(fields[0]);
        row.mode = std::stoi(fields[1]);
        for (std::size_t i = 2; i + 2 < fields.size(); ++i) row.x.push_back(std::stod(fields[i]));
        row.event = fields[fields.size() - 2];
        row.jump = std::stoi(fields.back());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline json manifest_json(const HybridTrajectory& traj, std::optional<double> settling) {
    json j;
    j["dimension"] = traj.dimension;
    j["t0"] = traj.t0;
    j["t_final"] = traj.t_final;
    j["truncation"] = to_string(traj.truncation);
    j["segments"] = traj.segments.size();
    j["jumps"] = traj.jump_events.size();
    std::size_t samples = 0;
    for (const auto& s : traj.segments) samples += s.sample_count();
    j["samples"] = samples;
    if (settling) j["settling_time"] = *settling;
    else j["settling_time"] = nullptr;
    return j;
}

// --- plot data -------------------------------------------------------------------

/// sigma_f(t) as a step signal: one row at each segment boundary.
inline std::string switching_signal_csv(const HybridTrajectory& traj) {
    std::string out = "t,mode\n";
    for (const auto& s : traj.segments) {
        detail::fmt(out, s.t_start);
        out += "," + std::to_string(s.mode + 1) + "\n";
        detail::fmt(out, s.t_end);
        out += "," + std::to_string(s.mode + 1) + "\n";
    }
    return out;
}

namespace detail {

template <typename RowFn>
inline std::string sampled_csv(const HybridTrajectory& traj, const std::string& header,
                               std::size_t max_rows, RowFn&& row_of) {
    std::size_t total = 0;
    for (const auto& s : traj.segments) total += s.sample_count();
    const std::size_t stride = std::max<std::size_t>(1, total / std::max<std::size_t>(1, max_rows));
    std::string out = header + "\n";
    std::size_t idx = 0;
    for (std::size_t si = 0; si < traj.segments.size(); ++si) {
        const auto& s = traj.segments[si];
        for (std::size_t k = 0; k < s.sample_count(); ++k, ++idx) {
            const bool boundary = k == 0 || k + 1 == s.sample_count();
            bool at_jump = false;
            for (const auto& je : traj.jump_events)
                if (je.segment == si && (je.pre_sample == k || je.pre_sample + 1 == k))
                    at_jump = true;
            if (!boundary && !at_jump && idx % stride != 0) continue;
            row_of(out, s, k);
        }
    }
    return out;
}

}  // namespace detail

inline std::string states_csv(const HybridTrajectory& traj, std::size_t max_rows = 4000) {
    std::string header = "t";
    for (int i = 1; i <= traj.dimension; ++i) header += ",x" + std::to_string(i);
    return detail::sampled_csv(traj, header, max_rows,
                               [&traj](std::string& out, const FlowSegment& s, std::size_t k) {
                                   detail::fmt(out, s.times[k]);
                                   for (double xi : traj.state_at(s, k)) {
                                       out += ",";
                                       detail::fmt(out, xi);
                                   }
                                   out += "\n";
                               });
}

inline std::string norm_log10_csv(const HybridTrajectory& traj, std::size_t max_rows = 4000) {
    return detail::sampled_csv(traj, "t,log10_norm", max_rows,
                               [&traj](std::string& out, const FlowSegment& s, std::size_t k) {
                                   const double n = norm2(traj.state_at(s, k));
                                   detail::fmt(out, s.times[k]);
                                   out += ",";
                                   detail::fmt(out, std::log10(std::max(n, 1e-300)));
                                   out += "\n";
                               });
}

inline std::string lyapunov_csv(const HybridTrajectory& traj, const LyapunovSet& set,
                                std::size_t max_rows = 4000) {
    std::string header = "t";
    for (std::size_t i = 1; i <= set.functions.size(); ++i) header += ",V" + std::to_string(i);
    return detail::sampled_csv(
        traj, header, max_rows,
        [&traj, &set](std::string& out, const FlowSegment& s, std::size_t k) {
            detail::fmt(out, s.times[k]);
            const auto x = traj.state_at(s, k);
            for (std::size_t i = 0; i < set.functions.size(); ++i) {
                out += ",";
                detail::fmt(out, eval_V(set, static_cast<int>(i), x));
            }
            out += "\n";
        });
}

// --- certificate report -------------------------------------------------------------

inline json certificate_json(const CertificateReport& rep) {
    json j;
    j["verdict"] = to_string(rep.verdict);
    if (rep.c) j["c"] = *rep.c;
    if (rep.beta) j["beta"] = *rep.beta;
    j["conditions"] = json::array();
    for (const auto& blk : rep.conditions) {
        json b;
        b["name"] = blk.name;
        b["pass"] = blk.pass;
        if (blk.vacuous) b["vacuous"] = true;
        b["worst_residual"] = blk.worst_residual;
        if (!blk.note.empty()) b["note"] = blk.note;
        if (blk.envelope) {
            b["envelope"] = {{"radii", blk.envelope->radii},
                             {"values", blk.envelope->values},
                             {"envelope", blk.envelope->envelope},
                             {"origin_value", blk.envelope->origin_value},
                             {"threshold", blk.envelope->threshold}};
        }
        j["conditions"].push_back(std::move(b));
    }
    j["per_trajectory"] = json::array();
    for (const auto& row : rep.per_trajectory) {
        json r;
        r["radius"] = row.radius;
        r["x0"] = row.x0;
        r["truncation"] = row.truncation;
        if (row.settling) r["settling_time"] = *row.settling;
        else r["settling_time"] = nullptr;
        r["dwell_ok"] = row.dwell_ok;
        r["budget_met"] = row.vi_pass;
        if (std::isfinite(row.budget)) r["budget"] = row.budget;
        r["achieved"] = row.achieved;
        if (std::isfinite(row.predicted_vf_end)) r["predicted_vf_end"] = row.predicted_vf_end;
        j["per_trajectory"].push_back(std::move(r));
    }
    j["notes"] = rep.notes;
    return j;
}

/// Envelope tables flattened for plotting: condition,radius,value,envelope.
inline std::string envelopes_csv(const CertificateReport& rep) {
    std::string out = "condition,radius,value,envelope\n";
    for (const auto& blk : rep.conditions) {
        if (!blk.envelope) continue;
        for (std::size_t i = 0; i < blk.envelope->radii.size(); ++i) {
            out += blk.name + ",";
            detail::fmt(out, blk.envelope->radii[i]);
            out += ",";
            detail::fmt(out, blk.envelope->values[i]);
            out += ",";
            detail::fmt(out, blk.envelope->envelope[i]);
            out += "\n";
        }
    }
    return out;
}

inline std::string summary_text(const CertificateReport& rep) {
    std::string out;
    for (const auto& blk : rep.conditions) {
        out += blk.pass ? "[PASS] " : (blk.vacuous ? "[----] " : "[FAIL] ");
        out += blk.name;
        if (blk.envelope) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "  origin %.3g vs threshold %.3g",
                          blk.envelope->origin_value, blk.envelope->threshold);
            out += buf;
        } else if (blk.name.find("flow-decrease") != std::string::npos) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "  worst residual %.3g", blk.worst_residual);
            out += buf;
        }
        if (!blk.note.empty()) out += "  (" + blk.note + ")";
        out += "\n";
    }
    if (rep.c && rep.beta) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "constants: c = %.6g, beta = %.2f\n", *rep.c, *rep.beta);
        out += buf;
    }
    out += "verdict: ";
    out += to_string(rep.verdict);
    out += "\n";
    return out;
}

}  // namespace hyfts::io
