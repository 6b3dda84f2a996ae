#pragma once

// Built-in reference systems: the five-mode hybrid benchmark (four non-FTS
// flows, one finite-time-stable flow, amplifying sign-flip jumps), the scalar
// signed-power FTS family with its closed-form settling oracle, and variants
// used to exercise the certificate paths.
//
// Entries are stored as expression-level documents so they round-trip through
// the on-disk system format byte-for-byte.

#include "hyfts/certificate.hpp"
#include "hyfts/expr.hpp"
#include "hyfts/integrate.hpp"
#include "hyfts/lyapunov.hpp"
#include "hyfts/model.hpp"

#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hyfts {

struct LyapunovDoc {
    enum class Kind { Quadratic, PowerSum, Expression };
    Kind kind = Kind::Quadratic;
    std::vector<std::vector<double>> matrix;  // Quadratic
    std::vector<PowerTerm> terms;             // PowerSum (var is 0-based here)
    std::string expression;                   // Expression
};

/// Plain-data description of a hybrid system; the unit of (de)serialization.
struct SystemDocument {
    std::string name;
    std::string description;
    int dimension = 0;
    std::vector<std::vector<std::string>> flows;  // per mode: n component expressions
    std::vector<std::vector<std::string>> jumps;
    std::optional<std::string> flow_guard;  // inside C iff expr >= 0
    std::optional<std::string> jump_guard;  // inside D iff expr >= 0
    std::vector<LyapunovDoc> lyapunov;
    std::optional<double> c, beta;  // Eq.-(8) constants, estimated when absent
    SwitchingPolicy policy;
    IntegrationConfig integration;
};

struct CompiledSystem {
    HybridSystemDef def;
    LyapunovSet lyapunov;
    IntegrationConfig integration;
};

namespace detail {

inline FlowFn compile_vector_field(const std::vector<std::string>& components, int dimension) {
    auto exprs = std::make_shared<std::vector<expr::Expr>>();
    exprs->reserve(components.size());
    for (const auto& src : components) exprs->push_back(expr::Expr::parse(src, dimension));
    return [exprs](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < exprs->size(); ++i) out[i] = (*exprs)[i].eval_unchecked(x);
    };
}

inline LevelFn compile_level(const std::string& src, int dimension) {
    auto e = std::make_shared<expr::Expr>(expr::Expr::parse(src, dimension));
    return [e](std::span<const double> x) { return e->eval_unchecked(x); };
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline CompiledSystem compile_system(const SystemDocument& doc) {
    CompiledSystem sys;
    sys.def.dimension = doc.dimension;
    for (const auto& f : doc.flows) {
        if (static_cast<int>(f.size()) != doc.dimension)
            throw std::invalid_argument("flow has wrong number of components");
        sys.def.flows.push_back(detail::compile_vector_field(f, doc.dimension));
    }
    for (const auto& g : doc.jumps) {
        if (static_cast<int>(g.size()) != doc.dimension)
            throw std::invalid_argument("jump map has wrong number of components");
        sys.def.jumps.push_back(detail::compile_vector_field(g, doc.dimension));
    }
    if (doc.flow_guard) sys.def.flow_guard = detail::compile_level(*doc.flow_guard, doc.dimension);
    if (doc.jump_guard) sys.def.jump_guard = detail::compile_level(*doc.jump_guard, doc.dimension);
    sys.def.policy = doc.policy;

    for (const auto& ld : doc.lyapunov) {
        switch (ld.kind) {
            case LyapunovDoc::Kind::Quadratic: {
                std::vector<double> flat;
                for (const auto& row : ld.matrix) {
                    if (static_cast<int>(row.size()) != doc.dimension)
                        throw std::invalid_argument("quadratic matrix must be n*n");
                    flat.insert(flat.end(), row.begin(), row.end());
                }
                sys.lyapunov.functions.emplace_back(QuadraticForm(doc.dimension, std::move(flat)));
                break;
            }
            case LyapunovDoc::Kind::PowerSum: {
                PowerSum ps;
                ps.terms = ld.terms;
                for (const auto& t : ps.terms)
                    if (t.var < 0 || t.var >= doc.dimension)
                        throw std::invalid_argument("power-sum term variable out of range");
                sys.lyapunov.functions.emplace_back(std::move(ps));
                break;
            }
            case LyapunovDoc::Kind::Expression:
                sys.lyapunov.functions.emplace_back(
                    ExpressionV{expr::Expr::parse(ld.expression, doc.dimension), 1e-6});
                break;
        }
    }
    sys.lyapunov.c = doc.c;
    sys.lyapunov.beta = doc.beta;
    sys.integration = doc.integration;
    return sys;
}

struct ExpectedProperties {
    bool finite_settling = false;   // over the default sweep and horizon
    bool theorem2_evidence = false;
    std::string notes;
};

struct ExampleEntry {
    SystemDocument doc;
    std::vector<std::string> aliases;
    SweepSpec default_sweep;
    ExpectedProperties expected;
    /// Closed-form settling time from x0, when one exists.
    std::function<double(std::span<const double>)> settling_oracle;
};

/// The five-mode benchmark: modes 1-4 are not FTS (1, 2, 4 unstable, 3 a
/// stable spiral), mode 5 is FTS; jumps flip signs and amplify by 1.1.
/// The FTS-mode exponent is 3/4 with k2 = 10, the unique pairing that makes
/// the cross terms of V5's derivative cancel (giving vdot5 = -200|x1|^{5/4});
/// those constants, the 0.2 s cycle, 0.1 s jumps, the sweep radii and the
/// 20 s horizon are registry defaults, overridable from the CLI.
inline ExampleEntry five_mode() {
    ExampleEntry ex;
    ex.doc.name = "five-mode";
    ex.doc.description =
        "planar hybrid benchmark: 5 flows (only #5 finite-time stable), sign-flip x1.1 jumps";
    ex.doc.dimension = 2;
    ex.doc.flows = {
        {"0.01*x1^2 + x2", "-0.01*x1^3 + x2"},
        {"0.01*x1 - x2", "-x1^2 + 0.01*x2"},
        {"-x1 - x2", "x1 - x2"},
        {"0.01*x1^2 + 0.01*x1*x2", "-0.01*x1^3 + x2^2"},
        {"x2 - 20*sign(x1)*abs(x1)^0.75", "-10*sign(x1)*abs(x1)^0.5"},
    };
    ex.doc.jumps = {{"-1.1*x1", "-1.1*x2"}};
    LyapunovDoc p1;
    p1.kind = LyapunovDoc::Kind::Quadratic;
    p1.matrix = {{1, 0}, {0, 1}};
    LyapunovDoc p2 = p1;
    p2.matrix = {{5, 2}, {2, 4}};
    LyapunovDoc p3 = p1;
    p3.matrix = {{1, 0}, {0, 3}};
    LyapunovDoc p4 = p1;
    p4.matrix = {{6, 1.5}, {1.5, 3}};  // symmetric part of the printed [[6,1],[2,3]]
    LyapunovDoc v5;
    v5.kind = LyapunovDoc::Kind::PowerSum;
    v5.terms = {{10.0 / 1.5, 0, 1.5}, {0.5, 1, 2.0}};
    ex.doc.lyapunov = {p1, p2, p3, p4, v5};
    ex.doc.policy.modes =
        PeriodicModes{{{0, 0.2}, {1, 0.2}, {2, 0.2}, {3, 0.2}, {4, 0.2}}};
    ex.doc.policy.jumps = PeriodicJumps{0.1, 0.1, 0};
    ex.doc.policy.t_d = 0.1;
    ex.doc.policy.fts_mode = 4;
    ex.doc.integration.dt = 1e-4;
    ex.doc.integration.t_end = 20.0;
    ex.aliases = {"paper"};
    ex.default_sweep.radii = {0.25, 0.5, 1.0, 2.0};
    ex.default_sweep.angles = 8;
    ex.expected.finite_settling = false;
    ex.expected.theorem2_evidence = false;
    ex.expected.notes =
        "locally FTS only: the x1.1 jumps at 10/s outgrow mode 5's contraction outside "
        "||x0|| of roughly 1e-3, so the default sweep radii diverge; shrink the radii "
        "(or the jump gain) to watch the certificate pass";
    return ex;
}

/// Scalar family xdot = -c sign(x)|x|^{2 beta - 1} with V = x^2; FTS with
/// settling time |x0|^{2(1-beta)} / (2 c (1-beta)).
inline ExampleEntry scalar_fts(double c = 2.0, double beta = 0.75) {
    if (!(c > 0.0)) throw std::invalid_argument("scalar_fts: c must be positive");
    if (!(beta > 0.5 && beta < 1.0))
        throw std::invalid_argument("scalar_fts: beta must lie in (1/2, 1)");
    ExampleEntry ex;
    const double e = 2.0 * beta - 1.0;
    ex.doc.name = "scalar-fts";
    ex.doc.description = "scalar signed-power flow with closed-form settling time";
    ex.doc.dimension = 1;
    ex.doc.flows = {{"-" + detail::fmt_double(c) + "*sign(x1)*abs(x1)^" +
                     detail::fmt_double(e)}};
    LyapunovDoc v;
    v.kind = LyapunovDoc::Kind::Quadratic;
    v.matrix = {{1.0}};
    ex.doc.lyapunov = {v};
    ex.doc.policy.modes = PeriodicModes{{{0, 1e6}}};
    ex.doc.policy.jumps = NoJumps{};
    ex.doc.policy.t_d = 0.1;
    ex.doc.policy.fts_mode = 0;
    ex.doc.integration.dt = 1e-4;
    ex.doc.integration.t_end = 10.0;
    ex.default_sweep.radii = {0.25, 0.5, 1.0, 2.0};
    ex.default_sweep.angles = 2;
    ex.expected.finite_settling = true;
    ex.expected.theorem2_evidence = true;
    ex.settling_oracle = [c, beta](std::span<const double> x0) {
        return std::pow(std::fabs(x0[0]), 2.0 * (1.0 - beta)) / (2.0 * c * (1.0 - beta));
    };
    return ex;
}

/// Five-mode flows scheduled without the FTS mode: cycles 1, 2, 4 only.
inline ExampleEntry unstable_only() {
    ExampleEntry ex = five_mode();
    ex.doc.name = "unstable-only";
    ex.doc.description = "five-mode benchmark scheduled without its FTS mode";
    ex.aliases.clear();
    ex.doc.policy.modes = PeriodicModes{{{0, 0.2}, {1, 0.2}, {3, 0.2}}};
    ex.doc.integration.t_end = 10.0;
    ex.default_sweep.radii = {0.25, 0.5, 1.0};
    ex.default_sweep.angles = 4;
    ex.expected.finite_settling = false;
    ex.expected.theorem2_evidence = false;
    ex.expected.notes = "FTS mode never activates; condition (vi) cannot be met";
    ex.settling_oracle = nullptr;
    return ex;
}

/// Two scalar FTS modes under seeded random switching; both share V = x^2.
/// Exercises the all-modes-FTS certificate.
inline ExampleEntry scalar_fts_pair() {
    ExampleEntry ex;
    ex.doc.name = "scalar-fts-pair";
    ex.doc.description = "two scalar FTS flows under random switching (all modes FTS)";
    ex.doc.dimension = 1;
    ex.doc.flows = {{"-1*sign(x1)*abs(x1)^0.5"}, {"-2*sign(x1)*abs(x1)^0.5"}};
    LyapunovDoc v;
    v.kind = LyapunovDoc::Kind::Quadratic;
    v.matrix = {{1.0}};
    ex.doc.lyapunov = {v, v};
    ex.doc.policy.modes = RandomModes{{0.15, 0.25}, 2024};
    ex.doc.policy.jumps = NoJumps{};
    ex.doc.policy.t_d = 0.05;
    ex.doc.policy.fts_mode = 1;
    ex.doc.integration.dt = 1e-4;
    ex.doc.integration.t_end = 10.0;
    ex.default_sweep.radii = {0.25, 0.5, 1.0};
    ex.default_sweep.angles = 2;
    ex.expected.finite_settling = true;
    ex.expected.theorem2_evidence = true;
    return ex;
}

inline const std::vector<ExampleEntry>& registry() {
    static const std::vector<ExampleEntry> entries = [] {
        std::vector<ExampleEntry> v;
        v.push_back(five_mode());
        v.push_back(scalar_fts());
        v.push_back(unstable_only());
        v.push_back(scalar_fts_pair());
        return v;
    }();
    return entries;
}

inline const ExampleEntry* find_example(const std::string& name) {
    for (const auto& ex : registry()) {
        if (ex.doc.name == name) return &ex;
        for (const auto& alias : ex.aliases)
            if (alias == name) return &ex;
    }
    return nullptr;
}

}  // namespace hyfts
