#pragma once

// Generalized Lyapunov functions V_i: quadratic forms x'Px, signed-power sums
// sum_k c_k |x_{v_k}|^{p_k}, or arbitrary parsed expressions. Evaluation of V,
// its gradient, and V-dot along a flow, plus the per-mode flow-decrease check
// and (c, beta) estimation for the FTS mode.

#include "hyfts/expr.hpp"
#include "hyfts/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace hyfts {

/// x'Px with P stored row-major and symmetrized as (P + P')/2 on construction;
/// the quadratic form is unchanged by symmetrization.
struct QuadraticForm {
    int n = 0;
    std::vector<double> p;  // row-major n*n, symmetric

    QuadraticForm() = default;
    QuadraticForm(int dim, std::vector<double> entries) : n(dim), p(std::move(entries)) {
        if (static_cast<int>(p.size()) != n * n)
            throw std::invalid_argument("QuadraticForm: matrix must be n*n");
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double s = 0.5 * (p[idx(i, j)] + p[idx(j, i)]);
                p[idx(i, j)] = s;
                p[idx(j, i)] = s;
            }
    }
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(j);
    }
};

/// One term c * |x_v|^p of a separable signed-power Lyapunov function.
struct PowerTerm {
    double coeff = 0.0;
    int var = 0;  // 0-based state index
    double power = 2.0;
};

struct PowerSum {
    std::vector<PowerTerm> terms;
};

/// Expression-backed V with a numeric-gradient step.
struct ExpressionV {
    expr::Expr e;
    double grad_step = 1e-6;
};

using LyapunovFunction = std::variant<QuadraticForm, PowerSum, ExpressionV>;

struct LyapunovSet {
    std::vector<LyapunovFunction> functions;  // one per flow mode
    std::optional<double> c;                  // Eq.-(8) constants for the FTS mode,
    std::optional<double> beta;               // estimated when absent
};

inline double eval_V(const LyapunovFunction& f, std::span<const double> x) {
    return std::visit([&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, QuadraticForm>) {
            double acc = 0.0;
            for (int i = 0; i < v.n; ++i) {
                double row = 0.0;
                for (int j = 0; j < v.n; ++j) row += v.p[v.idx(i, j)] * x[static_cast<std::size_t>(j)];
                acc += x[static_cast<std::size_t>(i)] * row;
            }
            return acc;
        } else if constexpr (std::is_same_v<T, PowerSum>) {
            double acc = 0.0;
            for (const auto& t : v.terms)
                acc += t.coeff * std::pow(std::fabs(x[static_cast<std::size_t>(t.var)]), t.power);
            return acc;
        } else {
            return v.e.eval_unchecked(x);
        }
    }, f);
}

inline double eval_V(const LyapunovSet& set, int mode, std::span<const double> x) {
    if (mode < 0 || mode >= static_cast<int>(set.functions.size()))
        throw std::out_of_range("eval_V: mode index out of range");
    return eval_V(set.functions[static_cast<std::size_t>(mode)], x);
}

inline void gradient(const LyapunovFunction& f, std::span<const double> x, std::span<double> out) {
    std::visit([&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, QuadraticForm>) {
            for (int i = 0; i < v.n; ++i) {
                double row = 0.0;
                for (int j = 0; j < v.n; ++j) row += v.p[v.idx(i, j)] * x[static_cast<std::size_t>(j)];
                out[static_cast<std::size_t>(i)] = 2.0 * row;  // grad = 2Px for symmetric P
            }
        } else if constexpr (std::is_same_v<T, PowerSum>) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.0;
            for (const auto& t : v.terms) {
                const double xv = x[static_cast<std::size_t>(t.var)];
                // d/dx c|x|^p = c p sign(x) |x|^(p-1); 0 at x = 0 (Dini convention)
                double g = 0.0;
                if (xv != 0.0)
                    g = t.coeff * t.power * ((xv > 0.0) ? 1.0 : -1.0) *
                        std::pow(std::fabs(xv), t.power - 1.0);
                out[static_cast<std::size_t>(t.var)] += g;
            }
        } else {
            const auto g = v.e.grad_numeric(x, v.grad_step);
            for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
        }
    }, f);
}

/// dV/dt along the flow: grad V(x) . f(x). Analytic for quadratic and
/// power-sum forms, central differences otherwise.
inline double vdot_along(const LyapunovSet& set, int mode, const FlowFn& flow,
                         std::span<const double> x) {
    if (mode < 0 || mode >= static_cast<int>(set.functions.size()))
        throw std::out_of_range("vdot_along: mode index out of range");
    const std::size_t n = x.size();
    Vec g(n, 0.0), fx(n, 0.0);
    gradient(set.functions[static_cast<std::size_t>(mode)], x, g);
    flow(x, fx);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += g[i] * fx[i];
    if (!std::isfinite(acc)) throw std::runtime_error("vdot_along: non-finite gradient");
    return acc;
}

/// Positive-definiteness spot checks for each V_i: V(0) = 0 and V > 0 on a
/// deterministic sample grid. Violations are data.
inline std::vector<std::string> validate_lyapunov(const LyapunovSet& set, int dimension,
                                                  int grid_per_axis = 5) {
    std::vector<std::string> violations;
    const Vec zero(static_cast<std::size_t>(dimension), 0.0);
    for (std::size_t i = 0; i < set.functions.size(); ++i) {
        const double v0 = eval_V(set.functions[i], zero);
        if (!(std::fabs(v0) <= 1e-12))
            violations.push_back("V" + std::to_string(i + 1) + "(0) = " + std::to_string(v0) +
                                 " != 0");
        // deterministic low-discrepancy-ish grid on [-1, 1]^n scaled by radius
        Vec x(static_cast<std::size_t>(dimension), 0.0);
        std::uint64_t state = 0x9e3779b97f4a7c15ull + i;
        auto next01 = [&state]() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            return static_cast<double>(state % 100000ull) / 100000.0;
        };
        const int samples = grid_per_axis * grid_per_axis * dimension;
        for (int s = 0; s < samples; ++s) {
            double nrm = 0.0;
            for (auto& xi : x) { xi = 2.0 * next01() - 1.0; nrm += xi * xi; }
            if (nrm < 1e-8) continue;
            const double scale = (s % 3 == 0) ? 1e-3 : ((s % 3 == 1) ? 1.0 : 10.0);
            for (auto& xi : x) xi *= scale;
            if (!(eval_V(set.functions[i], x) > 0.0)) {
                violations.push_back("V" + std::to_string(i + 1) +
                                     " is not positive at a sampled state");
                break;
            }
        }
    }
    return violations;
}

// --- flow-decrease condition (Eq. 8 / Eq. 2) -------------------------------

struct FlowDecreaseReport {
    bool pass = false;
    bool no_data = false;       // vacuous: no mode-F samples above origin_tol
    double worst_residual = 0.0;  // max of vdot + c V^beta over samples
    double worst_time = 0.0;
    Vec worst_state;
    std::size_t samples_checked = 0;
};

namespace detail {

/// (V, vdot, t) series over a mode's flow samples, excluding jump instants and
/// the origin ball. The raw material for both the decrease check and the
/// (c, beta) fit.
struct FtsSample {
    double v, vdot, t;
};

inline std::vector<FtsSample> collect_mode_samples(const HybridTrajectory& traj,
                                                   const LyapunovSet& set, int mode,
                                                   const FlowFn& flow, double origin_tol) {
    std::vector<FtsSample> out;
    for (std::size_t si = 0; si < traj.segments.size(); ++si) {
        const auto& s = traj.segments[si];
        if (s.mode != mode) continue;
        // mark samples that sit at a jump instant (pre and post duplicates)
        std::vector<std::size_t> skip;
        for (const auto& je : traj.jump_events)
            if (je.segment == si) {
                skip.push_back(je.pre_sample);
                skip.push_back(je.pre_sample + 1);
            }
        for (std::size_t k = 0; k < s.sample_count(); ++k) {
            if (std::find(skip.begin(), skip.end(), k) != skip.end()) continue;
            const auto x = traj.state_at(s, k);
            if (norm2(x) <= origin_tol) continue;
            const double v = eval_V(set, mode, x);
            const double vd = vdot_along(set, mode, flow, x);
            out.push_back({v, vd, s.times[k]});
        }
    }
    return out;
}

}  // namespace detail

/// Checks vdot + c V^beta <= tol over all mode-F flow samples outside the
/// origin ball (Eq. 8; reduces to Theorem 1's Eq. 2 when there is one mode).
inline FlowDecreaseReport check_flow_decrease(const HybridTrajectory& traj,
                                              const LyapunovSet& set, int mode,
                                              const FlowFn& flow, double c, double beta,
                                              double tol = 1e-9, double origin_tol = 1e-9) {
    FlowDecreaseReport rep;
    const auto samples = detail::collect_mode_samples(traj, set, mode, flow, origin_tol);
    if (samples.empty()) {
        rep.pass = true;
        rep.no_data = true;
        return rep;
    }
    rep.worst_residual = -std::numeric_limits<double>::infinity();
    double worst_t = traj.t0;
    for (const auto& s : samples) {
        const double r = s.vdot + c * std::pow(std::max(s.v, 0.0), beta);
        if (r > rep.worst_residual) {
            rep.worst_residual = r;
            worst_t = s.t;
        }
    }
    rep.samples_checked = samples.size();
    rep.worst_time = worst_t;
    rep.pass = rep.worst_residual <= tol;
    // recover the arg-max state for the report
    for (const auto& seg : traj.segments) {
        if (seg.mode != mode) continue;
        for (std::size_t k = 0; k < seg.sample_count(); ++k)
            if (seg.times[k] == worst_t) {
                const auto x = traj.state_at(seg, k);
                rep.worst_state.assign(x.begin(), x.end());
                break;
            }
    }
    return rep;
}

struct FtsEstimate {
    double c = 0.0;
    double beta = 0.0;
    std::vector<std::pair<double, double>> grid;  // (beta, inf c(beta)) diagnostics
};

inline std::vector<double> default_beta_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
    return g;
}

/// Fits Eq.-(8) constants from trajectory data: c(beta) = inf over samples of
/// -vdot / V^beta; picks the beta maximizing c(beta)*(1 - beta) among c > c_min.
inline std::optional<FtsEstimate> estimate_fts_constants(
    const HybridTrajectory& traj, const LyapunovSet& set, int mode, const FlowFn& flow,
    std::span<const double> beta_grid = {}, double origin_tol = 1e-9, double c_min = 1e-6) {
    const auto samples = detail::collect_mode_samples(traj, set, mode, flow, origin_tol);
    if (samples.empty()) return std::nullopt;

    std::vector<double> grid(beta_grid.begin(), beta_grid.end());
    if (grid.empty()) grid = default_beta_grid();

    FtsEstimate est;
    double best_score = -1.0;
    for (double beta : grid) {
        double inf_c = std::numeric_limits<double>::infinity();
        for (const auto& s : samples) {
            if (!(s.v > 0.0)) { inf_c = 0.0; break; }
            inf_c = std::min(inf_c, -s.vdot / std::pow(s.v, beta));
        }
        est.grid.emplace_back(beta, inf_c);
        if (inf_c > c_min && beta > 0.0 && beta < 1.0) {
            const double score = inf_c * (1.0 - beta);
            if (score > best_score) {
                best_score = score;
                est.c = inf_c;
                est.beta = beta;
            }
        }
    }
    if (best_score <= 0.0) return std::nullopt;
    return est;
}

}  // namespace hyfts
