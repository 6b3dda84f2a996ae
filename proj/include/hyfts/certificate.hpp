#pragma once

// Certificate machinery for the multiple-generalized-Lyapunov-function FTS
// conditions: the four cumulative sums (switch, flow, jump, switched-off gap),
// class-GK envelope fits across initial-condition radii, the power-sum
// inequality oracle behind the gap-sum lemma, the comparison-lemma activation
// budget, and the aggregate verdicts.

#include "hyfts/integrate.hpp"
#include "hyfts/lyapunov.hpp"
#include "hyfts/model.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hyfts {

// --- running partial sums ---------------------------------------------------

struct PartialSumTrack {
    std::vector<double> partials;  // value after each added term

    void add(double term) {
        const double prev = partials.empty() ? 0.0 : partials.back();
        partials.push_back(prev + term);
    }
    double total() const { return partials.empty() ? 0.0 : partials.back(); }
    /// Worst running value over all p, clamped at 0 (an all-negative cumulative
    /// sum cannot violate a class-GK bound).
    double max_partial() const {
        double m = 0.0;
        for (double p : partials) m = std::max(m, p);
        return m;
    }
};

struct ConditionSums {
    PartialSumTrack switch_sum;                   // condition (i)
    PartialSumTrack flow_sum;                     // condition (ii), jump-free stretches
    std::vector<PartialSumTrack> jump_sums;       // condition (iii), per mode
    std::vector<PartialSumTrack> gap_sums_bar;    // condition (v) per mode, bar windows
    std::vector<PartialSumTrack> gap_sums_full;   // variant: full activation windows
    double v_initial = 0.0;                       // V_{i^0}(x(t0)) before any event
    double v_final = 0.0;                         // V of the last mode at the final sample
    double telescoping_residual = 0.0;            // relative

    double max_jump_sum() const {
        double m = 0.0;
        for (const auto& t : jump_sums) m = std::max(m, t.max_partial());
        return m;
    }
};

/// V value at the start of a jump-free window (after any event at that
/// instant) and at its end (the left limit).
struct BarWindowValue {
    double t_begin = 0.0, t_end = 0.0;
    double v_begin = 0.0, v_end = 0.0;
};

namespace detail {

inline std::span<const double> state_at_time(const HybridTrajectory& traj,
                                             const FlowSegment& s, double t, bool last_match) {
    std::size_t found = s.times.size();
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        if (s.times[k] == t) {
            found = k;
            if (!last_match) break;
        }
    }
    if (found == s.times.size()) {
        // tolerate tiny scheduling skew between event streams
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            const double d = std::fabs(s.times[k] - t);
            if (last_match ? d <= best : d < best) {
                best = d;
                found = k;
            }
        }
    }
    return traj.state_at(s, found);
}

}  // namespace detail

/// Jump-free windows of one mode with their boundary V values, in time order.
inline std::vector<BarWindowValue> bar_window_values(const HybridTrajectory& traj,
                                                     const LyapunovSet& set, int mode) {
    std::vector<BarWindowValue> out;
    const ModeIntervals mi = segment_intervals(traj, mode);
    std::size_t seg_cursor = 0;
    for (std::size_t k = 0; k < mi.bar_windows.size(); ++k) {
        const auto [w0, w1] = mi.bar_windows[k];
        // find the segment of this activation
        while (seg_cursor < traj.segments.size() &&
               (traj.segments[seg_cursor].mode != mode ||
                traj.segments[seg_cursor].t_start > w0 ||
                traj.segments[seg_cursor].t_end < w1))
            ++seg_cursor;
        if (seg_cursor >= traj.segments.size()) break;
        const auto& s = traj.segments[seg_cursor];
        BarWindowValue w;
        w.t_begin = w0;
        w.t_end = w1;
        w.v_begin = eval_V(set, mode, detail::state_at_time(traj, s, w0, /*last_match=*/true));
        w.v_end = eval_V(set, mode, detail::state_at_time(traj, s, w1, /*last_match=*/false));
        out.push_back(w);
        ++seg_cursor;
    }
    return out;
}

/// The cumulative sums of conditions (i), (ii), (iii) and (v), with running
/// partials, plus the telescoping consistency residual of the underlying
/// decomposition  V_end = V_start + switch-sum + flow-sum + jump-sum.
inline ConditionSums condition_sums(const HybridTrajectory& traj, const LyapunovSet& set,
                                    int fts_mode) {
    const int num_modes = traj.num_modes > 0 ? traj.num_modes
                                             : static_cast<int>(set.functions.size());
    for (const auto& s : traj.segments)
        if (s.mode >= static_cast<int>(set.functions.size()))
            throw std::invalid_argument("condition_sums: missing Lyapunov function for mode " +
                                        std::to_string(s.mode + 1));
    (void)fts_mode;

    ConditionSums cs;
    cs.jump_sums.resize(static_cast<std::size_t>(num_modes));
    if (traj.segments.empty()) return cs;

    // condition (i): switch instants, evaluated at the pre-jump left limit
    for (std::size_t k = 0; k + 1 < traj.segments.size(); ++k) {
        const auto xl = traj.last_state(traj.segments[k]);
        cs.switch_sum.add(eval_V(set, traj.segments[k + 1].mode, xl) -
                          eval_V(set, traj.segments[k].mode, xl));
    }

    // condition (ii): per-segment flow change over jump-free stretches
    for (std::size_t si = 0; si < traj.segments.size(); ++si) {
        const auto& s = traj.segments[si];
        std::vector<std::size_t> cuts;  // pre-sample index of interior jumps
        for (const auto& je : traj.jump_events)
            if (je.segment == si && je.pre_sample >= traj.first_sample_index(s))
                cuts.push_back(je.pre_sample);
        std::sort(cuts.begin(), cuts.end());
        double term = 0.0;
        std::size_t start = traj.first_sample_index(s);
        for (std::size_t cut : cuts) {
            term += eval_V(set, s.mode, traj.state_at(s, cut)) -
                    eval_V(set, s.mode, traj.state_at(s, start));
            start = cut + 1;  // resume after the post-jump duplicate
        }
        term += eval_V(set, s.mode, traj.state_at(s, s.sample_count() - 1)) -
                eval_V(set, s.mode, traj.state_at(s, start));
        cs.flow_sum.add(term);
    }

    // condition (iii): per-mode jump increments, in the V of the owning segment
    for (const auto& je : traj.jump_events)
        cs.jump_sums[static_cast<std::size_t>(je.active_mode)].add(
            eval_V(set, je.active_mode, je.x_after) - eval_V(set, je.active_mode, je.x_before));

    // condition (v): switched-off gap increments per mode
    cs.gap_sums_bar.resize(static_cast<std::size_t>(num_modes));
    cs.gap_sums_full.resize(static_cast<std::size_t>(num_modes));
    for (int m = 0; m < num_modes; ++m) {
        const auto windows = bar_window_values(traj, set, m);
        for (std::size_t k = 0; k + 1 < windows.size(); ++k)
            cs.gap_sums_bar[static_cast<std::size_t>(m)].add(
                std::fabs(windows[k + 1].v_begin - windows[k].v_end));
        // variant: full activation windows
        std::vector<std::pair<double, double>> acts;  // (V at start, V at end)
        for (std::size_t si = 0; si < traj.segments.size(); ++si) {
            const auto& s = traj.segments[si];
            if (s.mode != m) continue;
            acts.emplace_back(eval_V(set, m, traj.first_state(s)),
                              eval_V(set, m, traj.last_state(s)));
        }
        for (std::size_t k = 0; k + 1 < acts.size(); ++k)
            cs.gap_sums_full[static_cast<std::size_t>(m)].add(
                std::fabs(acts[k + 1].first - acts[k].second));
    }

    // telescoping identity across the whole event sequence
    const auto& s0 = traj.segments.front();
    const auto& sl = traj.segments.back();
    cs.v_initial = eval_V(set, s0.mode, traj.state_at(s0, 0));  // before any t0 event
    cs.v_final = eval_V(set, sl.mode, traj.last_state(sl));
    double jump_total = 0.0;
    for (const auto& t : cs.jump_sums) jump_total += t.total();
    const double recomposed =
        cs.v_initial + cs.switch_sum.total() + cs.flow_sum.total() + jump_total;
    const double scale = std::max({1.0, std::fabs(cs.v_final), std::fabs(cs.v_initial)});
    cs.telescoping_residual = std::fabs(cs.v_final - recomposed) / scale;
    return cs;
}

// --- class-GK envelope ------------------------------------------------------

struct GKEnvelope {
    std::vector<double> radii;     // distinct, ascending
    std::vector<double> values;    // worst sample per radius, clamped >= 0
    std::vector<double> envelope;  // non-decreasing majorant (running max)
    double origin_value = 0.0;     // envelope at the smallest radius
    double threshold = 0.0;        // pass iff origin_value <= threshold
    bool pass = false;
};

/// Isotonic non-decreasing majorant of (radius, value) samples. The GK test
/// asks that the envelope vanish toward the origin: origin_value must not
/// exceed rel_tol * envelope(max radius) + abs_tol.
inline GKEnvelope fit_gk_envelope(const std::vector<std::pair<double, double>>& samples,
                                  double rel_tol = 1e-2, double abs_tol = 1e-9) {
    std::map<double, double> worst;
    for (const auto& [r, v] : samples) {
        auto [it, inserted] = worst.emplace(r, v);
        if (!inserted) it->second = std::max(it->second, v);
    }
    if (worst.size() < 3)
        throw std::invalid_argument("fit_gk_envelope: need at least 3 distinct radii");
    GKEnvelope env;
    double run = 0.0;
    for (const auto& [r, v] : worst) {
        env.radii.push_back(r);
        const double cl = std::max(v, 0.0);
        env.values.push_back(cl);
        run = std::max(run, cl);
        env.envelope.push_back(run);
    }
    env.origin_value = env.envelope.front();
    env.threshold = rel_tol * env.envelope.back() + abs_tol;
    env.pass = env.origin_value <= env.threshold;
    return env;
}

// --- power-sum inequality oracle ---------------------------------------------

/// Slack report for the inequality chain used by the gap-sum lemma:
///   (sum z)^r <= sum z^r <= M^{1-r} (sum z)^r          on z = |a - b|,
///   a^r - b^r <= (a - b)^r                              for a >= b >= 0,
///   sum_k (a_k^r - b_k^r) <= m^{1-r} (sum_{I1} |a_k - b_k|)^r <= m^{1-r} bound^r,
/// where I1 = {k : a_k >= b_k} and m = |I1|. All slacks should be >= 0 (up to
/// roundoff) whenever sum_{I1} |a_k - b_k| <= bound.
struct Lemma1Report {
    double seq_lower_slack = 0.0;   // sum z^r - (sum z)^r
    double seq_upper_slack = 0.0;   // M^{1-r} (sum z)^r - sum z^r
    double pair_slack = 0.0;        // min over I1 of (a-b)^r - (a^r - b^r)
    double chain_slack_1 = 0.0;     // sum_{I1}(a-b)^r - sum_k(a_k^r - b_k^r)
    double chain_slack_2 = 0.0;     // m^{1-r}(sum_{I1}|a-b|)^r - sum_{I1}(a-b)^r
    double chain_slack_3 = 0.0;     // m^{1-r} bound^r - m^{1-r}(sum_{I1}|a-b|)^r
    bool hypothesis_ok = true;      // sum_{I1}|a-b| <= bound
    double min_slack = 0.0;
    bool all_hold = false;
};

inline Lemma1Report lemma1_oracle(std::span<const double> a, std::span<const double> b,
                                  double r, double bound) {
    if (a.size() != b.size())
        throw std::invalid_argument("lemma1_oracle: sequences must have equal length");
    if (!(r > 0.0) || r > 1.0)
        throw std::invalid_argument("lemma1_oracle: need r in (0, 1]");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] < 0.0 || b[i] < 0.0)
            throw std::invalid_argument("lemma1_oracle: sequences must be non-negative");

    Lemma1Report rep;
    const std::size_t M = a.size();

    double sum_z = 0.0, sum_zr = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double z = std::fabs(a[i] - b[i]);
        sum_z += z;
        sum_zr += std::pow(z, r);
    }
    const double pow_sum_z = std::pow(sum_z, r);
    rep.seq_lower_slack = sum_zr - pow_sum_z;
    rep.seq_upper_slack =
        (M == 0 ? 0.0 : std::pow(static_cast<double>(M), 1.0 - r) * pow_sum_z - sum_zr);

    double sum_diff_pow = 0.0;   // sum over I1 of (a-b)^r
    double sum_abs_i1 = 0.0;     // sum over I1 of |a-b|
    double sum_pow_diff = 0.0;   // sum over all k of a^r - b^r
    std::size_t m = 0;
    rep.pair_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M; ++i) {
        const double ar = std::pow(a[i], r), br = std::pow(b[i], r);
        sum_pow_diff += ar - br;
        if (a[i] >= b[i]) {
            ++m;
            const double d = std::pow(a[i] - b[i], r);
            sum_diff_pow += d;
            sum_abs_i1 += a[i] - b[i];
            rep.pair_slack = std::min(rep.pair_slack, d - (ar - br));
        }
    }
    if (m == 0) rep.pair_slack = 0.0;
    const double m_pow = m == 0 ? 0.0 : std::pow(static_cast<double>(m), 1.0 - r);
    rep.chain_slack_1 = sum_diff_pow - sum_pow_diff;
    rep.chain_slack_2 = m_pow * std::pow(sum_abs_i1, r) - sum_diff_pow;
    rep.hypothesis_ok = sum_abs_i1 <= bound * (1.0 + 1e-12) + 1e-300;
    rep.chain_slack_3 = m_pow * std::pow(bound, r) - m_pow * std::pow(sum_abs_i1, r);

    rep.min_slack = std::min({rep.seq_lower_slack, rep.seq_upper_slack, rep.pair_slack,
                              rep.chain_slack_1, rep.chain_slack_2,
                              rep.hypothesis_ok ? rep.chain_slack_3 : 0.0});
    rep.all_hold = rep.min_slack >= -1e-12;
    return rep;
}

struct Lemma1Suite {
    std::size_t cases = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    bool all_hold = true;
};

/// Seeded randomized pass over the inequality chain: lengths 1..50, values in
/// [0, 10], r in {0.1, ..., 0.9}, with occasional near-equal adversarial pairs.
inline Lemma1Suite lemma1_random_suite(std::size_t count, std::uint64_t seed) {
    Lemma1Suite suite;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(1, 50);
    std::uniform_real_distribution<double> val(0.0, 10.0);
    std::uniform_int_distribution<int> ri(1, 9);
    std::uniform_real_distribution<double> tiny(-1e-9, 1e-9);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t n = len(rng);
        std::vector<double> a(n), b(n);
        const bool adversarial = i % 5 == 0;
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = val(rng);
            b[k] = adversarial ? std::max(0.0, a[k] + tiny(rng)) : val(rng);
        }
        const double r = 0.1 * ri(rng);
        double bound = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (a[k] >= b[k]) bound += a[k] - b[k];
        if (i % 3 == 0) bound *= 1.5;  // slack hypothesis sometimes
        const auto rep = lemma1_oracle(a, b, r, bound);
        suite.min_slack = std::min(suite.min_slack, rep.min_slack);
        suite.all_hold = suite.all_hold && rep.all_hold;
        ++suite.cases;
    }
    if (count == 0) suite.min_slack = 0.0;
    return suite;
}

// --- activation budget --------------------------------------------------------

struct BudgetReport {
    bool no_windows = false;
    double budget = std::numeric_limits<double>::quiet_NaN();   // seconds of mode-F flow
    double achieved = 0.0;                                      // sum of bar-window lengths
    double predicted_vf_end = std::numeric_limits<double>::quiet_NaN();
    std::vector<BarWindowValue> windows;
};

/// The proof's constructive budget evaluated on observed data:
///   budget = barV_1^{1-beta}/(c(1-beta))
///            + sum_k max(0, barV_{k+1}^{1-beta} - barV_{k,end}^{1-beta})/(c(1-beta)).
/// predicted_vf_end chains the per-window comparison bound
///   V_end^{1-beta} >= V_begin^{1-beta} - c(1-beta)|window|  (floored at 0)
/// from each observed window start.
inline BudgetReport activation_budget(const HybridTrajectory& traj, const LyapunovSet& set,
                                      int fts_mode, double c, double beta) {
    if (!(c > 0.0)) throw std::invalid_argument("activation_budget: c must be positive");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("activation_budget: beta must lie in (0, 1)");
    BudgetReport rep;
    rep.windows = bar_window_values(traj, set, fts_mode);
    if (rep.windows.empty()) {
        rep.no_windows = true;
        return rep;
    }
    const double q = 1.0 - beta;
    const double denom = c * q;
    double budget = std::pow(std::max(rep.windows.front().v_begin, 0.0), q) / denom;
    for (std::size_t k = 0; k + 1 < rep.windows.size(); ++k) {
        const double inc = std::pow(std::max(rep.windows[k + 1].v_begin, 0.0), q) -
                           std::pow(std::max(rep.windows[k].v_end, 0.0), q);
        if (inc > 0.0) budget += inc / denom;
    }
    rep.budget = budget;
    for (const auto& w : rep.windows) {
        rep.achieved += w.t_end - w.t_begin;
        const double pred_q =
            std::max(0.0, std::pow(std::max(w.v_begin, 0.0), q) - denom * (w.t_end - w.t_begin));
        rep.predicted_vf_end = std::pow(pred_q, 1.0 / q);
    }
    return rep;
}

// --- sweep + verdicts -----------------------------------------------------------

enum class Verdict { FtsEvidence, Inconclusive, Violated };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::FtsEvidence: return "FTS-evidence";
        case Verdict::Inconclusive: return "inconclusive";
        case Verdict::Violated: return "violated";
    }
    return "?";
}

struct CertifyOptions {
    double settle_tol = 1e-4;    // finite-settling norm threshold
    double flow_tol = 1e-9;      // condition-(iv) residual tolerance
    double gk_rel_tol = 1e-2;    // envelope origin threshold, relative to max
    double gk_abs_tol = 1e-9;
    double c_min = 1e-6;         // smallest usable Eq.-(8) constant
    bool use_adt = false;        // Remark-2 jump accounting instead of min dwell
    int adt_n0 = 1;
    double adt_delta = 0.0;
    bool parallel = true;
};

struct SweepSpec {
    std::vector<double> radii;
    int angles = 8;              // directions per radius (n = 2: equispaced)
    std::uint64_t seed = 1;      // direction seed for n != 2
};

struct TrajectoryEvidence {
    double radius = 0.0;
    Vec x0;
    Truncation truncation = Truncation::Horizon;
    std::optional<double> settling;
    bool dwell_ok = true;
    ConditionSums sums;
    std::vector<detail::FtsSample> fts_series;               // mode F, for (c,beta) work
    std::vector<BarWindowValue> windows;                     // mode F bar windows
    std::vector<std::vector<std::pair<double, double>>> mode_grid_inf;  // per mode: (beta, inf c)
    std::vector<bool> mode_has_data;
};

namespace detail {

inline std::vector<std::pair<double, double>> grid_infima(
    const std::vector<FtsSample>& series, std::span<const double> grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(grid.size());
    for (double beta : grid) {
        double inf_c = std::numeric_limits<double>::infinity();
        for (const auto& s : series) {
            if (!(s.v > 0.0)) { inf_c = 0.0; break; }
            inf_c = std::min(inf_c, -s.vdot / std::pow(s.v, beta));
        }
        out.emplace_back(beta, series.empty() ? 0.0 : inf_c);
    }
    return out;
}

inline std::vector<Vec> sweep_points(const SweepSpec& spec, int dimension) {
    std::vector<Vec> pts;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double r : spec.radii) {
        for (int a = 0; a < spec.angles; ++a) {
            Vec x(static_cast<std::size_t>(dimension), 0.0);
            if (dimension == 1) {
                if (spec.angles == 1) x[0] = r;
                else x[0] = (a % 2 == 0) ? r : -r;
            } else if (dimension == 2) {
                const double th = 2.0 * M_PI * static_cast<double>(a) /
                                  static_cast<double>(spec.angles);
                x[0] = r * std::cos(th);
                x[1] = r * std::sin(th);
            } else {
                double nrm = 0.0;
                for (auto& xi : x) { xi = gauss(rng); nrm += xi * xi; }
                nrm = std::sqrt(nrm);
                for (auto& xi : x) xi = r * xi / nrm;
            }
            pts.push_back(std::move(x));
        }
    }
    return pts;
}

}  // namespace detail

/// Simulate one initial condition and extract all certificate evidence.
inline TrajectoryEvidence evaluate_trajectory(const HybridSystemDef& def,
                                              const LyapunovSet& set,
                                              const IntegrationConfig& cfg,
                                              std::span<const double> x0,
                                              const CertifyOptions& opt) {
    TrajectoryEvidence ev;
    ev.x0.assign(x0.begin(), x0.end());
    ev.radius = norm2(x0);
    const auto traj = simulate(def, x0, cfg);
    ev.truncation = traj.truncation;
    ev.settling = settling_time(traj, opt.settle_tol);
    ev.dwell_ok = opt.use_adt ? adt_count_check(traj, opt.adt_n0, opt.adt_delta)
                              : check_min_dwell(traj, def.policy.fts_mode, def.policy.t_d);
    ev.sums = condition_sums(traj, set, def.policy.fts_mode);
    const int F = def.policy.fts_mode;
    ev.fts_series = detail::collect_mode_samples(traj, set, F,
                                                 def.flows[static_cast<std::size_t>(F)],
                                                 cfg.origin_tol);
    ev.windows = bar_window_values(traj, set, F);
    const auto grid = default_beta_grid();
    ev.mode_grid_inf.resize(def.flows.size());
    ev.mode_has_data.resize(def.flows.size());
    for (std::size_t m = 0; m < def.flows.size(); ++m) {
        const auto series =
            m == static_cast<std::size_t>(F)
                ? ev.fts_series
                : detail::collect_mode_samples(traj, set, static_cast<int>(m), def.flows[m],
                                               cfg.origin_tol);
        ev.mode_has_data[m] = !series.empty();
        ev.mode_grid_inf[m] = detail::grid_infima(series, grid);
    }
    return ev;
}

/// Batch sweep over initial conditions; results ordered by (radius, direction)
/// slot regardless of scheduling.
inline std::vector<TrajectoryEvidence> run_sweep(const HybridSystemDef& def,
                                                 const LyapunovSet& set,
                                                 const IntegrationConfig& cfg,
                                                 const SweepSpec& spec,
                                                 const CertifyOptions& opt = {}) {
    const auto points = detail::sweep_points(spec, def.dimension);
    std::vector<TrajectoryEvidence> out(points.size());
    if (opt.parallel && points.size() > 1) {
        std::vector<std::future<TrajectoryEvidence>> futs;
        futs.reserve(points.size());
        for (const auto& p : points)
            futs.push_back(std::async(std::launch::async, [&, p] {
                return evaluate_trajectory(def, set, cfg, p, opt);
            }));
        for (std::size_t i = 0; i < futs.size(); ++i) out[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < points.size(); ++i)
            out[i] = evaluate_trajectory(def, set, cfg, points[i], opt);
    }
    return out;
}

struct ConditionBlock {
    std::string name;
    bool pass = false;
    bool vacuous = false;
    double worst_residual = 0.0;
    std::optional<GKEnvelope> envelope;
    std::string note;
};

struct TrajectoryRow {
    double radius = 0.0;
    Vec x0;
    std::string truncation;
    std::optional<double> settling;
    bool dwell_ok = true;
    bool vi_pass = false;
    double budget = std::numeric_limits<double>::quiet_NaN();
    double achieved = 0.0;
    double predicted_vf_end = std::numeric_limits<double>::quiet_NaN();
};

struct CertificateReport {
    Verdict verdict = Verdict::Inconclusive;
    std::optional<double> c, beta;
    std::vector<ConditionBlock> conditions;
    std::vector<TrajectoryRow> per_trajectory;
    std::vector<std::string> notes;
};

namespace detail {

/// Merge per-trajectory grid infima by taking the minimum per beta, then pick
/// the usable (c, beta) maximizing c*(1-beta).
inline std::optional<FtsEstimate> merge_estimates(
    const std::vector<TrajectoryEvidence>& evidence,
    std::size_t mode, double c_min) {
    std::vector<std::pair<double, double>> merged;
    bool any = false;
    for (const auto& ev : evidence) {
        if (mode >= ev.mode_grid_inf.size() || !ev.mode_has_data[mode]) continue;
        const auto& g = ev.mode_grid_inf[mode];
        if (!any) {
            merged = g;
            any = true;
        } else {
            for (std::size_t i = 0; i < merged.size(); ++i)
                merged[i].second = std::min(merged[i].second, g[i].second);
        }
    }
    if (!any) return std::nullopt;
    FtsEstimate est;
    est.grid = merged;
    double best = -1.0;
    for (const auto& [beta, c] : merged) {
        if (c > c_min && beta > 0.0 && beta < 1.0) {
            const double score = c * (1.0 - beta);
            if (score > best) {
                best = score;
                est.c = c;
                est.beta = beta;
            }
        }
    }
    if (best <= 0.0) return std::nullopt;
    return est;
}

inline std::size_t distinct_positive_radii(const std::vector<TrajectoryEvidence>& evidence,
                                           double origin_tol) {
    std::vector<double> rs;
    for (const auto& ev : evidence)
        if (ev.radius > origin_tol) rs.push_back(ev.radius);
    std::sort(rs.begin(), rs.end());
    rs.erase(std::unique(rs.begin(), rs.end(),
                         [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
             rs.end());
    return rs.size();
}

}  // namespace detail

/// Aggregates sweep evidence into the Theorem-2 verdict: envelope checks for
/// the cumulative sums, the flow-decrease condition with fitted or supplied
/// (c, beta), the minimum-dwell assumption, the activation budget, and
/// finite settling. "FTS-evidence" requires every check to pass; hard
/// pointwise violations yield "violated", horizon-limited shortfalls
/// "inconclusive".
inline CertificateReport theorem2_verdict(const std::vector<TrajectoryEvidence>& evidence,
                                          const LyapunovSet& set, double t_d,
                                          const CertifyOptions& opt = {}) {
    if (evidence.empty()) throw std::invalid_argument("theorem2_verdict: empty sweep");
    CertificateReport rep;
    rep.notes.push_back((opt.use_adt ? std::string("jump accounting: ADT")
                                     : "minimum dwell t_d = " + std::to_string(t_d)));

    const std::size_t n_radii = detail::distinct_positive_radii(evidence, 1e-12);
    if (n_radii == 0) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("degenerate sweep: every initial condition is at the origin");
        return rep;
    }
    if (n_radii < 3)
        throw std::invalid_argument("theorem2_verdict: need at least 3 distinct radii");

    bool hard_violation = false;
    bool soft_gap = false;

    auto envelope_block = [&](const std::string& name,
                              auto&& value_of) {
        std::vector<std::pair<double, double>> samples;
        for (const auto& ev : evidence) samples.emplace_back(ev.radius, value_of(ev));
        ConditionBlock blk;
        blk.name = name;
        blk.envelope = fit_gk_envelope(samples, opt.gk_rel_tol, opt.gk_abs_tol);
        blk.pass = blk.envelope->pass;
        blk.worst_residual = blk.envelope->origin_value - blk.envelope->threshold;
        if (!blk.pass) hard_violation = true;
        rep.conditions.push_back(std::move(blk));
    };

    envelope_block("switch-sum (i)",
                   [](const TrajectoryEvidence& ev) { return ev.sums.switch_sum.max_partial(); });
    envelope_block("flow-sum (ii)",
                   [](const TrajectoryEvidence& ev) { return ev.sums.flow_sum.max_partial(); });
    envelope_block("jump-sum (iii)",
                   [](const TrajectoryEvidence& ev) { return ev.sums.max_jump_sum(); });

    // condition (iv): flow decrease of the FTS mode (its series is stored
    // per evidence; estimation merges the per-trajectory grid infima)
    std::optional<double> c = set.c, beta = set.beta;
    std::optional<FtsEstimate> est;
    {
        // series-based estimate for the FTS mode (stored per evidence)
        std::vector<std::pair<double, double>> merged;
        const auto grid = default_beta_grid();
        bool any = false;
        for (const auto& ev : evidence) {
            if (ev.fts_series.empty()) continue;
            const auto g = detail::grid_infima(ev.fts_series, grid);
            if (!any) { merged = g; any = true; }
            else
                for (std::size_t i = 0; i < merged.size(); ++i)
                    merged[i].second = std::min(merged[i].second, g[i].second);
        }
        if (any) {
            FtsEstimate e;
            e.grid = merged;
            double best = -1.0;
            for (const auto& [bb, cc] : merged)
                if (cc > opt.c_min) {
                    const double score = cc * (1.0 - bb);
                    if (score > best) { best = score; e.c = cc; e.beta = bb; }
                }
            if (best > 0.0) est = e;
        }
    }
    if (!c || !beta) {
        if (est) { c = est->c; beta = est->beta; }
    }
    rep.c = c;
    rep.beta = beta;

    {
        ConditionBlock blk;
        blk.name = "flow-decrease (iv)";
        bool any_data = false;
        double worst = -std::numeric_limits<double>::infinity();
        if (c && beta) {
            for (const auto& ev : evidence)
                for (const auto& s : ev.fts_series) {
                    any_data = true;
                    worst = std::max(worst, s.vdot + *c * std::pow(std::max(s.v, 0.0), *beta));
                }
            blk.worst_residual = any_data ? worst : 0.0;
            blk.pass = !any_data || worst <= opt.flow_tol;
            blk.vacuous = !any_data;
            if (!any_data) blk.note = "no data: FTS mode never active";
            if (!blk.pass) hard_violation = true;
            if (blk.vacuous) soft_gap = true;
        } else {
            bool no_data = true;
            for (const auto& ev : evidence) no_data = no_data && ev.fts_series.empty();
            blk.pass = false;
            if (no_data) {
                blk.vacuous = true;
                blk.note = "no data: FTS mode never active";
                soft_gap = true;
            } else {
                blk.note = "no usable (c, beta): V_F fails to decrease at some sample";
                hard_violation = true;
            }
        }
        rep.conditions.push_back(std::move(blk));
    }

    envelope_block("gap-sum (v)", [](const TrajectoryEvidence& ev) {
        double m = 0.0;
        for (const auto& t : ev.sums.gap_sums_bar) m = std::max(m, t.max_partial());
        return m;
    });
    envelope_block("gap-sum-full-windows (v variant)", [](const TrajectoryEvidence& ev) {
        double m = 0.0;
        for (const auto& t : ev.sums.gap_sums_full) m = std::max(m, t.max_partial());
        return m;
    });

    // Assumption 2 / ADT, condition (vi), and settling per trajectory
    ConditionBlock dwell_blk, vi_blk, settle_blk;
    dwell_blk.name = opt.use_adt ? "jump-count (ADT)" : "min-dwell (Assumption 2)";
    dwell_blk.pass = true;
    vi_blk.name = "activation-budget (vi)";
    vi_blk.pass = true;
    settle_blk.name = "finite-settling";
    settle_blk.pass = true;
    for (const auto& ev : evidence) {
        TrajectoryRow row;
        row.radius = ev.radius;
        row.x0 = ev.x0;
        row.truncation = to_string(ev.truncation);
        row.settling = ev.settling;
        row.dwell_ok = ev.dwell_ok;
        if (!ev.dwell_ok) {
            dwell_blk.pass = false;
            hard_violation = true;
        }
        if (c && beta && !ev.windows.empty()) {
            const double q = 1.0 - *beta;
            const double denom = *c * q;
            double budget = std::pow(std::max(ev.windows.front().v_begin, 0.0), q) / denom;
            for (std::size_t k = 0; k + 1 < ev.windows.size(); ++k) {
                const double inc = std::pow(std::max(ev.windows[k + 1].v_begin, 0.0), q) -
                                   std::pow(std::max(ev.windows[k].v_end, 0.0), q);
                if (inc > 0.0) budget += inc / denom;
            }
            row.budget = budget;
            for (const auto& w : ev.windows) row.achieved += w.t_end - w.t_begin;
            const auto& wl = ev.windows.back();
            row.predicted_vf_end = std::pow(
                std::max(0.0, std::pow(std::max(wl.v_begin, 0.0), q) -
                                  denom * (wl.t_end - wl.t_begin)),
                1.0 / q);
            row.vi_pass = ev.truncation == Truncation::Converged ||
                          row.achieved >= budget * (1.0 - 1e-9);
        } else {
            row.vi_pass = ev.truncation == Truncation::Converged;
        }
        if (!row.vi_pass) {
            vi_blk.pass = false;
            soft_gap = true;
        }
        if (!ev.settling) {
            settle_blk.pass = false;
            // running out of horizon is inconclusive; hitting the divergence
            // cutoff is positive evidence against FTS from that start
            if (ev.truncation == Truncation::Diverged) {
                hard_violation = true;
                char buf[96];
                std::snprintf(buf, sizeof buf,
                              "diverged to the norm cutoff from radius %.4g", ev.radius);
                if (settle_blk.note.empty()) settle_blk.note = buf;
            } else {
                soft_gap = true;
            }
        }
        rep.per_trajectory.push_back(std::move(row));
    }
    rep.conditions.push_back(std::move(dwell_blk));
    rep.conditions.push_back(std::move(vi_blk));
    rep.conditions.push_back(std::move(settle_blk));

    if (hard_violation) rep.verdict = Verdict::Violated;
    else if (soft_gap) rep.verdict = Verdict::Inconclusive;
    else rep.verdict = Verdict::FtsEvidence;
    rep.notes.push_back("numerical evidence over a finite sweep; not a proof");
    return rep;
}

/// All-modes-FTS variant: conditions (i), (iii), the per-mode gap sums, and a
/// flow-decrease certificate for every mode.
inline CertificateReport theorem3_verdict(const std::vector<TrajectoryEvidence>& evidence,
                                          std::size_t num_modes,
                                          const CertifyOptions& opt = {}) {
    if (evidence.empty()) throw std::invalid_argument("theorem3_verdict: empty sweep");
    CertificateReport rep;
    const std::size_t n_radii = detail::distinct_positive_radii(evidence, 1e-12);
    if (n_radii == 0) {
        rep.verdict = Verdict::Inconclusive;
        rep.notes.push_back("degenerate sweep: every initial condition is at the origin");
        return rep;
    }
    if (n_radii < 3)
        throw std::invalid_argument("theorem3_verdict: need at least 3 distinct radii");

    bool hard_violation = false, soft_gap = false;
    auto envelope_block = [&](const std::string& name, auto&& value_of) {
        std::vector<std::pair<double, double>> samples;
        for (const auto& ev : evidence) samples.emplace_back(ev.radius, value_of(ev));
        ConditionBlock blk;
        blk.name = name;
        blk.envelope = fit_gk_envelope(samples, opt.gk_rel_tol, opt.gk_abs_tol);
        blk.pass = blk.envelope->pass;
        blk.worst_residual = blk.envelope->origin_value - blk.envelope->threshold;
        if (!blk.pass) hard_violation = true;
        rep.conditions.push_back(std::move(blk));
    };
    envelope_block("switch-sum (i)",
                   [](const TrajectoryEvidence& ev) { return ev.sums.switch_sum.max_partial(); });
    envelope_block("jump-sum (iii)",
                   [](const TrajectoryEvidence& ev) { return ev.sums.max_jump_sum(); });
    envelope_block("gap-sum (v analog, all modes)", [](const TrajectoryEvidence& ev) {
        double m = 0.0;
        for (const auto& t : ev.sums.gap_sums_bar) m = std::max(m, t.max_partial());
        return m;
    });

    for (std::size_t m = 0; m < num_modes; ++m) {
        ConditionBlock blk;
        blk.name = "flow-decrease mode " + std::to_string(m + 1);
        const auto est = detail::merge_estimates(evidence, m, opt.c_min);
        bool has_data = false;
        for (const auto& ev : evidence)
            if (m < ev.mode_has_data.size() && ev.mode_has_data[m]) has_data = true;
        if (!has_data) {
            blk.pass = false;
            blk.vacuous = true;
            blk.note = "no data: mode never active";
            soft_gap = true;
        } else if (est) {
            blk.pass = true;
            blk.note = "c = " + std::to_string(est->c) + ", beta = " + std::to_string(est->beta);
        } else {
            blk.pass = false;
            blk.note = "V fails to decrease at some sample";
            hard_violation = true;
        }
        rep.conditions.push_back(std::move(blk));
    }

    if (hard_violation) rep.verdict = Verdict::Violated;
    else if (soft_gap) rep.verdict = Verdict::Inconclusive;
    else rep.verdict = Verdict::FtsEvidence;
    rep.notes.push_back("numerical evidence over a finite sweep; not a proof");
    return rep;
}

}  // namespace hyfts
