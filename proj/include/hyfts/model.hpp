#pragma once

// Hybrid system definition, switching policy, and the trajectory data model:
// ordered flow segments with dense samples, plus discrete jump events.
// Interval conventions are half-open [t_start, t_end); a jump landing exactly
// on a segment boundary belongs to the segment that starts there.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hyfts {

using Vec = std::vector<double>;
using FlowFn = std::function<void(std::span<const double>, std::span<double>)>;
using MapFn = std::function<void(std::span<const double>, std::span<double>)>;
/// Level-set membership: x is inside the set iff the returned value >= 0.
using LevelFn = std::function<double(std::span<const double>)>;

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// --- switching policy ---------------------------------------------------

struct ModeStep {
    int mode;         // 0-based flow index
    double duration;  // seconds, > 0
};

/// Fixed sequence of (mode, duration) pairs, repeated for the whole horizon.
struct PeriodicModes {
    std::vector<ModeStep> sequence;
};

/// Seeded random mode order; dwell time looked up per mode.
struct RandomModes {
    std::vector<double> dwell;  // one entry per flow mode
    std::uint64_t seed = 0;
};

using ModeSchedule = std::variant<PeriodicModes, RandomModes>;

struct NoJumps {};

/// Jump instants at offset + k*period, k = 0, 1, ...
struct PeriodicJumps {
    double period;
    double offset;
    int jump_index = 0;
};

/// Explicit (instant, jump index) list; must be strictly increasing.
struct ScheduledJumps {
    std::vector<std::pair<double, int>> times;
};

/// State-triggered: fires when the jump guard is entered (level < 0 -> >= 0).
struct GuardJumps {
    int jump_index = 0;
};

using JumpSchedule = std::variant<NoJumps, PeriodicJumps, ScheduledJumps, GuardJumps>;

struct SwitchingPolicy {
    ModeSchedule modes = PeriodicModes{};
    JumpSchedule jumps = NoJumps{};
    double t_d = 0.0;   // minimum jump-free dwell required of the FTS mode
    int fts_mode = 0;   // 0-based index F
};

// --- system definition ----------------------------------------------------

struct HybridSystemDef {
    int dimension = 0;
    std::vector<FlowFn> flows;
    std::vector<MapFn> jumps;
    LevelFn flow_guard;  // set C; empty means all of R^n
    LevelFn jump_guard;  // set D; empty means all of R^n
    SwitchingPolicy policy;
};

/// Assumption-1 and shape checks. Violations are data, not failures.
inline std::vector<std::string> validate_system(const HybridSystemDef& def,
                                                double equilibrium_tol = 1e-12) {
    std::vector<std::string> violations;
    if (def.dimension < 1) violations.push_back("state dimension must be >= 1");
    if (def.flows.empty()) violations.push_back("at least one flow is required");
    if (def.dimension < 1 || def.flows.empty()) return violations;

    const Vec zero(static_cast<std::size_t>(def.dimension), 0.0);
    Vec out(static_cast<std::size_t>(def.dimension), 0.0);
    for (std::size_t i = 0; i < def.flows.size(); ++i) {
        std::fill(out.begin(), out.end(), 0.0);
        def.flows[i](zero, out);
        const double r = norm2(out);
        if (!(r <= equilibrium_tol))
            violations.push_back("flow f" + std::to_string(i + 1) +
                                 " does not vanish at the origin: ||f(0)|| = " + std::to_string(r));
    }
    for (std::size_t j = 0; j < def.jumps.size(); ++j) {
        std::fill(out.begin(), out.end(), 0.0);
        def.jumps[j](zero, out);
        const double r = norm2(out);
        if (!(r <= equilibrium_tol))
            violations.push_back("jump g" + std::to_string(j + 1) +
                                 " does not vanish at the origin: ||g(0)|| = " + std::to_string(r));
    }

    auto check_modes = [&](const PeriodicModes& pm) {
        if (pm.sequence.empty()) {
            violations.push_back("mode schedule is empty");
            return;
        }
        for (const auto& st : pm.sequence) {
            if (st.mode < 0 || st.mode >= static_cast<int>(def.flows.size()))
                violations.push_back("mode schedule references flow " + std::to_string(st.mode + 1) +
                                     " outside 1.." + std::to_string(def.flows.size()));
            if (!(st.duration > 0.0))
                violations.push_back("mode dwell durations must be positive");
        }
    };
    auto check_random = [&](const RandomModes& rm) {
        if (rm.dwell.size() != def.flows.size())
            violations.push_back("random schedule needs one dwell entry per flow");
        for (double d : rm.dwell)
            if (!(d > 0.0)) violations.push_back("mode dwell durations must be positive");
    };
    std::visit([&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PeriodicModes>) check_modes(m);
        else check_random(m);
    }, def.policy.modes);

    std::visit([&](const auto& j) {
        using T = std::decay_t<decltype(j)>;
        if constexpr (std::is_same_v<T, PeriodicJumps>) {
            if (!(j.period > 0.0)) violations.push_back("jump period must be positive");
            if (j.jump_index < 0 || j.jump_index >= static_cast<int>(def.jumps.size()))
                violations.push_back("jump schedule references an unknown jump map");
        } else if constexpr (std::is_same_v<T, ScheduledJumps>) {
            for (std::size_t k = 0; k < j.times.size(); ++k) {
                if (k > 0 && !(j.times[k].first > j.times[k - 1].first)) {
                    violations.push_back("scheduled jump instants must be strictly increasing");
                    break;
                }
                if (j.times[k].second < 0 || j.times[k].second >= static_cast<int>(def.jumps.size())) {
                    violations.push_back("jump schedule references an unknown jump map");
                    break;
                }
            }
        } else if constexpr (std::is_same_v<T, GuardJumps>) {
            if (!def.jump_guard) violations.push_back("guard-triggered jumps need a jump guard");
            if (j.jump_index < 0 || j.jump_index >= static_cast<int>(def.jumps.size()))
                violations.push_back("jump schedule references an unknown jump map");
        }
    }, def.policy.jumps);

    if (!(def.policy.t_d > 0.0)) violations.push_back("t_d must be positive");
    if (def.policy.fts_mode < 0 || def.policy.fts_mode >= static_cast<int>(def.flows.size()))
        violations.push_back("fts_mode outside 1.." + std::to_string(def.flows.size()));
    return violations;
}

// --- trajectory -----------------------------------------------------------

enum class Truncation { Horizon, Converged, Diverged, LeftFlowSet };

inline const char* to_string(Truncation t) {
    switch (t) {
        case Truncation::Horizon: return "horizon";
        case Truncation::Converged: return "converged";
        case Truncation::Diverged: return "diverged";
        case Truncation::LeftFlowSet: return "left-flow-set";
    }
    return "?";
}

struct FlowSegment {
    int mode = 0;
    double t_start = 0.0, t_end = 0.0;
    std::vector<double> times;   // sample instants; duplicated at interior jumps
    std::vector<double> states;  // flattened, dimension() doubles per sample

    std::size_t sample_count() const { return times.size(); }
};

struct JumpEvent {
    double t = 0.0;
    int jump_index = 0;
    int active_mode = 0;  // mode of the segment the jump belongs to
    Vec x_before, x_after;
    std::size_t segment = 0;     // index into HybridTrajectory::segments
    std::size_t pre_sample = 0;  // sample index of x_before within that segment
};

struct HybridTrajectory {
    int dimension = 0;
    int num_modes = 0;
    double t0 = 0.0;
    Vec x0;
    std::vector<FlowSegment> segments;
    std::vector<JumpEvent> jump_events;
    Truncation truncation = Truncation::Horizon;
    double t_final = 0.0;  // realized end of the simulated domain

    std::span<const double> state_at(const FlowSegment& s, std::size_t i) const {
        return {s.states.data() + i * static_cast<std::size_t>(dimension),
                static_cast<std::size_t>(dimension)};
    }

    /// Value at a segment's start after all events processed there (skips
    /// duplicate samples created by a jump at the left endpoint).
    std::size_t first_sample_index(const FlowSegment& s) const {
        std::size_t i = 0;
        while (i + 1 < s.times.size() && s.times[i + 1] == s.times.front()) ++i;
        return i;
    }
    std::span<const double> first_state(const FlowSegment& s) const {
        return state_at(s, first_sample_index(s));
    }
    /// Left limit at the segment end (the final sample).
    std::span<const double> last_state(const FlowSegment& s) const {
        return state_at(s, s.times.size() - 1);
    }
};

// --- interval bookkeeping ---------------------------------------------------

struct ModeIntervals {
    std::vector<std::pair<double, double>> activations;  // T_{i_k}, in order
    std::vector<double> jump_times;                      // J_i within those intervals
    std::vector<std::pair<double, double>> bar_windows;  // largest jump-free sub-interval per T_{i_k}
};

namespace detail {

/// Longest sub-interval of [a, b) whose interior avoids `cuts`; earliest wins ties.
inline std::pair<double, double> longest_jump_free(double a, double b,
                                                   std::span<const double> cuts) {
    std::vector<double> pts;
    pts.push_back(a);
    for (double c : cuts)
        if (c > a && c < b) pts.push_back(c);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    std::pair<double, double> best{a, a};
    double best_len = -1.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double len = pts[i + 1] - pts[i];
        if (len > best_len + 1e-12) {
            best_len = len;
            best = {pts[i], pts[i + 1]};
        }
    }
    return best;
}

}  // namespace detail

/// T_{mode,k} activation intervals, the jump instants inside them, and the
/// largest jump-free sub-interval of each.
inline ModeIntervals segment_intervals(const HybridTrajectory& traj, int mode) {
    if (mode < 0 || (traj.num_modes > 0 && mode >= traj.num_modes))
        throw std::out_of_range("segment_intervals: mode index out of range");

    ModeIntervals out;
    for (std::size_t si = 0; si < traj.segments.size(); ++si) {
        const auto& s = traj.segments[si];
        if (s.mode != mode) continue;
        out.activations.emplace_back(s.t_start, s.t_end);
        std::vector<double> cuts;
        for (const auto& je : traj.jump_events) {
            if (je.segment != si) continue;
            out.jump_times.push_back(je.t);
            cuts.push_back(je.t);
        }
        out.bar_windows.push_back(detail::longest_jump_free(s.t_start, s.t_end, cuts));
    }
    return out;
}

/// Assumption 2: every completed bar window of the FTS mode has length >= t_d.
/// A trailing window cut short by truncation is an artifact of stopping and
/// is not counted against the schedule.
inline bool check_min_dwell(const HybridTrajectory& traj, int fts_mode, double t_d,
                            double tol = 1e-9) {
    const ModeIntervals mi = segment_intervals(traj, fts_mode);
    for (std::size_t k = 0; k < mi.bar_windows.size(); ++k) {
        const bool trailing =
            mi.activations[k].second >= traj.t_final - tol && traj.truncation != Truncation::Horizon;
        if (trailing) continue;
        const double len = mi.bar_windows[k].second - mi.bar_windows[k].first;
        if (len < t_d - tol) return false;
    }
    return true;
}

/// Average dwell-time jump counting: N[t1, t2] <= N0 + delta*(t2 - t1) for all
/// windows. Checked over all pairs of jump instants, which is sufficient since
/// the count is piecewise constant between events.
inline bool adt_count_check(const HybridTrajectory& traj, int n0, double delta) {
    if (n0 < 1) throw std::invalid_argument("adt_count_check: N0 must be >= 1");
    if (delta < 0.0) throw std::invalid_argument("adt_count_check: delta must be >= 0");
    std::vector<double> ts;
    ts.reserve(traj.jump_events.size());
    for (const auto& je : traj.jump_events) ts.push_back(je.t);
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i; j < ts.size(); ++j) {
            const double count = static_cast<double>(j - i + 1);
            if (count > static_cast<double>(n0) + delta * (ts[j] - ts[i]) + 1e-9) return false;
        }
    return true;
}

}  // namespace hyfts
