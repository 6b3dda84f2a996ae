#pragma once

// Event-driven simulation of the hybrid system: classical RK4 on a fixed output
// grid (h <= dt) with exact landing on scheduled switch/jump instants, bisection
// localization of state-triggered guard crossings, and stop-at-origin handling.
//
// Signed-power right-hand sides are non-Lipschitz at the origin and fixed-step
// RK4 develops spurious fixed points there (the stages cancel while the true
// flow keeps contracting). Two internal sub-step rules repair this without
// touching the output grid:
//   R1  a step whose update is inconsistent with the vector field
//       (||x_next - x|| < 0.25 h ||f(x)||) is re-tried at h/2;
//   R2  inside the ball ||x|| <= 1e3 * origin_tol, a descent flow (x.f < 0)
//       must not grow the norm, otherwise the step is re-tried at h/2.
// Arrival at ||x|| <= origin_tol is then bisected to its earliest sub-instant.

#include "hyfts/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyfts {

struct IntegrationConfig {
    double dt = 1e-4;
    double t_end = 20.0;
    double guard_tol = 1e-9;   // bisection window for guard crossings (seconds)
    double origin_tol = 1e-9;  // ||x|| at which the run is declared converged
    double max_norm = 1e9;     // divergence cutoff

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("IntegrationConfig: dt must be positive");
        if (!(guard_tol > 0.0) || guard_tol > dt)
            throw std::invalid_argument("IntegrationConfig: need 0 < guard_tol <= dt");
        if (!(origin_tol > 0.0)) throw std::invalid_argument("IntegrationConfig: origin_tol must be positive");
        if (!(max_norm > 0.0)) throw std::invalid_argument("IntegrationConfig: max_norm must be positive");
    }
};

struct SimulationError : std::runtime_error {
    SimulationError(const std::string& msg, double t, int mode)
        : std::runtime_error(msg + " at t = " + std::to_string(t) + " in mode " +
                             std::to_string(mode + 1)),
          time(t), mode(mode) {}
    double time;
    int mode;
};

namespace detail {

class Rk4 {
public:
    Rk4(const FlowFn* f, std::size_t n) : f_(f), k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

    void set_flow(const FlowFn* f) { f_ = f; }

    /// One step x -> out over h; also exposes k1 = f(x) for consistency checks.
    void step(std::span<const double> x, double h, std::span<double> out) {
        const std::size_t n = x.size();
        (*f_)(x, k1_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
        (*f_)(tmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
        (*f_)(tmp_, k3_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
        (*f_)(tmp_, k4_);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = x[i] + (h / 6.0) * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

    std::span<const double> k1() const { return k1_; }

private:
    const FlowFn* f_;
    Vec k1_, k2_, k3_, k4_, tmp_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline bool finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace detail

/// Bisects the earliest crossing of `inside` (level >= 0) along one RK4 step of
/// `flow` from (t_lo, x_lo). Precondition: the membership differs at the two
/// ends of [t_lo, t_hi] and t_hi - t_lo <= dt.
inline double locate_guard_crossing(const FlowFn& flow, const LevelFn& level, double t_lo,
                                    double t_hi, std::span<const double> x_lo,
                                    double guard_tol) {
    if (!(t_hi > t_lo)) throw std::invalid_argument("locate_guard_crossing: empty bracket");
    const std::size_t n = x_lo.size();
    detail::Rk4 rk(&flow, n);
    Vec probe(n);
    const bool lo_inside = level(x_lo) >= 0.0;
    rk.step(x_lo, t_hi - t_lo, probe);
    if ((level(probe) >= 0.0) == lo_inside)
        throw std::logic_error("locate_guard_crossing: no sign change across the bracket");
    double lo = 0.0, hi = t_hi - t_lo;
    while (hi - lo > guard_tol) {
        const double mid = 0.5 * (lo + hi);
        rk.step(x_lo, mid, probe);
        if ((level(probe) >= 0.0) == lo_inside) lo = mid;
        else hi = mid;
    }
    return t_lo + hi;  // earliest instant already past the crossing
}

namespace detail {

// Scheduled event streams derived from the switching policy.

class ModeSequence {
public:
    ModeSequence(const ModeSchedule& sched, std::size_t num_modes, double t0)
        : t_next_(t0) {
        if (const auto* pm = std::get_if<PeriodicModes>(&sched)) {
            periodic_ = pm->sequence;
            if (periodic_.empty()) throw std::invalid_argument("mode schedule is empty");
        } else {
            const auto& rm = std::get<RandomModes>(sched);
            dwell_ = rm.dwell;
            if (dwell_.size() != num_modes)
                throw std::invalid_argument("random schedule needs one dwell per mode");
            rng_.seed(rm.seed);
            random_ = true;
            num_modes_ = num_modes;
        }
        advance();
    }

    int current_mode() const { return mode_; }
    double current_end() const { return t_next_; }

    void advance() {
        if (random_) {
            std::uniform_int_distribution<std::size_t> pick(0, num_modes_ - 1);
            mode_ = static_cast<int>(pick(rng_));
            t_next_ += dwell_[static_cast<std::size_t>(mode_)];
        } else {
            const ModeStep& st = periodic_[pos_ % periodic_.size()];
            ++pos_;
            mode_ = st.mode;
            t_next_ += st.duration;
        }
    }

private:
    std::vector<ModeStep> periodic_;
    std::vector<double> dwell_;
    std::mt19937_64 rng_;
    bool random_ = false;
    std::size_t num_modes_ = 0;
    std::size_t pos_ = 0;
    int mode_ = 0;
    double t_next_;
};

class JumpSequence {
public:
    JumpSequence(const JumpSchedule& sched, double t0) {
        if (const auto* pj = std::get_if<PeriodicJumps>(&sched)) {
            periodic_ = *pj;
            kind_ = Kind::Periodic;
            k_ = 0;
            skip_before(t0);
        } else if (const auto* sj = std::get_if<ScheduledJumps>(&sched)) {
            list_ = sj->times;
            kind_ = Kind::List;
            while (pos_ < list_.size() && list_[pos_].first < t0) ++pos_;
        } else if (std::holds_alternative<GuardJumps>(sched)) {
            kind_ = Kind::Guard;
            guard_index_ = std::get<GuardJumps>(sched).jump_index;
        }
    }

    bool guard_triggered() const { return kind_ == Kind::Guard; }
    int guard_jump_index() const { return guard_index_; }

    /// Next scheduled instant, or +inf.
    double next_time() const {
        switch (kind_) {
            case Kind::Periodic: return periodic_.offset + static_cast<double>(k_) * periodic_.period;
            case Kind::List:
                return pos_ < list_.size() ? list_[pos_].first
                                           : std::numeric_limits<double>::infinity();
            default: return std::numeric_limits<double>::infinity();
        }
    }

    int next_index() const {
        return kind_ == Kind::List ? list_[pos_].second : periodic_.jump_index;
    }

    void pop() {
        if (kind_ == Kind::Periodic) ++k_;
        else if (kind_ == Kind::List) ++pos_;
    }

private:
    enum class Kind { None, Periodic, List, Guard } kind_ = Kind::None;
    PeriodicJumps periodic_{};
    std::vector<std::pair<double, int>> list_;
    std::size_t pos_ = 0;
    long long k_ = 0;
    int guard_index_ = 0;

    void skip_before(double t0) {
        while (next_time() < t0) ++k_;
    }
};

}  // namespace detail

/// Simulates Eq.-(3) dynamics under the definition's switching policy.
/// Throws SimulationError on a non-finite state away from the divergence
/// cutoff; schedule/shape problems throw std::invalid_argument.
inline HybridTrajectory simulate(const HybridSystemDef& def, std::span<const double> x0,
                                 const IntegrationConfig& cfg, double t0 = 0.0) {
    cfg.validate();
    {
        const auto violations = validate_system(def);
        if (!violations.empty())
            throw std::invalid_argument("simulate: invalid system: " + violations.front());
    }
    const std::size_t n = static_cast<std::size_t>(def.dimension);
    if (x0.size() != n) throw std::invalid_argument("simulate: x0 has wrong dimension");
    if (!detail::finite(x0)) throw std::invalid_argument("simulate: x0 must be finite");

    HybridTrajectory traj;
    traj.dimension = def.dimension;
    traj.num_modes = static_cast<int>(def.flows.size());
    traj.t0 = t0;
    traj.x0.assign(x0.begin(), x0.end());

    detail::ModeSequence modes(def.policy.modes, def.flows.size(), t0);
    detail::JumpSequence jumps(def.policy.jumps, t0);

    const double coincide_tol = 1e-9;  // scheduled instants this close count as simultaneous
    const double t_end = t0 + cfg.t_end;

    Vec x(x0.begin(), x0.end());
    double t = t0;

    auto open_segment = [&](int mode, double ts) {
        FlowSegment s;
        s.mode = mode;
        s.t_start = ts;
        s.t_end = ts;
        s.times.push_back(ts);
        s.states.insert(s.states.end(), x.begin(), x.end());
        traj.segments.push_back(std::move(s));
    };
    auto push_sample = [&](double ts) {
        FlowSegment& s = traj.segments.back();
        s.times.push_back(ts);
        s.states.insert(s.states.end(), x.begin(), x.end());
    };
    auto close_segment = [&](double te) {
        traj.segments.back().t_end = te;
    };
    auto apply_jump = [&](int jump_index, double tj) {
        if (jump_index < 0 || jump_index >= static_cast<int>(def.jumps.size()))
            throw std::invalid_argument("simulate: jump index out of range");
        JumpEvent je;
        je.t = tj;
        je.jump_index = jump_index;
        je.active_mode = traj.segments.back().mode;
        je.segment = traj.segments.size() - 1;
        je.pre_sample = traj.segments.back().times.size() - 1;
        je.x_before.assign(x.begin(), x.end());
        Vec out(n, 0.0);
        def.jumps[static_cast<std::size_t>(jump_index)](x, out);
        x = out;
        je.x_after.assign(x.begin(), x.end());
        traj.jump_events.push_back(std::move(je));
        push_sample(tj);
    };

    open_segment(modes.current_mode(), t0);

    if (norm2(x) <= cfg.origin_tol) {
        traj.truncation = Truncation::Converged;
        traj.t_final = t0;
        close_segment(t0);
        return traj;
    }

    const FlowFn* flow = &def.flows[static_cast<std::size_t>(modes.current_mode())];
    detail::Rk4 rk(flow, n);
    Vec xn(n), probe(n);
    bool in_jump_set =
        def.jump_guard && jumps.guard_triggered() ? def.jump_guard(x) >= 0.0 : false;

    bool done = false;
    while (!done) {
        // next scheduled boundary
        const double t_switch = modes.current_end();
        const double t_jump = jumps.next_time();
        double boundary = std::min({t_switch, t_jump, t_end});

        // flow from t to boundary on the dt grid
        const double span = boundary - t;
        if (span > 0.0) {
            const long long cells =
                std::max<long long>(1, static_cast<long long>(std::ceil(span / cfg.dt - 1e-9)));
            const double cell_h = span / static_cast<double>(cells);
            double h_mem = cell_h;
            const double h_min = cell_h * std::pow(2.0, -40);
            for (long long ci = 0; ci < cells && !done; ++ci) {
                const double cell_end = (ci + 1 == cells) ? boundary : t + cell_h;
                double rem = cell_end - t;
                while (rem > 1e-12 * cfg.dt) {
                    double h = std::min(h_mem, rem);
                    bool arrived = false;
                    auto past_cutoff = [&](std::span<const double> v) {
                        return !detail::finite(v) || norm2(v) >= cfg.max_norm;
                    };
                    while (true) {
                        rk.step(x, h, xn);
                        if (!detail::finite(xn)) {
                            if (norm2(x) < 1e-3 * cfg.max_norm)
                                throw SimulationError("non-finite state", t,
                                                      traj.segments.back().mode);
                        }
                        if (past_cutoff(xn)) {
                            // land the final sample near the cutoff, not at the
                            // (possibly astronomical) overshoot of a full step
                            double lo = 0.0, hi = h;
                            for (int it = 0; it < 60 && hi - lo > 1e-18; ++it) {
                                const double mid = 0.5 * (lo + hi);
                                rk.step(x, mid, probe);
                                if (past_cutoff(probe)) hi = mid;
                                else lo = mid;
                            }
                            rk.step(x, lo, xn);
                            if (past_cutoff(xn) || !detail::finite(xn)) {
                                // cutoff crossed within one ulp of the start
                                for (std::size_t i = 0; i < n; ++i) xn[i] = x[i];
                            }
                            h = lo;
                            traj.truncation = Truncation::Diverged;
                            done = true;
                            break;
                        }
                        const double nxn = norm2(xn);
                        if (nxn <= cfg.origin_tol) {
                            // bisect the earliest arrival inside [t, t+h]
                            double lo = 0.0, hi = h;
                            for (int it = 0; it < 60 && hi - lo > 1e-18; ++it) {
                                const double mid = 0.5 * (lo + hi);
                                rk.step(x, mid, probe);
                                if (norm2(probe) <= cfg.origin_tol) hi = mid;
                                else lo = mid;
                            }
                            rk.step(x, hi, xn);
                            h = hi;
                            arrived = true;
                            break;
                        }
                        if (h > h_min) {
                            const double fn = norm2(rk.k1());
                            const double nx = norm2(x);
                            // below roundoff scale the update cannot be resolved
                            // against the state; halving would spin forever
                            const bool resolvable =
                                h * fn > 64.0 * std::numeric_limits<double>::epsilon() * nx;
                            if (resolvable) {
                                double dn = 0.0;
                                for (std::size_t i = 0; i < n; ++i) {
                                    const double d = xn[i] - x[i];
                                    dn += d * d;
                                }
                                dn = std::sqrt(dn);
                                if (dn < 0.25 * h * fn) { h *= 0.5; continue; }  // R1
                                if (nx <= 1e3 * cfg.origin_tol && nxn > nx &&
                                    detail::dot(x, rk.k1()) < 0.0) { h *= 0.5; continue; }  // R2
                            }
                        }
                        break;
                    }
                    if (done && traj.truncation == Truncation::Diverged) {
                        t += h;
                        x = xn;
                        push_sample(t);
                        break;
                    }
                    if (arrived) {
                        t += h;
                        x = xn;
                        push_sample(t);
                        traj.truncation = Truncation::Converged;
                        done = true;
                        break;
                    }
                    // state-triggered jumps: fire on entry into D
                    if (jumps.guard_triggered() && def.jump_guard) {
                        const bool next_inside = def.jump_guard(xn) >= 0.0;
                        if (next_inside && !in_jump_set) {
                            const double tc = locate_guard_crossing(
                                *flow, def.jump_guard, t, t + h, x, cfg.guard_tol);
                            rk.step(x, tc - t, xn);
                            t = tc;
                            x = xn;
                            push_sample(t);
                            apply_jump(jumps.guard_jump_index(), t);
                            in_jump_set = true;
                            rem = cell_end - t;
                            h_mem = cell_h;
                            continue;
                        }
                        in_jump_set = next_inside;
                    }
                    t += h;
                    x = xn;
                    rem -= h;
                    h_mem = std::min(2.0 * h, cell_h);
                    if (rem <= 1e-12 * cfg.dt) {
                        t = cell_end;  // land exactly on the grid point
                        push_sample(t);
                    }
                    // leaving the flow set C stops the run
                    if (def.flow_guard && def.flow_guard(x) < 0.0) {
                        traj.truncation = Truncation::LeftFlowSet;
                        done = true;
                        break;
                    }
                }
            }
        }
        if (done) break;

        t = boundary;
        if (boundary >= t_end - 1e-15) {
            traj.truncation = Truncation::Horizon;
            break;
        }

        const bool do_switch = t_switch <= boundary + coincide_tol;
        const bool do_jump = t_jump <= boundary + coincide_tol;
        if (do_switch) {
            close_segment(boundary);
            modes.advance();
            open_segment(modes.current_mode(), boundary);
            flow = &def.flows[static_cast<std::size_t>(modes.current_mode())];
            rk.set_flow(flow);
        }
        if (do_jump) {
            apply_jump(jumps.next_index(), boundary);
            jumps.pop();
            if (norm2(x) >= cfg.max_norm) {
                traj.truncation = Truncation::Diverged;
                break;
            }
        }
        if (norm2(x) <= cfg.origin_tol) {
            traj.truncation = Truncation::Converged;
            break;
        }
    }

    close_segment(t);
    traj.t_final = t;
    return traj;
}

/// First instant after which the norm stays within tol for every remaining
/// sample; t0 for an identically-small trajectory, nullopt if the tail exceeds
/// tol.
inline std::optional<double> settling_time(const HybridTrajectory& traj, double tol) {
    std::optional<double> candidate;
    for (const auto& s : traj.segments) {
        for (std::size_t k = 0; k < s.sample_count(); ++k) {
            const bool small = norm2(traj.state_at(s, k)) <= tol;
            if (!small) candidate.reset();
            else if (!candidate) candidate = s.times[k];
        }
    }
    return candidate;
}

}  // namespace hyfts
