#pragma once

#include <cmath>
#include <vector>

#include "afp/mechanisms.hpp"
#include "afp/path.hpp"
#include "afp/rng.hpp"

namespace afp {

namespace detail {

// Picks an atom index with probability proportional to mass. cum holds
// running sums of the masses.
inline std::size_t pick_atom(const std::vector<double>& cum, double u) {
    double target = u * cum.back();
    auto it = std::lower_bound(cum.begin(), cum.end(), target);
    if (it == cum.end()) --it;
    return static_cast<std::size_t>(it - cum.begin());
}

inline std::vector<double> cumulative_masses(const AtomicMeasure& m) {
    std::vector<double> cum;
    double s = 0.0;
    for (const Atom& a : m.atoms()) cum.push_back(s += a.mass);
    return cum;
}

} // namespace detail

/**
 * One CBI with raw (uncompensated) jumps. Small-jump compensation of m is
 * folded into the linear drift so only finitely many jumps occur.
 */
class CbiProcess {
public:
    CbiProcess(const BranchingMechanism& mech, const ImmigrationMechanism& imm) : mech_(mech), imm_(imm) {
        mech.validate();
        imm.validate();
        drift_rate_ = mech.b + integrate(mech.m, [](double w) { return w; }, Region::below_one());
        m_cum_ = detail::cumulative_masses(mech.m);
        nu_cum_ = detail::cumulative_masses(imm.nu);
        m_total_ = m_cum_.empty() ? 0.0 : m_cum_.back();
        nu_total_ = nu_cum_.empty() ? 0.0 : nu_cum_.back();
    }

    bool has_immigration() const { return imm_.eta > 0.0 || nu_total_ > 0.0; }

    /**
     * Advances x over one step of length h starting at time t. Returns false
     * if x exceeded cap (x is left at the offending value).
     */
    template <class OnEvent>
    bool step(double& x, double t, double h, Stream& rng, double cap, OnEvent&& on_event) const {
        if (x == 0.0 && !has_immigration()) return true;
        double drift = -drift_rate_ * x + imm_.eta;
        double noise = mech_.c > 0.0 ? std::sqrt(2.0 * mech_.c * std::max(x, 0.0) * h) * rng.normal() : 0.0;
        x = std::max(x + drift * h + noise, 0.0);
        double tau = t;
        double end = t + h;
        for (;;) {
            double rate = x * m_total_ + nu_total_;
            if (!(rate > 0.0)) break;
            tau += rng.exponential(rate);
            if (tau > end) break;
            double pick = rng.uniform() * rate;
            if (pick <= x * m_total_) {
                const Atom& a = mech_.m.atoms()[detail::pick_atom(m_cum_, rng.uniform())];
                x += a.location;
                on_event(tau, "repro", a.location);
            } else {
                const Atom& a = imm_.nu.atoms()[detail::pick_atom(nu_cum_, rng.uniform())];
                x += a.location;
                on_event(tau, "imm", a.location);
            }
            if (x > cap) return false;
        }
        return x <= cap;
    }

private:
    BranchingMechanism mech_;
    ImmigrationMechanism imm_;
    double drift_rate_ = 0.0;
    std::vector<double> m_cum_, nu_cum_;
    double m_total_ = 0.0, nu_total_ = 0.0;
};

inline PathSample simulate_cbi(const BranchingMechanism& mech, const ImmigrationMechanism& imm, double x0,
                               const SimConfig& cfg) {
    if (!(x0 >= 0.0) || !std::isfinite(x0)) throw InvalidParameter("x0 must be nonnegative");
    cfg.validate();
    CbiProcess proc(mech, imm);
    Stream rng(cfg.seed, cfg.stream_id);
    PathSample path;
    double x = x0;
    path.push(0.0, x);
    long steps = step_count(cfg.horizon, cfg.dt);
    auto record = [&](double t, const char* kind, double w) { path.events.push_back({t, kind, w}); };
    for (long k = 0; k < steps; ++k) {
        double t = k * cfg.dt;
        double h = std::min(cfg.dt, cfg.horizon - t);
        bool ok = proc.step(x, t, h, rng, cfg.cap, record);
        if (!std::isfinite(x)) throw NumericalFailure("non-finite CBI state", k);
        double t_next = k + 1 == steps ? cfg.horizon : (k + 1) * cfg.dt;
        path.push(t_next, x);
        if (!ok) {
            path.exploded = true;
            path.truncated_at = t_next;
            break;
        }
    }
    return path;
}

/** Exact event-driven pure-jump CB: jumps of size w at rate x * v. */
inline PathSample simulate_lamperti(double jump_rate, double jump_size, double x0, const SimConfig& cfg) {
    if (!(jump_rate > 0.0) || !(jump_size > 0.0)) throw InvalidParameter("jump rate and size must be positive");
    if (!(x0 >= 0.0) || !std::isfinite(x0)) throw InvalidParameter("x0 must be nonnegative");
    cfg.validate();
    Stream rng(cfg.seed, cfg.stream_id);
    PathSample path;
    double x = x0;
    path.push(0.0, x);
    long steps = step_count(cfg.horizon, cfg.dt);
    double t = 0.0;
    double next = x > 0.0 ? rng.exponential(x * jump_rate) : INFINITY;
    for (long k = 0; k < steps; ++k) {
        double grid = k + 1 == steps ? cfg.horizon : (k + 1) * cfg.dt;
        while (t + next <= grid) {
            t += next;
            x += jump_size;
            path.events.push_back({t, "repro", jump_size});
            if (x > cfg.cap || !std::isfinite(x * jump_rate)) {
                path.push(std::max(t, std::nextafter(path.times.back(), INFINITY)), x);
                path.exploded = true;
                path.truncated_at = path.times.back();
                return path;
            }
            next = rng.exponential(x * jump_rate);
        }
        next -= grid - t;
        t = grid;
        path.push(grid, x);
    }
    return path;
}

} // namespace afp
