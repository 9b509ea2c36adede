#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "afp/cbi_sim.hpp"
#include "afp/mechanisms.hpp"
#include "afp/path.hpp"
#include "afp/polynomial.hpp"

namespace afp {

enum class JumpKind { repro1, repro2, imm1, imm2 };

inline const char* to_string(JumpKind k) {
    switch (k) {
    case JumpKind::repro1: return "repro1";
    case JumpKind::repro2: return "repro2";
    case JumpKind::imm1: return "imm1";
    case JumpKind::imm2: return "imm2";
    }
    return "?";
}

/** One atom of one of the four jump families of the frequency process. */
struct JumpMap {
    JumpKind kind;
    double w;
    double mass;
    double z;

    double u() const { return w / (z + w); }

    // Rate with r and 1-r replaced by their maxima; used for thinning.
    double bound_rate() const {
        return kind == JumpKind::repro1 || kind == JumpKind::repro2 ? z * mass : mass;
    }

    double rate_at(double r) const {
        switch (kind) {
        case JumpKind::repro1: return z * r * mass;
        case JumpKind::repro2: return z * (1.0 - r) * mass;
        default: return mass;
        }
    }

    double displacement(double r) const {
        bool up = kind == JumpKind::repro1 || kind == JumpKind::imm1;
        return up ? (1.0 - r) * u() : -r * u();
    }
};

namespace detail {

inline void check_frequency(double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidParameter("frequency must lie in [0,1]");
}

inline double small_jump_mean(const AtomicMeasure& m) {
    return integrate(m, [](double w) { return w; }, Region::below_one());
}

} // namespace detail

/**
 * Drift of the frequency process when jumps are simulated raw. Written as the
 * compensated-integral drift plus the compensators of the small jumps.
 */
inline double effective_drift(const PopulationModel& model, double r) {
    detail::check_frequency(r);
    const double z = model.z;
    const auto& m1 = model.mech1.m;
    const auto& m2 = model.mech2.m;
    auto w2 = [z](double w) { return w * w / (w + z); };
    auto comp = [z](double w) { return z * w / (z + w); };
    double bracket = (model.mech2.b - model.mech1.b) + (2.0 / z) * (model.mech2.c - model.mech1.c) +
                     integrate(m2, w2, Region::below_one()) - integrate(m1, w2, Region::below_one());
    double comp_terms = -integrate(m1, comp, Region::below_one()) + integrate(m2, comp, Region::below_one());
    return r * (1.0 - r) * (bracket + comp_terms) + model.imm1.eta * (1.0 - r) / z - model.imm2.eta * r / z;
}

inline double effective_drift_reduced(const PopulationModel& model, double r) {
    detail::check_frequency(r);
    const double z = model.z;
    double bracket = (model.mech2.b - model.mech1.b) + (2.0 / z) * (model.mech2.c - model.mech1.c) +
                     detail::small_jump_mean(model.mech2.m) - detail::small_jump_mean(model.mech1.m);
    return r * (1.0 - r) * bracket + model.imm1.eta * (1.0 - r) / z - model.imm2.eta * r / z;
}

inline double diffusion_coeff(const PopulationModel& model, double r) {
    detail::check_frequency(r);
    double v = r * (1.0 - r) * (model.mech1.c * (1.0 - r) + model.mech2.c * r) / model.z;
    return std::sqrt(std::max(v, 0.0));
}

/** Frequency process with Euler steps for the continuous part and thinned jumps. */
class AfpProcess {
public:
    explicit AfpProcess(const PopulationModel& model) : model_(model) {
        model.validate();
        const double z = model.z;
        auto add = [&](JumpKind kind, const AtomicMeasure& m) {
            for (const Atom& a : m.atoms()) jumps_.push_back({kind, a.location, a.mass, z});
        };
        add(JumpKind::repro1, model.mech1.m);
        add(JumpKind::repro2, model.mech2.m);
        add(JumpKind::imm1, model.imm1.nu);
        add(JumpKind::imm2, model.imm2.nu);
        double s = 0.0;
        for (const JumpMap& j : jumps_) cum_.push_back(s += j.bound_rate());
        bound_ = s;
        drift_bracket_ = (model.mech2.b - model.mech1.b) + (2.0 / z) * (model.mech2.c - model.mech1.c) +
                         detail::small_jump_mean(model.mech2.m) - detail::small_jump_mean(model.mech1.m);
        pure_jump_ = drift_bracket_ == 0.0 && model.imm1.eta == 0.0 && model.imm2.eta == 0.0 &&
                     model.mech1.c == 0.0 && model.mech2.c == 0.0;
    }

    bool pure_jump() const { return pure_jump_; }
    const std::vector<JumpMap>& jumps() const { return jumps_; }

    double drift(double r) const {
        return r * (1.0 - r) * drift_bracket_ + model_.imm1.eta * (1.0 - r) / model_.z -
               model_.imm2.eta * r / model_.z;
    }

    /**
     * Moves r from time t0 to t1. Pure-jump models are simulated exactly;
     * otherwise Euler steps of at most dt are used.
     */
    template <class OnEvent>
    void advance(double& r, double t0, double t1, double dt, Stream& rng, OnEvent&& on_event) const {
        if (pure_jump_) {
            jumps_between(r, t0, t1, rng, on_event);
            return;
        }
        double t = t0;
        while (t < t1) {
            double h = std::min(dt, t1 - t);
            if (t1 - (t + h) < 1e-12 * dt) h = t1 - t;
            double sigma = diffusion_coeff(model_, r);
            double next = r + drift(r) * h + (sigma > 0.0 ? sigma * std::sqrt(h) * rng.normal() : 0.0);
            r = std::clamp(next, 0.0, 1.0);
            if (!std::isfinite(r)) throw NumericalFailure("non-finite frequency");
            jumps_between(r, t, t + h, rng, on_event);
            t += h;
        }
    }

    template <class OnEvent>
    void jumps_between(double& r, double t0, double t1, Stream& rng, OnEvent&& on_event) const {
        if (!(bound_ > 0.0)) return;
        double tau = t0;
        for (;;) {
            tau += rng.exponential(bound_);
            if (tau > t1) return;
            const JumpMap& j = jumps_[detail::pick_atom(cum_, rng.uniform())];
            double accept = j.rate_at(r) / j.bound_rate();
            if (accept < 1.0 && rng.uniform() > accept) continue;
            r = std::clamp(r + j.displacement(r), 0.0, 1.0);
            on_event(tau, j.kind, j.w);
        }
    }

private:
    PopulationModel model_;
    std::vector<JumpMap> jumps_;
    std::vector<double> cum_;
    double bound_ = 0.0;
    double drift_bracket_ = 0.0;
    bool pure_jump_ = false;
};

inline PathSample simulate_afp(const PopulationModel& model, double r0, const SimConfig& cfg) {
    detail::check_frequency(r0);
    cfg.validate();
    AfpProcess proc(model);
    Stream rng(cfg.seed, cfg.stream_id);
    PathSample path;
    double r = r0;
    path.push(0.0, r);
    auto record = [&](double t, JumpKind k, double w) { path.events.push_back({t, to_string(k), w}); };
    long steps = step_count(cfg.horizon, cfg.dt);
    for (long k = 0; k < steps; ++k) {
        double t = k * cfg.dt;
        double t_next = k + 1 == steps ? cfg.horizon : (k + 1) * cfg.dt;
        proc.advance(r, t, t_next, cfg.dt, rng, record);
        if (!(r >= 0.0 && r <= 1.0)) throw NumericalFailure("frequency left [0,1]", k);
        path.push(t_next, r);
    }
    return path;
}

/**
 * Generator of the frequency process applied to a polynomial. The second
 * order term is half the squared diffusion coefficient times f''.
 */
inline double generator_afp(const PopulationModel& model, const Polynomial& f, double r) {
    detail::check_frequency(r);
    model.validate();
    const double z = model.z;
    Polynomial df = f.derivative();
    Polynomial d2f = df.derivative();
    double fr = f(r), f1 = df(r), f2 = d2f(r);
    const auto& M1 = model.mech1;
    const auto& M2 = model.mech2;

    double drift = r * (1.0 - r) * (M2.b - M1.b) + (2.0 * r * (1.0 - r) / z) * (M2.c - M1.c) +
                   model.imm1.eta * (1.0 - r) / z - model.imm2.eta * r / z;
    double out = drift * f1 + 0.5 * f2 * r * (1.0 - r) / z * (M1.c * (1.0 - r) + M2.c * r);

    for (const Atom& a : model.imm1.nu.atoms()) {
        double u = tz_map(a.location, z);
        out += a.mass * (f(r * (1.0 - u) + u) - fr);
    }
    for (const Atom& a : M1.m.atoms()) {
        double u = tz_map(a.location, z);
        double comp = a.location < 1.0 ? (u / (1.0 - u)) * f1 * (1.0 - r) : 0.0;
        out += z * r * a.mass * (f(r * (1.0 - u) + u) - fr - comp);
    }
    for (const Atom& a : M2.m.atoms()) {
        double u = tz_map(a.location, z);
        double comp = a.location < 1.0 ? (u / (1.0 - u)) * f1 * r : 0.0;
        out += z * (1.0 - r) * a.mass * (f(r * (1.0 - u)) - fr + comp);
    }
    for (const Atom& a : model.imm2.nu.atoms()) {
        double u = tz_map(a.location, z);
        out += a.mass * (f(r * (1.0 - u)) - fr);
    }
    return out;
}

/** Generator of the pair (R, Z) built from the two CBIs, applied to f(r, z). */
inline double generator_rz(const PopulationModel& model, const Polynomial2& f, double r, double zv) {
    detail::check_frequency(r);
    if (!(zv > 0.0)) throw InvalidParameter("z must be positive");
    const auto& M1 = model.mech1;
    const auto& M2 = model.mech2;
    Polynomial2 p1 = f.d_r(), p2 = f.d_z();
    Polynomial2 p11 = p1.d_r(), p12 = p1.d_z(), p22 = p2.d_z();
    double fr = f(r, zv), f1 = p1(r, zv), f2 = p2(r, zv);
    double f11 = p11(r, zv), f12 = p12(r, zv), f22 = p22(r, zv);
    double q = r * (1.0 - r);

    double out = -M1.b * f1 * q - M1.b * r * zv * f2 + 2.0 * M1.c * f12 * q + M1.c * r * zv * f22 +
                 (M1.c / zv) * (f11 * r * (1.0 - r) * (1.0 - r) - 2.0 * f1 * q);
    out += M2.b * f1 * q - M2.b * (1.0 - r) * zv * f2 - 2.0 * M2.c * f12 * q + M2.c * (1.0 - r) * zv * f22 +
           (M2.c / zv) * (f11 * r * r * (1.0 - r) + 2.0 * f1 * q);
    out += model.imm1.eta * (f1 * (1.0 - r) / zv + f2);
    out += model.imm2.eta * (-f1 * r / zv + f2);

    for (const Atom& a : M1.m.atoms()) {
        double w = a.location, u = w / (zv + w);
        double comp = w < 1.0 ? w * (f1 * (1.0 - r) / zv + f2) : 0.0;
        out += r * zv * a.mass * (f(r * (1.0 - u) + u, zv + w) - fr - comp);
    }
    for (const Atom& a : model.imm1.nu.atoms()) {
        double w = a.location, u = w / (zv + w);
        out += a.mass * (f(r * (1.0 - u) + u, zv + w) - fr);
    }
    for (const Atom& a : M2.m.atoms()) {
        double w = a.location, u = w / (zv + w);
        double comp = w < 1.0 ? w * (-f1 * r / zv + f2) : 0.0;
        out += (1.0 - r) * zv * a.mass * (f(r * (1.0 - u), zv + w) - fr - comp);
    }
    for (const Atom& a : model.imm2.nu.atoms()) {
        double w = a.location, u = w / (zv + w);
        out += a.mass * (f(r * (1.0 - u), zv + w) - fr);
    }
    return out;
}

} // namespace afp
