#pragma once

#include <algorithm>
#include <cmath>

#include "afp/afp_sim.hpp"
#include "afp/cbi_sim.hpp"
#include "afp/path.hpp"

namespace afp {

enum class Holding { exponential, deterministic };

struct CullingConfig {
    long n = 16;
    double epsilon = 0.0; // <= 0 means z/100
    double L = 0.0;       // <= 0 means 100 z
    Holding holding = Holding::exponential;
    SimConfig sim;
};

namespace detail {

struct CullingLevels {
    double eps, L, dt;
};

inline CullingLevels culling_levels(const PopulationModel& model, const CullingConfig& cfg) {
    if (cfg.n <= 0) throw InvalidConfig("culling rate n must be positive");
    double z = model.z;
    double eps = cfg.epsilon > 0.0 ? cfg.epsilon : z / 100.0;
    double L = cfg.L > 0.0 ? cfg.L : 100.0 * z;
    if (!(eps < z && z < L)) throw InvalidConfig("need 0 < epsilon < z < L");
    double dt = std::min(cfg.sim.dt, 1.0 / (10.0 * static_cast<double>(cfg.n)));
    return {eps, L, dt};
}

} // namespace detail

/** Pair of CBIs run side by side; used by the culling kernel. */
class CullingKernel {
public:
    CullingKernel(const PopulationModel& model, const CullingConfig& cfg)
        : z_(model.z),
          p1_(model.mech1, model.imm1),
          p2_(model.mech2, model.imm2),
          lv_(detail::culling_levels(model, cfg)),
          window_(1.0 / static_cast<double>(cfg.n)),
          cap_(cfg.sim.cap) {}

    /** Runs both CBIs from (r z, (1-r) z) for 1/n and returns the stopped frequency. */
    double step(double r, Stream& rng) const {
        detail::check_frequency(r);
        double x1 = r * z_, x2 = (1.0 - r) * z_;
        double t = 0.0;
        double last = r;
        auto ignore = [](double, const char*, double) {};
        while (t < window_) {
            double h = std::min(lv_.dt, window_ - t);
            if (window_ - (t + h) < 1e-12 * lv_.dt) h = window_ - t;
            p1_.step(x1, t, h, rng, cap_, ignore);
            p2_.step(x2, t, h, rng, cap_, ignore);
            t += h;
            double zt = x1 + x2;
            if (!std::isfinite(zt)) throw NumericalFailure("non-finite total mass in culling window");
            if (zt > 0.0) last = x1 / zt;
            if (zt <= lv_.eps || zt > lv_.L) break;
        }
        return std::clamp(last, 0.0, 1.0);
    }

    double window() const { return window_; }

private:
    double z_;
    CbiProcess p1_, p2_;
    detail::CullingLevels lv_;
    double window_;
    double cap_;
};

inline double culling_step(const PopulationModel& model, double r, const CullingConfig& cfg) {
    CullingKernel kernel(model, cfg);
    Stream rng(cfg.sim.seed, cfg.sim.stream_id);
    return kernel.step(r, rng);
}

/** Piecewise-constant culled chain; times holds the transition epochs. */
inline PathSample simulate_culled(const PopulationModel& model, double r0, const CullingConfig& cfg) {
    detail::check_frequency(r0);
    if (!(cfg.sim.horizon > 0.0)) throw InvalidConfig("horizon must be positive");
    CullingKernel kernel(model, cfg);
    Stream rng(cfg.sim.seed, cfg.sim.stream_id);
    PathSample path;
    double r = r0;
    path.push(0.0, r);
    double t = 0.0;
    double rate = static_cast<double>(cfg.n);
    for (;;) {
        t += cfg.holding == Holding::exponential ? rng.exponential(rate) : 1.0 / rate;
        if (t > cfg.sim.horizon) break;
        r = kernel.step(r, rng);
        path.push(t, r);
        path.events.push_back({t, "cull", r});
    }
    return path;
}

} // namespace afp
