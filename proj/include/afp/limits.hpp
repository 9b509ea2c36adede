#pragma once

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "afp/mechanisms.hpp"
#include "afp/path.hpp"

namespace afp {

struct LimitParams {
    double r0 = 0.5;
    double delta = 0.0;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};

inline LimitParams limit_params(const PopulationModel& model, double r0) {
    model.validate();
    auto second = [](const BranchingMechanism& m) {
        return m.c + integrate(m.m, [](double w) { return w * w; });
    };
    return {r0, psi_prime_at_zero(model.mech2) - psi_prime_at_zero(model.mech1), second(model.mech1),
            second(model.mech2)};
}

inline double logistic_limit(const LimitParams& p, double t) {
    if (!(t >= 0.0)) throw InvalidParameter("t must be nonnegative");
    double r = p.r0;
    if (r == 0.0 || r == 1.0 || p.delta == 0.0) return r;
    double x = p.delta * t;
    // Written to avoid overflow of e^{delta t} for either sign of delta.
    if (x > 0.0) return r / (r + (1.0 - r) * std::exp(-x));
    double e = std::exp(x);
    return r * e / ((1.0 - r) + r * e);
}

inline double fluct_cov(const LimitParams& p, double s, double t) {
    if (!(s >= 0.0 && t >= 0.0)) throw InvalidParameter("times must be nonnegative");
    double m = std::min(s, t);
    if (m == 0.0) return 0.0;
    auto integrand = [&](double u) {
        double R = logistic_limit(p, u);
        return R * (1.0 - R) * (p.sigma1 * (1.0 - R) + p.sigma2 * R);
    };
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, 0.0, m, 20, 1e-10, &err);
    if (!std::isfinite(v) || err > 1e-8 * std::max(1.0, std::abs(v)))
        throw NumericalFailure("fluctuation covariance quadrature did not converge");
    return std::max(v, 0.0);
}

/** Gaussian martingale with independent increments matching fluct_cov. */
inline PathSample sample_fluctuation_path(const LimitParams& p, const std::vector<double>& times, std::uint64_t seed,
                                          std::uint64_t stream = stream_id(StreamSpace::fluctuation, 0)) {
    if (times.empty() || times.front() != 0.0) throw InvalidParameter("time grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InvalidParameter("time grid must increase");
    Stream rng(seed, stream);
    PathSample path;
    double x = 0.0, prev = 0.0;
    path.push(0.0, 0.0);
    for (std::size_t i = 1; i < times.size(); ++i) {
        double c = fluct_cov(p, times[i], times[i]);
        double inc = c - prev;
        if (inc < 0.0) {
            if (inc < -1e-9 * std::max(1.0, c)) throw NumericalFailure("negative variance increment");
            inc = 0.0;
        }
        x += std::sqrt(inc) * rng.normal();
        prev = c;
        path.push(times[i], x);
    }
    return path;
}

} // namespace afp
