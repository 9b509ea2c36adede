#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "afp/errors.hpp"
#include "afp/measures.hpp"

namespace afp {

/** Branching mechanism triplet (b, c, m). */
struct BranchingMechanism {
    double b = 0.0;
    double c = 0.0;
    AtomicMeasure m;

    void validate() const {
        if (!std::isfinite(b)) throw InvalidParameter("b must be finite");
        if (!std::isfinite(c) || c < 0.0) throw InvalidParameter("c must be nonnegative");
        double tail = integrate(m, [](double w) { return std::min(1.0, w * w); });
        if (!std::isfinite(tail)) throw InvalidParameter("jump measure does not integrate 1 ^ w^2");
    }
    bool operator==(const BranchingMechanism&) const = default;
};

struct ImmigrationMechanism {
    double eta = 0.0;
    AtomicMeasure nu;

    void validate() const {
        if (!std::isfinite(eta) || eta < 0.0) throw InvalidParameter("eta must be nonnegative");
    }
    bool operator==(const ImmigrationMechanism&) const = default;
};

/** Two competing CBIs and the culling level z. */
struct PopulationModel {
    BranchingMechanism mech1, mech2;
    ImmigrationMechanism imm1, imm2;
    double z = 1.0;

    void validate() const {
        mech1.validate();
        mech2.validate();
        imm1.validate();
        imm2.validate();
        if (!std::isfinite(z) || z <= 0.0) throw InvalidParameter("z must be positive");
    }
    bool operator==(const PopulationModel&) const = default;
};

inline double psi_eval(const BranchingMechanism& mech, double lam) {
    if (!(lam >= 0.0)) throw InvalidParameter("lambda must be nonnegative");
    double s = mech.b * lam + mech.c * lam * lam;
    for (const Atom& a : mech.m.atoms()) {
        double x = lam * a.location;
        double comp = a.location < 1.0 ? x : 0.0;
        s += a.mass * (std::expm1(-x) + comp);
    }
    return s;
}

inline double phi_eval(const ImmigrationMechanism& imm, double lam) {
    if (!(lam >= 0.0)) throw InvalidParameter("lambda must be nonnegative");
    double s = imm.eta * lam;
    for (const Atom& a : imm.nu.atoms()) s += -a.mass * std::expm1(-lam * a.location);
    return s;
}

inline double psi_prime_at_zero(const BranchingMechanism& mech) {
    return mech.b - integrate(mech.m, [](double w) { return w; }, Region::from_one());
}

inline constexpr double kDefaultOdeTol = 1e-10;
inline constexpr double kOverflowGuard = 1e150;

namespace detail {

// Integrates u' = -psi(u), I' = phi(u) from (lam, 0) over [0, t].
inline std::array<double, 2> solve_cumulant_system(const BranchingMechanism& mech,
                                                   const ImmigrationMechanism* imm, double lam,
                                                   double t, double tol) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 2>;
    if (!(lam >= 0.0)) throw InvalidParameter("lambda must be nonnegative");
    if (!(t >= 0.0)) throw InvalidParameter("t must be nonnegative");
    State x{lam, 0.0};
    if (t == 0.0 || lam == 0.0) return x;

    auto rhs = [&](const State& s, State& ds, double) {
        double u = std::max(s[0], 0.0);
        ds[0] = -psi_eval(mech, u);
        ds[1] = imm ? phi_eval(*imm, u) : 0.0;
    };
    auto guard = [&](const State& s, double time) {
        if (!std::isfinite(s[0]) || std::abs(s[0]) > kOverflowGuard)
            throw ExplosionDetected("cumulant left the overflow guard", time);
    };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(tol, tol);
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, t, std::min(t, 1e-3), guard);
    return x;
}

} // namespace detail

inline double cumulant_solve(const BranchingMechanism& mech, double lam, double t, double tol = kDefaultOdeTol) {
    return detail::solve_cumulant_system(mech, nullptr, lam, t, tol)[0];
}

inline double laplace_cbi(const BranchingMechanism& mech, const ImmigrationMechanism& imm, double x, double lam,
                          double t, double tol = kDefaultOdeTol) {
    if (!(x >= 0.0)) throw InvalidParameter("x must be nonnegative");
    auto s = detail::solve_cumulant_system(mech, &imm, lam, t, tol);
    return std::exp(-x * s[0] - s[1]);
}

enum class Explosivity { explosive, nonexplosive, indeterminate };

struct ExplosivityResult {
    Explosivity label = Explosivity::indeterminate;
    double tail_exponent = 0.0; // local power p in |psi(xi)| ~ A xi^p near 0
    std::optional<double> zero_at;
};

/**
 * Probes integrability of 1/|psi| at 0+. The integral diverges iff the local
 * exponent p of |psi| near 0 is at least 1; divergence is labelled explosive.
 * Exponents that do not settle, or that fall just below 1, give indeterminate.
 */
inline ExplosivityResult is_explosive(const BranchingMechanism& mech, const std::vector<double>& probe_grid,
                                      double band = 0.05) {
    if (probe_grid.size() < 3) throw InvalidParameter("probe grid needs at least 3 points");
    for (std::size_t i = 0; i < probe_grid.size(); ++i) {
        if (!(probe_grid[i] > 0.0)) throw InvalidParameter("probe grid must be positive");
        if (i > 0 && !(probe_grid[i] < probe_grid[i - 1])) throw InvalidParameter("probe grid must decrease");
    }
    ExplosivityResult res;
    std::vector<double> vals;
    for (double xi : probe_grid) vals.push_back(psi_eval(mech, xi));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] == 0.0) {
            res.zero_at = probe_grid[i];
            return res;
        }
        if (i > 0 && (vals[i] > 0.0) != (vals[i - 1] > 0.0)) {
            auto f = [&](double x) { return psi_eval(mech, x); };
            boost::uintmax_t iters = 200;
            auto root = boost::math::tools::toms748_solve(f, probe_grid[i], probe_grid[i - 1], vals[i], vals[i - 1],
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
            res.zero_at = 0.5 * (root.first + root.second);
            return res;
        }
    }
    auto exponent = [&](std::size_t i) {
        return std::log(std::abs(vals[i - 1] / vals[i])) / std::log(probe_grid[i - 1] / probe_grid[i]);
    };
    std::size_t n = vals.size();
    double p_last = exponent(n - 1);
    double p_prev = exponent(n - 2);
    res.tail_exponent = p_last;
    if (std::abs(p_last - p_prev) > band) return res;
    if (p_last >= 1.0 - 1e-6)
        res.label = Explosivity::explosive;
    else if (p_last <= 1.0 - band)
        res.label = Explosivity::nonexplosive;
    return res;
}

inline std::vector<double> default_probe_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 8; ++k) g.push_back(std::pow(10.0, -k));
    return g;
}

} // namespace afp
