#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "afp/dual_chain.hpp"
#include "afp/mechanisms.hpp"

namespace afp {

/** (b~, m~) with m~ = c delta_0 + w^2/(w^2+1) m; atoms are sorted, location 0 allowed. */
struct TildeForm {
    double b_tilde = 0.0;
    std::vector<Atom> m_tilde;
};

namespace detail {

inline double tilde_shift(double w) { return w / (w * w + 1.0) - (w <= 1.0 ? w : 0.0); }

} // namespace detail

inline LambdaMeasure to_lambda(const BranchingMechanism& mech, double z) {
    mech.validate();
    if (!(z > 0.0)) throw InvalidParameter("z must be positive");
    std::vector<Atom> atoms;
    for (const Atom& a : mech.m.atoms()) {
        double u = tz_map(a.location, z);
        atoms.push_back({u, z * u * u * a.mass});
    }
    return LambdaMeasure(mech.c / z, std::move(atoms));
}

inline double tilde_drift(const BranchingMechanism& mech) {
    return mech.b + integrate(mech.m, detail::tilde_shift);
}

inline BranchingMechanism from_lambda(const LambdaMeasure& L, double z, double r_tilde) {
    if (!(z > 0.0)) throw InvalidParameter("z must be positive");
    std::vector<Atom> atoms;
    for (const Atom& a : L.atoms()) {
        if (!(a.location < 1.0)) throw InvalidParameter("Lambda has an atom at 1");
        double u = a.location;
        atoms.push_back({tz_inverse(u, z), a.mass / (z * u * u)});
    }
    BranchingMechanism mech;
    mech.c = z * L.mass_at_zero();
    mech.m = AtomicMeasure(std::move(atoms));
    mech.b = r_tilde - integrate(mech.m, detail::tilde_shift);
    return mech;
}

inline TildeForm tilde_transform(const BranchingMechanism& mech) {
    TildeForm t;
    t.b_tilde = tilde_drift(mech);
    if (mech.c > 0.0) t.m_tilde.push_back({0.0, mech.c});
    for (const Atom& a : mech.m.atoms()) {
        double w = a.location;
        t.m_tilde.push_back({w, a.mass * w * w / (w * w + 1.0)});
    }
    return t;
}

namespace detail {

// Max flow from mu atoms to nu atoms along edges |x - y| <= eps (Edmonds-Karp).
inline double transport_flow(const std::vector<Atom>& mu, const std::vector<Atom>& nu, double eps) {
    const std::size_t a = mu.size(), b = nu.size();
    const std::size_t n = a + b + 2, src = a + b, dst = a + b + 1;
    std::vector<std::vector<double>> cap(n, std::vector<double>(n, 0.0));
    const double big = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a; ++i) {
        cap[src][i] = mu[i].mass;
        for (std::size_t j = 0; j < b; ++j)
            if (std::abs(mu[i].location - nu[j].location) <= eps) cap[i][a + j] = big;
    }
    for (std::size_t j = 0; j < b; ++j) cap[a + j][dst] = nu[j].mass;
    double flow = 0.0;
    for (;;) {
        std::vector<std::size_t> prev(n, n);
        prev[src] = src;
        std::deque<std::size_t> queue{src};
        while (!queue.empty() && prev[dst] == n) {
            std::size_t v = queue.front();
            queue.pop_front();
            for (std::size_t w = 0; w < n; ++w)
                if (prev[w] == n && cap[v][w] > 0.0) {
                    prev[w] = v;
                    queue.push_back(w);
                }
        }
        if (prev[dst] == n) break;
        double push = big;
        for (std::size_t v = dst; v != src; v = prev[v]) push = std::min(push, cap[prev[v]][v]);
        if (!(push > 0.0)) break;
        for (std::size_t v = dst; v != src; v = prev[v]) {
            cap[prev[v]][v] -= push;
            cap[v][prev[v]] += push;
        }
        flow += push;
    }
    return flow;
}

} // namespace detail

/**
 * Levy-Prohorov distance between two finite atomic measures on the line.
 * For fixed eps the worst set A has deficit max(|mu|, |nu|) - maxflow(eps),
 * which only changes at pairwise gaps, so the minimal eps is found exactly by
 * scanning those gaps.
 */
inline double prohorov(const std::vector<Atom>& mu, const std::vector<Atom>& nu) {
    double tm = 0.0, tn = 0.0;
    for (const Atom& x : mu) tm += x.mass;
    for (const Atom& x : nu) tn += x.mass;
    std::vector<double> gaps{0.0};
    for (const Atom& x : mu)
        for (const Atom& y : nu) gaps.push_back(std::abs(x.location - y.location));
    std::sort(gaps.begin(), gaps.end());
    gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        double deficit = std::max(tm, tn) - detail::transport_flow(mu, nu, gaps[k]);
        deficit = std::max(deficit, 0.0);
        double eps = std::max(gaps[k], deficit);
        if (k + 1 == gaps.size() || eps < gaps[k + 1]) return eps;
    }
    return std::max(tm, tn);
}

inline double prohorov(const MeasureOn01& a, const MeasureOn01& b) {
    auto atoms = [](const MeasureOn01& m) {
        std::vector<Atom> v;
        if (m.mass_at_zero() > 0.0) v.push_back({0.0, m.mass_at_zero()});
        v.insert(v.end(), m.atoms().begin(), m.atoms().end());
        return v;
    };
    return prohorov(atoms(a), atoms(b));
}

inline double d_psi(const BranchingMechanism& t1, const BranchingMechanism& t2) {
    TildeForm a = tilde_transform(t1), b = tilde_transform(t2);
    return std::abs(a.b_tilde - b.b_tilde) + prohorov(a.m_tilde, b.m_tilde);
}

struct ContinuityRow {
    std::size_t index;
    double d_psi;
    double lambda_distance;
    double max_rate_gap;
};

struct ContinuityReport {
    std::vector<ContinuityRow> rows;
};

/** Distances of each triplet to the target and of the induced coalescent rates. */
inline ContinuityReport continuity_probe(const std::vector<BranchingMechanism>& seq, const BranchingMechanism& target,
                                         double z, long nmax = 6) {
    ContinuityReport rep;
    LambdaMeasure Lt = to_lambda(target, z);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        LambdaMeasure Lk = to_lambda(seq[k], z);
        double gap = 0.0;
        for (long n = 2; n <= nmax; ++n)
            for (long i = 2; i <= n; ++i)
                gap = std::max(gap, binomial(n, i) * std::abs(coalescent_rates(Lk, n, i) - coalescent_rates(Lt, n, i)));
        rep.rows.push_back({k, d_psi(seq[k], target), prohorov(Lk, Lt), gap});
    }
    return rep;
}

/** Pair of mechanisms whose jumps are eps with masses z/eps^2 and z/eps^2 + 1/(s eps). */
inline PopulationModel epsilon_pair(double z, double s, double eps, bool pure_poisson) {
    double v1 = z / (eps * eps);
    double v2 = v1 + 1.0 / (s * eps);
    auto mech = [&](double v) {
        BranchingMechanism m;
        m.m = AtomicMeasure{{eps, v}};
        // Pure Poisson: psi = v (e^{-lambda eps} - 1); otherwise the tilde drift is 0.
        m.b = pure_poisson ? -v * eps : -v * detail::tilde_shift(eps);
        return m;
    };
    PopulationModel model;
    model.mech1 = mech(v1);
    model.mech2 = mech(v2);
    model.z = z;
    return model;
}

struct GapRow {
    double eps;
    std::vector<double> branching;       // q_{n,n+1}, n = 1..nmax
    std::vector<double> pair_coalescence; // q_{n,n-1}, n = 1..nmax
    double max_branching_error;          // max_n |q_{n,n+1} - n/s|
    double max_coalescence_error;        // max_n |q_{n,n-1} - C(n,2)|
    double d_psi;                        // distance between the two mechanisms
};

/**
 * Dual rates along the epsilon sequence, compared with the limit that has
 * Kingman coalescence plus branching at rate n/s.
 */
inline std::vector<GapRow> epsilon_gap_probe(double z, double s, const std::vector<double>& eps_list, long nmax,
                                             bool pure_poisson = true) {
    std::vector<GapRow> rows;
    for (double eps : eps_list) {
        PopulationModel model = epsilon_pair(z, s, eps, pure_poisson);
        DualRates q = assemble_rates(model, nmax);
        GapRow row{eps, {}, {}, 0.0, 0.0, d_psi(model.mech1, model.mech2)};
        for (long n = 1; n <= nmax; ++n) {
            double up = q.rate(n, n + 1);
            double down = n >= 2 ? q.rate(n, n - 1) : q.rate(n, 0);
            row.branching.push_back(up);
            row.pair_coalescence.push_back(down);
            row.max_branching_error = std::max(row.max_branching_error, std::abs(up - static_cast<double>(n) / s));
            if (n >= 2) row.max_coalescence_error = std::max(row.max_coalescence_error, std::abs(down - binomial(n, 2)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace afp
