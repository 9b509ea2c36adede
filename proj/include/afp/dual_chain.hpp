#pragma once

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "afp/mechanisms.hpp"
#include "afp/rng.hpp"

namespace afp {

using LambdaMeasure = MeasureOn01;

inline constexpr int kCemetery = -1;

inline double binomial(long n, long k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (long j = 1; j <= k; ++j) c = c * static_cast<double>(n - k + j) / static_cast<double>(j);
    if (!std::isfinite(c)) throw CapacityExceeded("binomial coefficient overflow", n);
    return c;
}

struct DerivedMeasures {
    LambdaMeasure lambda1;
    MeasureOn01 gamma1;
    MeasureOn01 rho2;
};

inline DerivedMeasures derived_measures(const PopulationModel& model) {
    model.validate();
    const double z = model.z;
    auto weighted = [z](const AtomicMeasure& m, auto factor) {
        std::vector<Atom> out;
        for (const Atom& a : m.atoms()) {
            double u = tz_map(a.location, z);
            out.push_back({u, factor(u) * a.mass});
        }
        return out;
    };
    auto lam = [z](double u) { return z * u * u; };
    auto lin = [](double u) { return u; };
    return {MeasureOn01(model.mech1.c / z, weighted(model.mech1.m, lam)),
            MeasureOn01(model.imm1.eta / z, weighted(model.imm1.nu, lin)),
            MeasureOn01(model.imm2.eta / z, weighted(model.imm2.nu, lin))};
}

inline double rate_lambda_bar(long i, long k, const LambdaMeasure& L) {
    if (k < 2 || k > i) throw InvalidParameter("rate_lambda_bar needs 2 <= k <= i");
    double s = k == 2 ? L.mass_at_zero() : 0.0;
    for (const Atom& a : L.atoms())
        s += a.mass * std::pow(1.0 - a.location, static_cast<double>(i - k)) *
             std::pow(a.location, static_cast<double>(k - 2));
    return s;
}

inline double rate_mu_bar(long i, long k, const MeasureOn01& G) {
    if (k < 1 || k > i) throw InvalidParameter("rate_mu_bar needs 1 <= k <= i");
    double s = k == 1 ? G.mass_at_zero() : 0.0;
    for (const Atom& a : G.atoms())
        s += a.mass * std::pow(1.0 - a.location, static_cast<double>(i - k)) *
             std::pow(a.location, static_cast<double>(k - 1));
    return s;
}

/** Killing rate: integral of (1-(1-u)^k)/u against rho2; the atom at 0 gives k. */
inline double rate_alpha(long k, const MeasureOn01& rho) {
    if (k < 1) throw InvalidParameter("rate_alpha needs k >= 1");
    double s = static_cast<double>(k) * rho.mass_at_zero();
    for (const Atom& a : rho.atoms())
        s += a.mass * -std::expm1(static_cast<double>(k) * std::log1p(-a.location)) / a.location;
    return s;
}

/** Coalescent merger rate lambda_{n,i} of a Lambda-coalescent. */
inline double coalescent_rates(const LambdaMeasure& L, long n, long i) {
    if (i < 2 || i > n) throw InvalidParameter("coalescent_rates needs 2 <= i <= n");
    return rate_lambda_bar(n, i, L);
}

struct SelectionTerms {
    double s = 0.0;
    std::vector<std::vector<double>> kappa; // kappa[i][k], 2 <= k <= i
    std::vector<double> beta;               // beta[k], 1 <= k
};

namespace detail {

// Sums of v (1-u)^{i-k} u^k over the atoms of T_z(m), split at w = 1.
struct LambdaSums {
    double small = 0.0; // atoms with w < 1, i.e. u < 1/(1+z)
    double all = 0.0;
};

inline LambdaSums lambda_sums(const AtomicMeasure& m, double z, long i, long k) {
    LambdaSums out;
    for (const Atom& a : m.atoms()) {
        double u = tz_map(a.location, z);
        double term = a.mass * std::pow(1.0 - u, static_cast<double>(i - k)) * std::pow(u, static_cast<double>(k));
        out.all += term;
        if (a.location < 1.0) out.small += term;
    }
    return out;
}

} // namespace detail

inline SelectionTerms selection_terms(const PopulationModel& model, long nmax) {
    model.validate();
    if (nmax < 1) throw InvalidParameter("nmax must be positive");
    const double z = model.z;
    const auto& m1 = model.mech1.m;
    const auto& m2 = model.mech2.m;
    SelectionTerms st;
    auto drift_sum = [z](const AtomicMeasure& m) {
        return integrate(m, [z](double w) { double u = w / (w + z); return u * u / (1.0 - u); },
                         Region::below_one());
    };
    st.s = 2.0 * (model.mech1.c - model.mech2.c) / z + (model.mech1.b - model.mech2.b) +
           z * (drift_sum(m1) - drift_sum(m2));
    st.kappa.assign(static_cast<std::size_t>(nmax) + 1, {});
    st.beta.assign(static_cast<std::size_t>(nmax) + 1, 0.0);
    for (long i = 1; i <= nmax; ++i) {
        auto& row = st.kappa[static_cast<std::size_t>(i)];
        row.assign(static_cast<std::size_t>(i) + 1, 0.0);
        for (long k = 2; k <= i; ++k) {
            auto a = detail::lambda_sums(m1, z, i, k);
            auto b = detail::lambda_sums(m2, z, i, k);
            double v = z * (static_cast<double>(k) * (a.small - b.small) - (a.all - b.all));
            if (k == 2) v += (model.mech1.c - model.mech2.c) / z;
            row[static_cast<std::size_t>(k)] = v;
        }
        auto a = detail::lambda_sums(m1, z, i, 1);
        auto b = detail::lambda_sums(m2, z, i, 1);
        st.beta[static_cast<std::size_t>(i)] = -static_cast<double>(i) * z * ((a.all - b.all) - (a.small - b.small));
    }
    return st;
}

/** Rate table of the dual chain on {0, 1, ..., nmax} plus the cemetery. */
struct DualRates {
    long nmax = 0;
    DerivedMeasures measures;
    SelectionTerms selection;
    std::vector<std::vector<double>> down; // down[i][j], 0 <= j < i
    std::vector<double> up;                // i -> i+1
    std::vector<double> kill;              // i -> cemetery
    bool validated = false;

    double rate(long i, long j) const {
        if (i < 1 || i > nmax) return 0.0;
        if (j == kCemetery) return kill[static_cast<std::size_t>(i)];
        if (j == i + 1) return up[static_cast<std::size_t>(i)];
        if (j >= 0 && j < i) return down[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        return 0.0;
    }

    double total_rate(long i) const {
        if (i < 1 || i > nmax) return 0.0;
        double s = up[static_cast<std::size_t>(i)] + kill[static_cast<std::size_t>(i)];
        for (double q : down[static_cast<std::size_t>(i)]) s += q;
        return s;
    }
};

struct NegativeRate {
    long i;
    long j;
    double value;
};

struct NonnegativityReport {
    std::vector<NegativeRate> entries;
};

/** Builds the table without checking signs. */
inline DualRates assemble_rates(const PopulationModel& model, long nmax) {
    if (nmax < 1) throw InvalidParameter("nmax must be positive");
    DualRates q;
    q.nmax = nmax;
    q.measures = derived_measures(model);
    q.selection = selection_terms(model, nmax);
    const auto& L = q.measures.lambda1;
    const auto& G = q.measures.gamma1;
    auto n = static_cast<std::size_t>(nmax) + 1;
    q.down.assign(n, {});
    q.up.assign(n, 0.0);
    q.kill.assign(n, 0.0);
    for (long i = 1; i <= nmax; ++i) {
        auto si = static_cast<std::size_t>(i);
        auto& row = q.down[si];
        row.assign(si, 0.0);
        row[0] = rate_mu_bar(i, i, G);
        for (long j = 1; j <= i - 1; ++j)
            row[static_cast<std::size_t>(j)] =
                binomial(i, i - j) * rate_mu_bar(i, i - j, G) + binomial(i, i - j + 1) * rate_lambda_bar(i, i - j + 1, L);
        double up = q.selection.s * static_cast<double>(i) + q.selection.beta[si];
        for (long k = 2; k <= i; ++k) up += binomial(i, k) * q.selection.kappa[si][static_cast<std::size_t>(k)];
        q.up[si] = up;
        q.kill[si] = rate_alpha(i, q.measures.rho2);
    }
    return q;
}

inline NonnegativityReport negative_entries(const DualRates& q) {
    NonnegativityReport rep;
    for (long i = 1; i <= q.nmax; ++i) {
        auto si = static_cast<std::size_t>(i);
        for (long j = 0; j < i; ++j)
            if (q.down[si][static_cast<std::size_t>(j)] < 0.0) rep.entries.push_back({i, j, q.down[si][static_cast<std::size_t>(j)]});
        if (q.up[si] < 0.0) rep.entries.push_back({i, i + 1, q.up[si]});
        if (q.kill[si] < 0.0) rep.entries.push_back({i, kCemetery, q.kill[si]});
    }
    return rep;
}

inline std::variant<DualRates, NonnegativityReport> build_qmatrix(const PopulationModel& model, long nmax) {
    DualRates q = assemble_rates(model, nmax);
    NonnegativityReport rep = negative_entries(q);
    if (!rep.entries.empty()) return rep;
    q.validated = true;
    return q;
}

/** Sum over j of q_{n,j} (r^j - r^n), with r^cemetery = 0. */
inline double generator_dual(const DualRates& q, double r, long n) {
    if (n < 0 || n > q.nmax) throw InvalidParameter("state outside the rate table");
    if (n == 0) return 0.0;
    auto sn = static_cast<std::size_t>(n);
    double rn = std::pow(r, static_cast<double>(n));
    double s = 0.0;
    for (long j = 0; j < n; ++j) s += q.down[sn][static_cast<std::size_t>(j)] * (std::pow(r, static_cast<double>(j)) - rn);
    s += q.up[sn] * (rn * r - rn);
    s += q.kill[sn] * (0.0 - rn);
    return s;
}

struct ChainPath {
    std::vector<double> times;
    std::vector<long> states;

    long state_at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return states.front();
        return states[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

/** CTMC sampler over a validated rate table. */
class DualSampler {
public:
    explicit DualSampler(const DualRates& q) : nmax_(q.nmax) {
        if (!q.validated) throw InvalidParameter("dual rates are not validated");
        rows_.resize(static_cast<std::size_t>(q.nmax) + 1);
        for (long i = 1; i <= q.nmax; ++i) {
            Row& row = rows_[static_cast<std::size_t>(i)];
            double s = 0.0;
            auto add = [&](long j, double rate) {
                if (rate <= 0.0) return;
                s += rate;
                row.targets.push_back(j);
                row.cum.push_back(s);
            };
            for (long j = 0; j < i; ++j) add(j, q.rate(i, j));
            add(i + 1, q.rate(i, i + 1));
            add(kCemetery, q.rate(i, kCemetery));
            row.total = s;
        }
    }

    /** Advances state n over a span of length dt; returns the new state. */
    template <class OnJump>
    long run(long n, double dt, Stream& rng, OnJump&& on_jump) const {
        double t = 0.0;
        for (;;) {
            if (n <= 0) return n;
            if (n > nmax_) throw CapacityExceeded("dual chain exceeded nmax", n);
            const Row& row = rows_[static_cast<std::size_t>(n)];
            if (!(row.total > 0.0)) return n;
            t += rng.exponential(row.total);
            if (t > dt) return n;
            double target = rng.uniform() * row.total;
            auto it = std::lower_bound(row.cum.begin(), row.cum.end(), target);
            if (it == row.cum.end()) --it;
            n = row.targets[static_cast<std::size_t>(it - row.cum.begin())];
            if (n > nmax_) throw CapacityExceeded("dual chain exceeded nmax", n);
            on_jump(t, n);
        }
    }

    long run(long n, double dt, Stream& rng) const {
        return run(n, dt, rng, [](double, long) {});
    }

private:
    struct Row {
        std::vector<long> targets;
        std::vector<double> cum;
        double total = 0.0;
    };
    long nmax_;
    std::vector<Row> rows_;
};

inline ChainPath simulate_dual(const DualRates& q, long n0, double horizon, std::uint64_t seed,
                               std::uint64_t stream = stream_id(StreamSpace::dual, 0)) {
    if (n0 < 0 || n0 > q.nmax) throw InvalidParameter("n0 outside the rate table");
    if (!(horizon > 0.0)) throw InvalidConfig("horizon must be positive");
    DualSampler sampler(q);
    Stream rng(seed, stream);
    ChainPath path;
    path.times.push_back(0.0);
    path.states.push_back(n0);
    sampler.run(n0, horizon, rng, [&](double t, long n) {
        path.times.push_back(t);
        path.states.push_back(n);
    });
    return path;
}

/** Block-counting process of a Lambda-coalescent; absorbs at one block. */
inline ChainPath simulate_block_counting(const LambdaMeasure& L, long n0, double horizon, std::uint64_t seed,
                                         std::uint64_t stream = stream_id(StreamSpace::coalescent, 0)) {
    if (n0 < 1) throw InvalidParameter("n0 must be positive");
    Stream rng(seed, stream);
    ChainPath path;
    path.times.push_back(0.0);
    path.states.push_back(n0);
    std::vector<std::vector<double>> cum(static_cast<std::size_t>(n0) + 1);
    for (long n = 2; n <= n0; ++n) {
        double s = 0.0;
        for (long i = 2; i <= n; ++i) cum[static_cast<std::size_t>(n)].push_back(s += binomial(n, i) * coalescent_rates(L, n, i));
    }
    long n = n0;
    double t = 0.0;
    while (n > 1) {
        const auto& c = cum[static_cast<std::size_t>(n)];
        if (!(c.back() > 0.0)) break;
        t += rng.exponential(c.back());
        if (t > horizon) break;
        auto it = std::lower_bound(c.begin(), c.end(), rng.uniform() * c.back());
        if (it == c.end()) --it;
        long merged = static_cast<long>(it - c.begin()) + 2;
        n = n - merged + 1;
        path.times.push_back(t);
        path.states.push_back(n);
    }
    return path;
}

} // namespace afp
