#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "afp/afp_sim.hpp"
#include "afp/cbi_sim.hpp"
#include "afp/culling.hpp"
#include "afp/dual_chain.hpp"
#include "afp/duality.hpp"
#include "afp/fixtures.hpp"
#include "afp/homeo.hpp"
#include "afp/limits.hpp"
#include "afp/stats.hpp"

namespace afp::acceptance {

struct Result {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct Options {
    std::uint64_t seed = kDefaultSeed;
};

namespace detail {

inline std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

inline double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/** Generator identity for moments, exact algebra on the two-atom model and random models. */
inline Result generator_identity(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{1, "generator-duality identity", false, "", 0.0};
    std::vector<PopulationModel> models{two_atom_model()};
    Stream rng(o.seed, stream_id(StreamSpace::misc, 1));
    long attempts = 0;
    while (models.size() < 21 && attempts < 100000) {
        ++attempts;
        PopulationModel m = random_model(rng);
        if (std::holds_alternative<DualRates>(build_qmatrix(m, 6))) models.push_back(m);
    }
    double worst = 0.0;
    for (const auto& m : models) {
        DualRates q = std::get<DualRates>(build_qmatrix(m, 6));
        for (int k = 1; k <= 9; ++k)
            for (long n = 1; n <= 6; ++n) {
                double r = 0.1 * k;
                double lhs = generator_afp(m, Polynomial::monomial(static_cast<int>(n)), r);
                worst = std::max(worst, std::abs(lhs - generator_dual(q, r, n)));
            }
    }
    res.seconds = detail::since(t0);
    res.pass = models.size() == 21 && worst <= 1e-9 && res.seconds < 1.0;
    res.detail = std::to_string(models.size()) + " models, max |L r^n - Q r^n| = " + detail::sci(worst);
    return res;
}

inline Result moment_duality(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{2, "Monte Carlo moment duality", false, "", 0.0};
    DualityOptions d;
    d.seed = o.seed;
    DualityReport rep = duality_report(two_atom_model(), d);
    double worst = 0.0;
    for (const auto& c : rep.cells) worst = std::max(worst, std::abs(c.z_score));
    res.pass = rep.available && rep.pass;
    res.detail = std::to_string(rep.cells.size()) + " cells, " + std::to_string(rep.paths) +
                 " paths per side, max |z| = " + detail::sci(worst) + ", stages = " + std::to_string(rep.stages);
    res.seconds = detail::since(t0);
    return res;
}

inline Result homeomorphism_roundtrip(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{3, "homeomorphism roundtrip", false, "", 0.0};
    Stream rng(o.seed, stream_id(StreamSpace::misc, 3));
    double worst = 0.0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    for (int trial = 0; trial < 1000; ++trial) {
        double z = 0.1 + 50.0 * rng.uniform();
        BranchingMechanism T = random_mechanism(rng);
        BranchingMechanism back = from_lambda(to_lambda(T, z), z, tilde_drift(T));
        worst = std::max({worst, rel(back.b, T.b), rel(back.c, T.c)});
        if (back.m.size() != T.m.size()) worst = INFINITY;
        for (std::size_t i = 0; i < std::min(back.m.size(), T.m.size()); ++i)
            worst = std::max({worst, rel(back.m.atoms()[i].location, T.m.atoms()[i].location),
                              rel(back.m.atoms()[i].mass, T.m.atoms()[i].mass)});

        std::vector<Atom> atoms;
        int k = static_cast<int>(rng.uniform() * 4);
        for (int i = 0; i < k; ++i) atoms.push_back({0.01 + 0.98 * rng.uniform(), 3.0 * rng.uniform()});
        LambdaMeasure L(rng.uniform() < 0.5 ? rng.uniform() : 0.0, atoms);
        double rt = 4.0 * rng.uniform() - 2.0;
        BranchingMechanism mid = from_lambda(L, z, rt);
        LambdaMeasure L2 = to_lambda(mid, z);
        worst = std::max({worst, rel(tilde_drift(mid), rt), rel(L2.mass_at_zero(), L.mass_at_zero())});
        if (L2.atoms().size() != L.atoms().size()) worst = INFINITY;
        for (std::size_t i = 0; i < std::min(L2.atoms().size(), L.atoms().size()); ++i)
            worst = std::max({worst, rel(L2.atoms()[i].location, L.atoms()[i].location),
                              rel(L2.atoms()[i].mass, L.atoms()[i].mass)});

        PopulationModel model;
        model.mech1 = T;
        model.z = z;
        LambdaMeasure derived = derived_measures(model).lambda1;
        LambdaMeasure direct = to_lambda(T, z);
        for (long i = 2; i <= 8; ++i)
            for (long kk = 2; kk <= i; ++kk)
                worst = std::max(worst, rel(rate_lambda_bar(i, kk, derived), coalescent_rates(direct, i, kk)));
    }
    res.seconds = detail::since(t0);
    res.pass = worst <= 1e-12 && res.seconds < 1.0;
    res.detail = "1000 triplets, max relative error " + detail::sci(worst);
    return res;
}

/** E[sup_{t<=1} |R - R_inf|^2] for the fixed-jump model at several z. */
inline Result large_population(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{4, "large-population limit", false, "", 0.0};
    const double w = 0.3 * 10.0 / 0.7, r0 = 0.5;
    const long paths = 1000;
    std::vector<double> zs{1e2, 1e3, 1e4};
    std::vector<Estimate> est;
    for (double z : zs) {
        PopulationModel model = two_atom_model_fixed_w(z, w, 1.0, 1.2);
        LimitParams lp = limit_params(model, r0);
        AfpProcess proc(model);
        auto sups = parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
            Stream rng(o.seed, stream_id(StreamSpace::afp, (static_cast<std::uint64_t>(std::log10(z)) << 40) | p));
            double r = r0, prev = r0, sup = 0.0;
            proc.advance(r, 0.0, 1.0, 1.0, rng, [&](double t, JumpKind, double) {
                double lim = logistic_limit(lp, t);
                sup = std::max({sup, std::abs(prev - lim), std::abs(r - lim)});
                prev = r;
            });
            sup = std::max(sup, std::abs(r - logistic_limit(lp, 1.0)));
            return sup * sup;
        });
        RunningStats st;
        for (double s : sups) st.add(s);
        est.push_back(estimate_of(st));
    }
    bool ok = true;
    std::ostringstream os;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        os << "z=" << zs[i] << ": " << detail::sci(est[i].mean) << " (se " << detail::sci(est[i].se) << ") ";
        if (i > 0 && !(est[i - 1].mean - est[i].mean > 3.0 * std::hypot(est[i - 1].se, est[i].se))) ok = false;
    }
    double envelope = 10.0 * est[1].mean * std::sqrt(0.1);
    os << "; envelope " << (est[2].mean <= envelope ? "met" : "not met");
    res.pass = ok;
    res.detail = os.str();
    res.seconds = detail::since(t0);
    return res;
}

/** Neutral diffusion-plus-jump model used for the fluctuation check. */
inline PopulationModel neutral_mixed_model(double z) {
    PopulationModel m;
    m.z = z;
    m.mech1.c = 1.0;
    m.mech1.m = AtomicMeasure{{0.5, 0.5}, {2.0, 0.2}};
    m.mech1.b = 0.4; // psi'(0+) = 0.4 - 2 * 0.2 = 0
    m.mech2.c = 0.5;
    m.mech2.m = AtomicMeasure{{1.5, 0.3}};
    m.mech2.b = 0.45; // psi'(0+) = 0.45 - 1.5 * 0.3 = 0
    return m;
}

inline Result fluctuations(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{5, "fluctuation covariance", false, "", 0.0};
    const double z = 1e4, r0 = 0.4;
    PopulationModel model = neutral_mixed_model(z);
    LimitParams lp = limit_params(model, r0);
    std::vector<double> ts{0.25, 0.5, 1.0};
    auto rows = afp_samples(model, r0, ts, 10000, o.seed, 1e-3);
    bool ok = true;
    std::ostringstream os;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        RunningStats st;
        for (const auto& row : rows) st.add(std::sqrt(z) * (row[k] - logistic_limit(lp, ts[k])));
        double target = fluct_cov(lp, ts[k], ts[k]);
        double tol = std::max(0.1 * target, 3.0 * variance_se(st));
        if (std::abs(st.variance() - target) > tol) ok = false;
        os << "t=" << ts[k] << ": " << detail::sci(st.variance()) << " vs " << detail::sci(target) << " ";
    }
    res.pass = ok;
    res.detail = os.str();
    res.seconds = detail::since(t0);
    return res;
}

inline Result culling_convergence(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{6, "culling convergence", false, "", 0.0};
    const PopulationModel model = two_atom_model();
    const double r0 = 0.5;
    const long paths = 10000;
    auto ref_rows = afp_samples(model, r0, {1.0}, paths, o.seed, 1e-3);
    std::vector<double> ref;
    RunningStats ref_st;
    for (const auto& row : ref_rows) {
        ref.push_back(row[0]);
        ref_st.add(row[0]);
    }
    std::vector<long> ns{4, 16, 64};
    std::vector<double> diff, diff_se, ks;
    for (long n : ns) {
        CullingConfig cfg;
        cfg.n = n;
        CullingKernel kernel(model, cfg);
        auto vals = parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
            Stream rng(o.seed, stream_id(StreamSpace::culling, (static_cast<std::uint64_t>(n) << 32) | p));
            double r = r0, t = 0.0;
            for (;;) {
                t += rng.exponential(static_cast<double>(n));
                if (t > 1.0) return r;
                r = kernel.step(r, rng);
            }
        });
        RunningStats st;
        for (double v : vals) st.add(v);
        diff.push_back(std::abs(st.mean() - ref_st.mean()));
        diff_se.push_back(std::hypot(st.stderr_mean(), ref_st.stderr_mean()));
        ks.push_back(ks_statistic(vals, ref));
    }
    bool ok = true;
    std::ostringstream os;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        os << "n=" << ns[i] << ": |dmean| " << detail::sci(diff[i]) << " (se " << detail::sci(diff_se[i]) << ") ks " << detail::sci(ks[i]) << "; ";
        if (i > 0) {
            if (diff[i] > diff[i - 1] + 3.0 * std::hypot(diff_se[i], diff_se[i - 1])) ok = false;
            if (!(ks[i] < ks[i - 1])) ok = false;
        }
    }
    res.pass = ok;
    res.detail = os.str();
    res.seconds = detail::since(t0);
    return res;
}

inline Result kingman(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{7, "Kingman absorption time", false, "", 0.0};
    LambdaMeasure L(1.0, {});
    auto times = parallel_map(100000, [&](std::size_t p) {
        ChainPath path = simulate_block_counting(L, 10, INFINITY, o.seed, stream_id(StreamSpace::coalescent, p));
        return path.times.back();
    });
    RunningStats st;
    for (double t : times) st.add(t);
    res.pass = std::abs(st.mean() - 1.8) <= 3.0 * st.stderr_mean();
    res.detail = "mean " + detail::sci(st.mean()) + " (se " + detail::sci(st.stderr_mean()) + ") vs 1.8";
    res.seconds = detail::since(t0);
    return res;
}

inline Result mechanism_analytics(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{8, "mechanism analytics", false, "", 0.0};
    BranchingMechanism feller{0.0, 0.7, {}};
    double worst = 0.0;
    for (double lam : {0.1, 1.0, 5.0, 20.0})
        for (double t : {0.1, 0.5, 1.0, 3.0})
            worst = std::max(worst, std::abs(cumulant_solve(feller, lam, t) - lam / (1.0 + 0.7 * lam * t)));
    bool ok = worst <= 1e-8;
    std::ostringstream os;
    os << "Riccati max err " << detail::sci(worst) << "; ";

    struct Fixture {
        const char* name;
        BranchingMechanism mech;
        ImmigrationMechanism imm;
        double x0;
    };
    std::vector<Fixture> fixtures{
        {"diffusion", {0.5, 0.5, {}}, {}, 1.0},
        {"pure-jump", {0.0, 0.0, AtomicMeasure{{1.0, 0.5}}}, {}, 1.0},
        {"immigration", {1.0, 0.3, AtomicMeasure{{0.4, 0.5}, {1.5, 0.3}}}, {0.5, AtomicMeasure{{0.8, 0.4}}}, 1.0},
    };
    const long paths = 20000;
    int idx = 0;
    long worst_cell = 0;
    double worst_z = 0.0;
    for (const auto& fx : fixtures) {
        CbiProcess proc(fx.mech, fx.imm);
        std::vector<double> ts{0.5, 1.0};
        auto rows = parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
            Stream rng(o.seed, stream_id(StreamSpace::cbi, (static_cast<std::uint64_t>(idx) << 40) | p));
            std::vector<double> out;
            double x = fx.x0, t = 0.0;
            const double dt = 2e-4;
            auto ignore = [](double, const char*, double) {};
            for (double target : ts) {
                while (t < target - 1e-12) {
                    double h = std::min(dt, target - t);
                    proc.step(x, t, h, rng, 1e12, ignore);
                    t += h;
                }
                out.push_back(x);
            }
            return out;
        });
        for (std::size_t k = 0; k < ts.size(); ++k)
            for (double lam : {0.5, 2.0}) {
                RunningStats st;
                for (const auto& row : rows) st.add(std::exp(-lam * row[k]));
                double exact = laplace_cbi(fx.mech, fx.imm, fx.x0, lam, ts[k]);
                double zsc = std::abs(st.mean() - exact) / st.stderr_mean();
                worst_z = std::max(worst_z, zsc);
                ++worst_cell;
                if (zsc > 3.0) ok = false;
            }
        ++idx;
    }
    os << worst_cell << " Laplace cells, max |z| " << detail::sci(worst_z);
    res.pass = ok;
    res.detail = os.str();
    res.seconds = detail::since(t0);
    return res;
}

inline Result symmetry(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{9, "symmetry degeneracies", false, "", 0.0};
    PopulationModel sym = two_atom_model(10.0, 1.0, 1.0, 0.3, 0.3);
    Stream rng(o.seed, stream_id(StreamSpace::misc, 9));
    BranchingMechanism mixed = random_mechanism(rng);
    PopulationModel sym2;
    sym2.mech1 = sym2.mech2 = mixed;
    sym2.z = 3.0;
    bool ok = true;
    for (const auto& m : {sym, sym2}) {
        DualRates q = assemble_rates(m, 64);
        for (long i = 1; i <= q.nmax; ++i)
            if (q.rate(i, i + 1) != 0.0) ok = false;
        for (int k = 0; k <= 20; ++k)
            if (effective_drift(m, 0.05 * k) != 0.0) ok = false;
    }
    DualityOptions d;
    d.seed = o.seed;
    DualityReport rep = duality_report(sym, d);
    ok = ok && rep.available && rep.pass;
    res.pass = ok;
    res.detail = std::string("branching rates and drift zero: ") + (ok ? "yes" : "no") +
                 ", symmetric duality report " + (rep.pass ? "passes" : "fails");
    res.seconds = detail::since(t0);
    return res;
}

inline Result epsilon_gap(const Options&) {
    auto t0 = std::chrono::steady_clock::now();
    Result res{10, "epsilon-sequence rate gap", false, "", 0.0};
    auto rows = epsilon_gap_probe(1e4, 1.0, {1e-2, 1e-3, 1e-4}, 6, true);
    const auto& last = rows.back();
    res.pass = last.max_branching_error <= 1e-6 && last.max_coalescence_error <= 1e-6;
    res.detail = "at eps=1e-4 max |q_{n,n+1} - n/s| = " + detail::sci(last.max_branching_error) +
                 ", max |q_{n,n-1} - C(n,2)| = " + detail::sci(last.max_coalescence_error);
    res.seconds = detail::since(t0);
    return res;
}

inline std::vector<std::function<Result(const Options&)>> all_criteria() {
    return {generator_identity, moment_duality,      homeomorphism_roundtrip, large_population, fluctuations,
            culling_convergence, kingman, mechanism_analytics, symmetry, epsilon_gap};
}

inline std::string format(const Result& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " (" << std::fixed;
    os.precision(2);
    os << r.seconds << " s)";
    return os.str();
}

} // namespace afp::acceptance
