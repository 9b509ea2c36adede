#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "afp/afp_sim.hpp"
#include "afp/dual_chain.hpp"
#include "afp/json_io.hpp"
#include "afp/stats.hpp"

namespace afp {

struct DualityOptions {
    std::vector<double> times{0.25, 0.5, 1.0};
    std::vector<long> moments{1, 2, 3, 4};
    double r0 = 0.5;
    long paths = 100000;
    std::uint64_t seed = kDefaultSeed;
    double dt = 1e-3;
    bool retry = true;
    long nmax = 64;
    double threshold = 3.0;
};

struct DualityCell {
    double t;
    long n;
    double lhs_mean, lhs_se, rhs_mean, rhs_se, z_score;
    bool pass;
};

struct DualityReport {
    std::string model_digest;
    bool available = true;
    std::vector<NegativeRate> negative_rates;
    std::vector<DualityCell> cells;
    bool pass = false;
    long paths = 0;
    std::uint64_t seed = 0;
    int stages = 0;
    long stage1_failures = 0;
    long nmax = 0;
};

namespace detail {

inline std::vector<double> sorted_times(std::vector<double> times) {
    for (double t : times)
        if (!(t >= 0.0)) throw InvalidParameter("times must be nonnegative");
    std::sort(times.begin(), times.end());
    return times;
}

} // namespace detail

/** Frequency-process values at each time (sorted ascending), one row per path. */
inline std::vector<std::vector<double>> afp_samples(const PopulationModel& model, double r0,
                                                    const std::vector<double>& times, long paths,
                                                    std::uint64_t seed, double dt) {
    detail::check_frequency(r0);
    AfpProcess proc(model);
    auto ts = detail::sorted_times(times);
    return parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
        Stream rng(seed, stream_id(StreamSpace::afp, p));
        std::vector<double> row;
        row.reserve(ts.size());
        double r = r0, t = 0.0;
        for (double target : ts) {
            proc.advance(r, t, target, dt, rng, [](double, JumpKind, double) {});
            t = target;
            row.push_back(r);
        }
        return row;
    });
}

/** Dual-chain states at each time (sorted ascending), one row per path. */
inline std::vector<std::vector<long>> dual_samples(const DualRates& q, long n0, const std::vector<double>& times,
                                                   long paths, std::uint64_t seed) {
    DualSampler sampler(q);
    auto ts = detail::sorted_times(times);
    return parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
        Stream rng(seed, stream_id(StreamSpace::dual, (static_cast<std::uint64_t>(n0) << 36) | p));
        std::vector<long> row;
        double t = 0.0;
        long n = n0;
        for (double target : ts) {
            n = sampler.run(n, target - t, rng);
            t = target;
            row.push_back(n);
        }
        return row;
    });
}

inline double dual_moment_value(double r0, long n) {
    if (n == kCemetery) return 0.0;
    return std::pow(r0, static_cast<double>(n));
}

inline Estimate estimate_moment_afp(const PopulationModel& model, double r0, long n, double t, long paths,
                                    std::uint64_t seed, double dt = 1e-3) {
    if (n < 0) throw InvalidParameter("moment order must be nonnegative");
    if (n == 0) return {1.0, 0.0};
    RunningStats st;
    for (const auto& row : afp_samples(model, r0, {t}, paths, seed, dt)) st.add(std::pow(row[0], static_cast<double>(n)));
    return estimate_of(st);
}

inline Estimate estimate_moment_dual(const DualRates& q, double r0, long n0, double t, long paths,
                                     std::uint64_t seed) {
    if (n0 == 0) return {1.0, 0.0};
    RunningStats st;
    for (const auto& row : dual_samples(q, n0, {t}, paths, seed)) st.add(dual_moment_value(r0, row[0]));
    return estimate_of(st);
}

/** As above, rebuilding the table with doubled nmax whenever the chain outgrows it. */
inline Estimate estimate_moment_dual(const PopulationModel& model, long nmax, double r0, long n0, double t,
                                     long paths, std::uint64_t seed) {
    for (long cap = std::max(nmax, n0); cap <= (1L << 20); cap *= 2) {
        auto built = build_qmatrix(model, cap);
        if (!std::holds_alternative<DualRates>(built)) throw InvalidParameter("dual rates are negative");
        try {
            return estimate_moment_dual(std::get<DualRates>(built), r0, n0, t, paths, seed);
        } catch (const CapacityExceeded&) {
        }
    }
    throw CapacityExceeded("dual chain outgrew the largest rate table", 1L << 20);
}

namespace detail {

inline std::vector<DualityCell> duality_cells(const PopulationModel& model, const DualRates& q,
                                              const DualityOptions& o, std::uint64_t seed, long paths) {
    auto ts = sorted_times(o.times);
    auto lhs = afp_samples(model, o.r0, ts, paths, seed, o.dt);
    std::vector<DualityCell> cells;
    for (long n : o.moments) {
        std::vector<std::vector<long>> rhs;
        if (n > 0) rhs = dual_samples(q, n, ts, paths, seed);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            RunningStats a, b;
            if (n == 0) {
                a.add(1.0);
                b.add(1.0);
            } else {
                for (const auto& row : lhs) a.add(std::pow(row[k], static_cast<double>(n)));
                for (const auto& row : rhs) b.add(dual_moment_value(o.r0, row[k]));
            }
            double se = std::hypot(a.stderr_mean(), b.stderr_mean());
            double diff = a.mean() - b.mean();
            double zs = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY);
            bool pass = std::abs(diff) <= o.threshold * se || std::abs(diff) <= 1e-12;
            cells.push_back({ts[k], n, a.mean(), a.stderr_mean(), b.mean(), b.stderr_mean(), zs, pass});
        }
    }
    return cells;
}

} // namespace detail

/** Paired comparison against a given rate table; no retry. */
inline DualityReport duality_report_with_rates(const PopulationModel& model, const DualRates& q,
                                               const DualityOptions& o) {
    DualityReport rep;
    rep.model_digest = digest(json(model));
    rep.paths = o.paths;
    rep.seed = o.seed;
    rep.nmax = q.nmax;
    rep.stages = 1;
    rep.cells = detail::duality_cells(model, q, o, o.seed, o.paths);
    rep.pass = std::all_of(rep.cells.begin(), rep.cells.end(), [](const DualityCell& c) { return c.pass; });
    return rep;
}

/**
 * Full duality check. Negative rates give an unavailable report. A failing
 * first stage is rerun once with fresh seeds and four times the paths; the
 * verdict is that of the last stage run.
 */
inline DualityReport duality_report(const PopulationModel& model, const DualityOptions& o) {
    long cap = std::max<long>(o.nmax, *std::max_element(o.moments.begin(), o.moments.end()));
    for (; cap <= (1L << 20); cap *= 2) {
        auto built = build_qmatrix(model, cap);
        if (std::holds_alternative<NonnegativityReport>(built)) {
            DualityReport rep;
            rep.model_digest = digest(json(model));
            rep.available = false;
            rep.negative_rates = std::get<NonnegativityReport>(built).entries;
            rep.seed = o.seed;
            rep.nmax = cap;
            return rep;
        }
        const DualRates& q = std::get<DualRates>(built);
        try {
            DualityReport rep = duality_report_with_rates(model, q, o);
            if (rep.pass || !o.retry) return rep;
            DualityOptions o2 = o;
            o2.seed = mix64(o.seed ^ 0x5EEDF00DULL);
            o2.paths = 4 * o.paths;
            DualityReport rep2 = duality_report_with_rates(model, q, o2);
            rep2.stages = 2;
            rep2.stage1_failures = std::count_if(rep.cells.begin(), rep.cells.end(), [](const DualityCell& c) { return !c.pass; });
            return rep2;
        } catch (const CapacityExceeded&) {
        }
    }
    throw CapacityExceeded("dual chain outgrew the largest rate table", 1L << 20);
}

inline void to_json(json& j, const DualityReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"t", c.t}, {"n", c.n}, {"lhs_mean", c.lhs_mean}, {"lhs_se", c.lhs_se},
                         {"rhs_mean", c.rhs_mean}, {"rhs_se", c.rhs_se}, {"z_score", c.z_score}, {"pass", c.pass}});
    json neg = json::array();
    for (const auto& e : r.negative_rates) neg.push_back({{"i", e.i}, {"j", e.j}, {"value", e.value}});
    j = json{{"model_digest", r.model_digest}, {"available", r.available}, {"negative_rates", neg},
             {"cells", cells}, {"pass", r.pass}, {"paths", r.paths}, {"seed", r.seed},
             {"stages", r.stages}, {"stage1_failures", r.stage1_failures}, {"nmax", r.nmax}};
}

} // namespace afp
