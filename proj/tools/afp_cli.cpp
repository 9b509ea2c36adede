#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "afp/acceptance.hpp"
#include "afp/afp_sim.hpp"
#include "afp/cbi_sim.hpp"
#include "afp/culling.hpp"
#include "afp/dual_chain.hpp"
#include "afp/duality.hpp"
#include "afp/homeo.hpp"
#include "afp/json_io.hpp"
#include "afp/limits.hpp"

namespace {

using afp::json;

enum Exit { kOk = 0, kConfig = 1, kStatFail = 2, kUnavailable = 3, kNumerical = 4 };

struct StatFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string path_csv(const afp::PathSample& p) {
    std::ostringstream os;
    os << "t,value\n";
    for (std::size_t i = 0; i < p.times.size(); ++i) os << afp::fmt_double(p.times[i]) << ',' << afp::fmt_double(p.values[i]) << '\n';
    return os.str();
}

std::string events_csv(const afp::PathSample& p) {
    std::ostringstream os;
    os << "t,kind,mark\n";
    for (const auto& e : p.events) os << afp::fmt_double(e.time) << ',' << e.kind << ',' << afp::fmt_double(e.mark) << '\n';
    return os.str();
}

std::string path_jsonl(const afp::PathSample& p, std::uint64_t seed, std::uint64_t stream, const std::string& digest) {
    std::ostringstream os;
    json base{{"seed", seed}, {"stream_id", stream}, {"config_digest", digest}};
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        json rec = base;
        rec["type"] = "sample";
        rec["t"] = p.times[i];
        rec["value"] = p.values[i];
        os << rec.dump() << '\n';
    }
    for (const auto& e : p.events) {
        json rec = base;
        rec["type"] = "event";
        rec["t"] = e.time;
        rec["kind"] = e.kind;
        rec["mark"] = e.mark;
        os << rec.dump() << '\n';
    }
    return os.str();
}

void write_path(const afp::PathSample& p, const std::string& out, const std::string& format, std::uint64_t seed,
                std::uint64_t stream, const std::string& digest) {
    if (format == "jsonl") {
        afp::write_atomically(out, path_jsonl(p, seed, stream, digest));
    } else {
        afp::write_atomically(out, path_csv(p));
        afp::write_atomically(out + ".events.csv", events_csv(p));
    }
}

afp::PopulationModel load_model(const std::string& path) {
    try {
        return afp::read_json_file(path).get<afp::PopulationModel>();
    } catch (const json::exception& e) {
        throw afp::InvalidConfig("bad model file " + path + ": " + e.what());
    }
}

template <class T>
T load_as(const std::string& path) {
    try {
        return afp::read_json_file(path).get<T>();
    } catch (const json::exception& e) {
        throw afp::InvalidConfig("bad input file " + path + ": " + e.what());
    }
}

void summary(json j) {
    j["status"] = j.value("status", "ok");
    std::cout << j.dump() << std::endl;
}

// Turns the keys of a JSON config file into command-line arguments.
std::vector<std::string> config_args(const std::string& path, const std::string& sub) {
    json cfg = afp::read_json_file(path);
    if (!cfg.is_object()) throw afp::InvalidConfig("config must be a JSON object");
    std::vector<std::string> args;
    for (auto& [key, value] : cfg.items()) {
        if (key == "schema") {
            if (value != "afp/" + sub + "/v1") throw afp::InvalidConfig("config schema must be afp/" + sub + "/v1");
            continue;
        }
        args.push_back("--" + key);
        if (value.is_boolean()) {
            if (!value.get<bool>()) args.pop_back();
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ',';
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            args.push_back(joined);
        } else {
            args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return args;
}

int run(int argc, char** argv) {
    CLI::App app{"Simulation and verification tools for asymmetric frequency processes"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::uint64_t seed = afp::kDefaultSeed;
    std::string config_path;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--config", config_path, "JSON config file whose keys mirror the options");
    };

    std::string model_path, out, format = "csv";
    double dt = 1e-3, horizon = 1.0, cap = 1e12, r0 = 0.5, x0 = 1.0;
    std::uint64_t stream = 0;
    long paths = 10000, nmax = 64, n0 = 2;

    // simulate-cbi
    auto* cbi = app.add_subcommand("simulate-cbi", "simulate one CBI path");
    std::string mech_path, imm_path;
    cbi->add_option("--mech", mech_path, "branching mechanism JSON")->required();
    cbi->add_option("--imm", imm_path, "immigration mechanism JSON");
    cbi->add_option("--x0", x0);
    cbi->add_option("--dt", dt);
    cbi->add_option("--horizon", horizon);
    cbi->add_option("--cap", cap);
    cbi->add_option("--stream-id", stream);
    cbi->add_option("--out", out)->required();
    cbi->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));
    common(cbi);

    // simulate-afp
    auto* sim = app.add_subcommand("simulate-afp", "simulate one frequency-process path");
    sim->add_option("--model", model_path)->required();
    sim->add_option("--r0", r0);
    sim->add_option("--dt", dt);
    sim->add_option("--horizon", horizon);
    sim->add_option("--stream-id", stream);
    sim->add_option("--out", out)->required();
    sim->add_option("--format", format)->check(CLI::IsMember({"csv", "jsonl"}));
    common(sim);

    // simulate-dual
    auto* dsim = app.add_subcommand("simulate-dual", "simulate one dual-chain path");
    dsim->alias("dual-simulate");
    dsim->add_option("--model", model_path)->required();
    dsim->add_option("--n0", n0);
    dsim->add_option("--horizon", horizon);
    dsim->add_option("--nmax", nmax);
    dsim->add_option("--stream-id", stream);
    dsim->add_option("--out", out)->required();
    common(dsim);

    // dual-rates
    auto* rates = app.add_subcommand("dual-rates", "dump the dual rate table");
    rates->add_option("--model", model_path)->required();
    rates->add_option("--nmax", nmax);
    rates->add_option("--out", out)->required();
    common(rates);

    // culling-converge
    auto* cull = app.add_subcommand("culling-converge", "compare culled chains with the frequency process");
    std::vector<long> ns{4, 16, 64};
    std::string holding = "exponential";
    cull->add_option("--model", model_path)->required();
    cull->add_option("--n", ns)->delimiter(',');
    cull->add_option("--r0", r0);
    cull->add_option("--horizon", horizon);
    cull->add_option("--paths", paths);
    cull->add_option("--holding", holding)->check(CLI::IsMember({"exponential", "deterministic"}));
    cull->add_option("--out", out)->required();
    common(cull);

    // large-pop
    auto* lp = app.add_subcommand("large-pop", "compare with the logistic limit for growing z");
    std::vector<double> zs{1e2, 1e3, 1e4};
    std::vector<double> times{0.25, 0.5, 1.0};
    lp->add_option("--model", model_path)->required();
    lp->add_option("--z", zs)->delimiter(',');
    lp->add_option("--times", times)->delimiter(',');
    lp->add_option("--r0", r0);
    lp->add_option("--paths", paths);
    lp->add_option("--dt", dt);
    lp->add_option("--out", out)->required();
    common(lp);

    // fluctuations
    auto* fl = app.add_subcommand("fluctuations", "compare fluctuation variance with the covariance formula");
    double zf = 1e4;
    fl->add_option("--model", model_path)->required();
    fl->add_option("--z", zf);
    fl->add_option("--times", times)->delimiter(',');
    fl->add_option("--r0", r0);
    fl->add_option("--paths", paths);
    fl->add_option("--dt", dt);
    fl->add_option("--out", out)->required();
    common(fl);

    // verify-duality
    auto* vd = app.add_subcommand("verify-duality", "paired Monte Carlo check of the moment duality");
    std::vector<long> moments{1, 2, 3, 4};
    bool no_retry = false;
    vd->add_option("--model", model_path)->required();
    vd->add_option("--paths", paths);
    vd->add_option("--r0", r0);
    vd->add_option("--times", times)->delimiter(',');
    vd->add_option("--moments", moments)->delimiter(',');
    vd->add_option("--dt", dt);
    vd->add_option("--nmax", nmax);
    vd->add_flag("--no-retry", no_retry);
    vd->add_option("--out", out)->required();
    common(vd);

    // map-homeo
    auto* mh = app.add_subcommand("map-homeo", "map between branching triplets and Lambda measures");
    std::string direction, in_path;
    double zh = 1.0, r_tilde = 0.0;
    mh->add_option("--direction", direction)->required()->check(CLI::IsMember({"to-lambda", "from-lambda"}));
    mh->add_option("--z", zh)->required();
    mh->add_option("--in", in_path)->required();
    mh->add_option("--r-tilde", r_tilde);
    mh->add_option("--out", out)->required();
    common(mh);

    // continuity-probe
    auto* cp = app.add_subcommand("continuity-probe", "distances along a sequence of triplets");
    std::string seq_path;
    std::vector<double> eps_list{1e-2, 1e-3, 1e-4};
    double zc = 1e4, s_gap = 1.0;
    bool gap_mode = false;
    cp->add_option("--sequence", seq_path, "JSON {z, target, sequence}");
    cp->add_flag("--epsilon-gap", gap_mode, "dual rate gap along the epsilon sequence");
    cp->add_option("--z", zc);
    cp->add_option("--s", s_gap);
    cp->add_option("--eps", eps_list)->delimiter(',');
    cp->add_option("--nmax", nmax);
    cp->add_option("--out", out);
    common(cp);

    // afp-generator
    auto* gen = app.add_subcommand("afp-generator", "evaluate the generator on a polynomial");
    std::vector<double> coeffs{0.0, 1.0};
    double rg = 0.5;
    gen->add_option("--model", model_path)->required();
    gen->add_option("--poly", coeffs, "coefficients in increasing degree")->delimiter(',');
    gen->add_option("--r", rg);
    common(gen);

    // acceptance
    auto* acc = app.add_subcommand("acceptance", "run the acceptance suite");
    common(acc);

    // Expand --config before the real parse so explicit flags win.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--config") {
            auto extra = config_args(args[i + 1], args.empty() ? "" : args[0]);
            args.insert(args.begin() + 1, extra.begin(), extra.end());
            break;
        }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    if (*cbi) {
        auto mech = load_as<afp::BranchingMechanism>(mech_path);
        afp::ImmigrationMechanism imm = imm_path.empty() ? afp::ImmigrationMechanism{} : load_as<afp::ImmigrationMechanism>(imm_path);
        afp::SimConfig cfg{dt, horizon, seed, cap, stream};
        auto path = afp::simulate_cbi(mech, imm, x0, cfg);
        std::string dg = afp::digest(json{{"mech", mech}, {"imm", imm}, {"x0", x0}, {"dt", dt}, {"horizon", horizon}});
        write_path(path, out, format, seed, stream, dg);
        summary({{"command", "simulate-cbi"}, {"out", out}, {"final", path.values.back()},
                 {"events", path.events.size()}, {"exploded", path.exploded}});
        return path.exploded ? kNumerical : kOk;
    }
    if (*sim) {
        auto model = load_model(model_path);
        afp::SimConfig cfg{dt, horizon, seed, 1e12, stream};
        auto path = afp::simulate_afp(model, r0, cfg);
        std::string dg = afp::digest(json{{"model", model}, {"r0", r0}, {"dt", dt}, {"horizon", horizon}});
        write_path(path, out, format, seed, stream, dg);
        summary({{"command", "simulate-afp"}, {"out", out}, {"final", path.values.back()}, {"events", path.events.size()}});
        return kOk;
    }
    if (*dsim) {
        auto model = load_model(model_path);
        for (long cap_n = std::max(nmax, n0);; cap_n *= 2) {
            auto built = afp::build_qmatrix(model, cap_n);
            if (!std::holds_alternative<afp::DualRates>(built)) {
                summary({{"command", "simulate-dual"}, {"status", "duality-unavailable"}});
                return kUnavailable;
            }
            try {
                auto path = afp::simulate_dual(std::get<afp::DualRates>(built), n0, horizon, seed,
                                               afp::stream_id(afp::StreamSpace::dual, stream));
                std::ostringstream os;
                os << "t,state\n";
                for (std::size_t i = 0; i < path.times.size(); ++i)
                    os << afp::fmt_double(path.times[i]) << ','
                       << (path.states[i] == afp::kCemetery ? std::string("D") : std::to_string(path.states[i])) << '\n';
                afp::write_atomically(out, os.str());
                summary({{"command", "simulate-dual"}, {"out", out}, {"final", path.states.back()}, {"jumps", path.times.size() - 1}});
                return kOk;
            } catch (const afp::CapacityExceeded&) {
                if (cap_n >= (1L << 20)) throw;
            }
        }
    }
    if (*rates) {
        auto model = load_model(model_path);
        afp::DualRates q = afp::assemble_rates(model, nmax);
        auto neg = afp::negative_entries(q);
        std::ostringstream os;
        os << "i,j,rate\n";
        for (long i = 1; i <= q.nmax; ++i) {
            for (long j = 0; j < i; ++j) os << i << ',' << j << ',' << afp::fmt_double(q.rate(i, j)) << '\n';
            os << i << ',' << i + 1 << ',' << afp::fmt_double(q.rate(i, i + 1)) << '\n';
            os << i << ",D," << afp::fmt_double(q.rate(i, afp::kCemetery)) << '\n';
        }
        afp::write_atomically(out, os.str());
        json negs = json::array();
        for (const auto& e : neg.entries) negs.push_back({{"i", e.i}, {"j", e.j}, {"value", e.value}});
        summary({{"command", "dual-rates"}, {"out", out}, {"nmax", nmax}, {"validated", neg.entries.empty()},
                 {"negative_rates", negs}, {"status", neg.entries.empty() ? "ok" : "duality-unavailable"}});
        return neg.entries.empty() ? kOk : kUnavailable;
    }
    if (*cull) {
        auto model = load_model(model_path);
        auto ref_rows = afp::afp_samples(model, r0, {horizon}, paths, seed, 1e-3);
        std::vector<double> ref;
        for (const auto& row : ref_rows) ref.push_back(row[0]);
        std::ostringstream os;
        os << "n,t,mean,stderr,ks_vs_afp\n";
        json rows = json::array();
        for (long n : ns) {
            afp::CullingConfig cfg;
            cfg.n = n;
            cfg.holding = holding == "deterministic" ? afp::Holding::deterministic : afp::Holding::exponential;
            afp::CullingKernel kernel(model, cfg);
            auto vals = afp::parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
                afp::Stream rng(seed, afp::stream_id(afp::StreamSpace::culling, (static_cast<std::uint64_t>(n) << 32) | p));
                double r = r0, t = 0.0;
                for (;;) {
                    t += cfg.holding == afp::Holding::exponential ? rng.exponential(static_cast<double>(n)) : 1.0 / n;
                    if (t > horizon) return r;
                    r = kernel.step(r, rng);
                }
            });
            afp::RunningStats st;
            for (double v : vals) st.add(v);
            double ks = afp::ks_statistic(vals, ref);
            os << n << ',' << afp::fmt_double(horizon) << ',' << afp::fmt_double(st.mean()) << ','
               << afp::fmt_double(st.stderr_mean()) << ',' << afp::fmt_double(ks) << '\n';
            rows.push_back({{"n", n}, {"mean", st.mean()}, {"ks", ks}});
        }
        afp::write_atomically(out, os.str());
        summary({{"command", "culling-converge"}, {"out", out}, {"rows", rows}});
        return kOk;
    }
    if (*lp) {
        auto base = load_model(model_path);
        std::vector<double> ts = times;
        std::sort(ts.begin(), ts.end());
        std::ostringstream os;
        os << "z,t,mc_mean,logistic,sup_abs_err\n";
        for (double z : zs) {
            afp::PopulationModel model = base;
            model.z = z;
            afp::LimitParams par = afp::limit_params(model, r0);
            afp::AfpProcess proc(model);
            // For each path: values at the output times and running sup of |R - R_inf| on the dt grid.
            auto res = afp::parallel_map(static_cast<std::size_t>(paths), [&](std::size_t p) {
                afp::Stream rng(seed, afp::stream_id(afp::StreamSpace::afp, p));
                std::vector<double> vals, sups;
                double r = r0, t = 0.0, sup = 0.0;
                for (double target : ts) {
                    while (t < target - 1e-12) {
                        double h = std::min(dt, target - t);
                        proc.advance(r, t, t + h, dt, rng, [](double, afp::JumpKind, double) {});
                        t += h;
                        sup = std::max(sup, std::abs(r - afp::logistic_limit(par, t)));
                    }
                    vals.push_back(r);
                    sups.push_back(sup);
                }
                return std::make_pair(vals, sups);
            });
            for (std::size_t k = 0; k < ts.size(); ++k) {
                afp::RunningStats m, s;
                for (const auto& [v, sp] : res) {
                    m.add(v[k]);
                    s.add(sp[k]);
                }
                os << afp::fmt_double(z) << ',' << afp::fmt_double(ts[k]) << ',' << afp::fmt_double(m.mean()) << ','
                   << afp::fmt_double(afp::logistic_limit(par, ts[k])) << ',' << afp::fmt_double(s.mean()) << '\n';
            }
        }
        afp::write_atomically(out, os.str());
        summary({{"command", "large-pop"}, {"out", out}});
        return kOk;
    }
    if (*fl) {
        auto model = load_model(model_path);
        model.z = zf;
        afp::LimitParams par = afp::limit_params(model, r0);
        auto rows = afp::afp_samples(model, r0, times, paths, seed, dt);
        std::vector<double> ts = times;
        std::sort(ts.begin(), ts.end());
        std::ostringstream os;
        os << "t,emp_var,analytic_var,n_paths\n";
        for (std::size_t k = 0; k < ts.size(); ++k) {
            afp::RunningStats st;
            for (const auto& row : rows) st.add(std::sqrt(zf) * (row[k] - afp::logistic_limit(par, ts[k])));
            os << afp::fmt_double(ts[k]) << ',' << afp::fmt_double(st.variance()) << ','
               << afp::fmt_double(afp::fluct_cov(par, ts[k], ts[k])) << ',' << paths << '\n';
        }
        afp::write_atomically(out, os.str());
        summary({{"command", "fluctuations"}, {"out", out}, {"delta", par.delta}});
        return kOk;
    }
    if (*vd) {
        auto model = load_model(model_path);
        afp::DualityOptions o;
        o.times = times;
        o.moments = moments;
        o.r0 = r0;
        o.paths = paths;
        o.seed = seed;
        o.dt = dt;
        o.nmax = nmax;
        o.retry = !no_retry;
        if (paths < 100) throw afp::InvalidConfig("need at least 100 paths");
        afp::DualityReport rep = afp::duality_report(model, o);
        afp::write_atomically(out, json(rep).dump(2) + "\n");
        std::string status = !rep.available ? "duality-unavailable" : rep.pass ? "pass" : "fail";
        summary({{"command", "verify-duality"}, {"out", out}, {"status", status}, {"stages", rep.stages}});
        return !rep.available ? kUnavailable : rep.pass ? kOk : kStatFail;
    }
    if (*mh) {
        json result;
        if (direction == "to-lambda") {
            auto mech = load_as<afp::BranchingMechanism>(in_path);
            result = afp::to_lambda(mech, zh);
        } else {
            auto L = load_as<afp::MeasureOn01>(in_path);
            result = afp::from_lambda(L, zh, r_tilde);
        }
        afp::write_atomically(out, result.dump(2) + "\n");
        summary({{"command", "map-homeo"}, {"direction", direction}, {"out", out}});
        return kOk;
    }
    if (*cp) {
        json result;
        if (gap_mode) {
            json rows = json::array();
            for (const auto& row : afp::epsilon_gap_probe(zc, s_gap, eps_list, nmax, true))
                rows.push_back({{"eps", row.eps}, {"branching", row.branching}, {"pair_coalescence", row.pair_coalescence},
                                {"max_branching_error", row.max_branching_error},
                                {"max_coalescence_error", row.max_coalescence_error}, {"d_psi", row.d_psi}});
            result = {{"mode", "epsilon-gap"}, {"z", zc}, {"s", s_gap}, {"rows", rows}};
        } else {
            if (seq_path.empty()) throw afp::InvalidConfig("continuity-probe needs --sequence or --epsilon-gap");
            json in = afp::read_json_file(seq_path);
            double z = in.at("z").get<double>();
            auto target = in.at("target").get<afp::BranchingMechanism>();
            auto seq = in.at("sequence").get<std::vector<afp::BranchingMechanism>>();
            json rows = json::array();
            for (const auto& row : afp::continuity_probe(seq, target, z, nmax > 0 ? std::min(nmax, 64L) : 6).rows)
                rows.push_back({{"index", row.index}, {"d_psi", row.d_psi}, {"lambda_distance", row.lambda_distance},
                                {"max_rate_gap", row.max_rate_gap}});
            result = {{"mode", "sequence"}, {"z", z}, {"rows", rows}};
        }
        if (!out.empty()) afp::write_atomically(out, result.dump(2) + "\n");
        summary({{"command", "continuity-probe"}, {"out", out}, {"rows", result["rows"].size()}});
        return kOk;
    }
    if (*gen) {
        auto model = load_model(model_path);
        double v = afp::generator_afp(model, afp::Polynomial(coeffs), rg);
        summary({{"command", "afp-generator"}, {"r", rg}, {"value", v}});
        return kOk;
    }
    if (*acc) {
        afp::acceptance::Options o;
        o.seed = seed;
        bool all = true;
        json results = json::array();
        for (const auto& criterion : afp::acceptance::all_criteria()) {
            auto r = criterion(o);
            std::cerr << afp::acceptance::format(r) << std::endl;
            results.push_back({{"id", r.id}, {"pass", r.pass}});
            all = all && r.pass;
        }
        summary({{"command", "acceptance"}, {"status", all ? "pass" : "fail"}, {"criteria", results}});
        return all ? kOk : kStatFail;
    }
    return kConfig;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const afp::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        switch (e.kind()) {
        case afp::ErrorKind::numerical_failure:
        case afp::ErrorKind::explosion_detected:
        case afp::ErrorKind::capacity_exceeded:
            std::cout << json{{"status", "numerical-failure"}, {"error", e.what()}}.dump() << std::endl;
            return kNumerical;
        default:
            std::cout << json{{"status", "config-error"}, {"error", e.what()}}.dump() << std::endl;
            return kConfig;
        }
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        std::cout << json{{"status", "config-error"}, {"error", e.what()}}.dump() << std::endl;
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        std::cout << json{{"status", "config-error"}, {"error", e.what()}}.dump() << std::endl;
        return kConfig;
    }
}
