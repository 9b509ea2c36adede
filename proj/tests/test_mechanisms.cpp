#include <catch_amalgamated.hpp>

#include <cmath>

#include "afp/fixtures.hpp"
#include "afp/mechanisms.hpp"

using Catch::Approx;
using namespace afp;

namespace {

BranchingMechanism mech(double b, double c, AtomicMeasure m = {}) {
    BranchingMechanism x;
    x.b = b;
    x.c = c;
    x.m = std::move(m);
    return x;
}

// Fixed-step RK4 for du/dt = -psi(u); independent of the adaptive solver.
double rk4_cumulant(const BranchingMechanism& m, double lam, double t, int steps) {
    double u = lam, h = t / steps;
    auto f = [&](double x) { return -psi_eval(m, x); };
    for (int i = 0; i < steps; ++i) {
        double k1 = f(u), k2 = f(u + 0.5 * h * k1), k3 = f(u + 0.5 * h * k2), k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return u;
}

} // namespace

TEST_CASE("psi examples") {
    CHECK(psi_eval(mech(1, 0), 2.0) == 2.0);
    CHECK(psi_eval(mech(0, 1), 3.0) == 9.0);
    double v = 1.3, w = 2.5, lam = 0.7;
    CHECK(psi_eval(mech(0, 0, {{w, v}}), lam) == Approx(v * (std::exp(-lam * w) - 1.0)).epsilon(1e-14));
    // Small jumps are compensated.
    w = 0.4;
    CHECK(psi_eval(mech(0, 0, {{w, v}}), lam) == Approx(v * (std::exp(-lam * w) - 1.0 + lam * w)).epsilon(1e-14));
    CHECK(psi_eval(mech(0.3, 0.2, {{0.4, 1.0}, {3.0, 2.0}}), 0.0) == 0.0);
    CHECK_THROWS_AS(psi_eval(mech(1, 0), -1.0), InvalidParameter);
}

TEST_CASE("phi examples") {
    ImmigrationMechanism im;
    im.eta = 2.0;
    CHECK(phi_eval(im, 3.0) == 6.0);
    ImmigrationMechanism jump;
    jump.nu = AtomicMeasure{{1.0, 1.0}};
    CHECK(phi_eval(jump, 1.0) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(phi_eval(jump, 1e6) == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("psi'(0+) examples") {
    CHECK(psi_prime_at_zero(mech(1, 0)) == 1.0);
    CHECK(psi_prime_at_zero(mech(0, 0, {{2.0, 1.5}})) == -3.0);
    CHECK(psi_prime_at_zero(mech(0, 0, {{0.5, 1.5}})) == 0.0);
    // Agrees with a one-sided difference quotient.
    auto m = mech(0.4, 0.3, {{0.5, 1.5}, {2.0, 0.7}});
    double h = 1e-7;
    CHECK(psi_eval(m, h) / h == Approx(psi_prime_at_zero(m)).margin(1e-5));
}

TEST_CASE("psi is convex") {
    Stream rng(kDefaultSeed, stream_id(StreamSpace::misc, 10));
    for (int k = 0; k < 50; ++k) {
        auto m = random_mechanism(rng);
        for (double lam = 0.1; lam < 10.0; lam += 0.1) {
            double second = psi_eval(m, lam + 0.1) - 2.0 * psi_eval(m, lam) + psi_eval(m, lam - 0.1);
            CHECK(second >= -1e-12);
        }
    }
}

TEST_CASE("mechanism validation") {
    CHECK_THROWS_AS(mech(0, -1).validate(), InvalidParameter);
    CHECK_THROWS_AS(mech(NAN, 0).validate(), InvalidParameter);
    ImmigrationMechanism im;
    im.eta = -1.0;
    CHECK_THROWS_AS(im.validate(), InvalidParameter);
    PopulationModel pm;
    pm.z = 0.0;
    CHECK_THROWS_AS(pm.validate(), InvalidParameter);
}

TEST_CASE("cumulant matches the Riccati closed form") {
    for (double c : {0.5, 1.0, 3.0})
        for (double lam : {0.1, 1.0, 5.0, 20.0})
            for (double t : {0.01, 0.5, 1.0, 4.0})
                CHECK(std::abs(cumulant_solve(mech(0, c), lam, t) - lam / (1.0 + c * lam * t)) <= 1e-8);
}

TEST_CASE("cumulant of a linear mechanism") {
    for (double b : {-1.0, 0.5, 2.0})
        for (double t : {0.0, 0.3, 2.0})
            CHECK(cumulant_solve(mech(b, 0), 1.5, t) == Approx(1.5 * std::exp(-b * t)).epsilon(1e-9));
    CHECK(cumulant_solve(mech(0.3, 1.0, {{2.0, 1.0}}), 0.0, 5.0) == 0.0);
    CHECK_THROWS_AS(cumulant_solve(mech(1, 0), -1.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(cumulant_solve(mech(1, 0), 1.0, -1.0), InvalidParameter);
}

TEST_CASE("cumulant agrees with an independent RK4 integration") {
    Stream rng(kDefaultSeed, stream_id(StreamSpace::misc, 11));
    for (int k = 0; k < 20; ++k) {
        auto m = random_mechanism(rng);
        double lam = 4.0 * rng.uniform();
        CHECK(cumulant_solve(m, lam, 1.0) == Approx(rk4_cumulant(m, lam, 1.0, 20000)).epsilon(1e-8).margin(1e-10));
    }
}

TEST_CASE("cumulant has the semigroup property") {
    auto m = mech(0.2, 0.5, {{0.3, 2.0}, {1.5, 0.4}});
    for (double lam : {0.5, 2.0}) {
        double direct = cumulant_solve(m, lam, 1.3);
        double split = cumulant_solve(m, cumulant_solve(m, lam, 0.6), 0.7);
        CHECK(direct == Approx(split).epsilon(1e-9));
    }
}

TEST_CASE("supercritical growth trips the overflow guard") {
    CHECK_THROWS_AS(cumulant_solve(mech(-100.0, 0), 1.0, 10.0), ExplosionDetected);
}

TEST_CASE("laplace_cbi examples") {
    auto m = mech(0.2, 0.5, {{0.3, 2.0}, {1.5, 0.4}});
    ImmigrationMechanism none;
    double x = 1.7, lam = 0.9, t = 0.8;
    CHECK(laplace_cbi(m, none, x, lam, t) == Approx(std::exp(-x * cumulant_solve(m, lam, t))).epsilon(1e-10));
    ImmigrationMechanism im;
    im.eta = 0.5;
    im.nu = AtomicMeasure{{1.0, 1.0}};
    CHECK(laplace_cbi(m, im, x, lam, 0.0) == Approx(std::exp(-x * lam)).epsilon(1e-14));
    double c = 2.0;
    CHECK(laplace_cbi(mech(0, c), none, x, lam, t) == Approx(std::exp(-x * lam / (1.0 + c * lam * t))).epsilon(1e-9));
}

TEST_CASE("laplace_cbi with linear branching and drift immigration") {
    // u_s = lam e^{-b s}, so int_0^t phi(u_s) ds = eta lam (1 - e^{-b t}) / b.
    double b = 0.7, eta = 1.3, lam = 0.6, x = 2.0, t = 1.5;
    ImmigrationMechanism im;
    im.eta = eta;
    double expected = std::exp(-x * lam * std::exp(-b * t) - eta * lam * (1.0 - std::exp(-b * t)) / b);
    CHECK(laplace_cbi(mech(b, 0), im, x, lam, t) == Approx(expected).epsilon(1e-9));
}

TEST_CASE("explosivity labels") {
    auto grid = default_probe_grid();
    auto feller = is_explosive(mech(0, 1.0), grid);
    CHECK(feller.label == Explosivity::explosive);
    CHECK(feller.tail_exponent == Approx(2.0).margin(1e-6));
    CHECK(is_explosive(mech(1.0, 0), grid).label == Explosivity::explosive);
    CHECK(is_explosive(mech(-1.0, 0), grid).label == Explosivity::explosive);
    CHECK(is_explosive(mech(0, 0, {{2.0, 1.0}}), grid).label == Explosivity::explosive);
    // psi'(0+) = 1 - 2 < 0 while psi grows at infinity: a zero inside the grid.
    auto zero = is_explosive(mech(1.0, 0.5, {{2.0, 1.0}}), grid);
    CHECK(zero.label == Explosivity::indeterminate);
    REQUIRE(zero.zero_at.has_value());
    CHECK(std::abs(psi_eval(mech(1.0, 0.5, {{2.0, 1.0}}), *zero.zero_at)) < 1e-10);
    CHECK_THROWS_AS(is_explosive(mech(1, 0), {1.0, 0.5}), InvalidParameter);
    CHECK_THROWS_AS(is_explosive(mech(1, 0), {0.1, 0.5, 1.0}), InvalidParameter);
}
