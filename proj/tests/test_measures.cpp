#include <catch_amalgamated.hpp>

#include "afp/json_io.hpp"
#include "afp/measures.hpp"
#include "afp/rng.hpp"

using Catch::Approx;
using namespace afp;

TEST_CASE("tz_map examples") {
    CHECK(tz_map(1.0, 1.0) == 0.5);
    CHECK(tz_map(0.0, 5.0) == 0.0);
    CHECK(tz_map(3.0, 1.0) == 0.75);
    CHECK_THROWS_AS(tz_map(1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(tz_map(1.0, -2.0), InvalidParameter);
}

TEST_CASE("tz_inverse examples") {
    CHECK(tz_inverse(0.5, 1.0) == 1.0);
    CHECK(tz_inverse(0.0, 7.0) == 0.0);
    CHECK(tz_inverse(0.75, 1.0) == 3.0);
    CHECK_THROWS_AS(tz_inverse(1.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(tz_inverse(0.5, 0.0), InvalidParameter);
}

TEST_CASE("tz_map and tz_inverse are mutually inverse") {
    Stream rng(kDefaultSeed, stream_id(StreamSpace::misc, 1));
    for (int k = 0; k < 1000; ++k) {
        double z = 0.01 + 100.0 * rng.uniform();
        double w = 50.0 * rng.uniform();
        CHECK(tz_inverse(tz_map(w, z), z) == Approx(w).epsilon(1e-12).margin(1e-12));
        double u = 0.999 * rng.uniform();
        CHECK(tz_map(tz_inverse(u, z), z) == Approx(u).epsilon(1e-12).margin(1e-14));
    }
}

TEST_CASE("pushforward examples") {
    double z = 10.0, y = 0.3, v = 1.7;
    auto single = pushforward(AtomicMeasure{{y * z / (1.0 - y), v}}, z);
    REQUIRE(single.atoms().size() == 1);
    CHECK(single.atoms()[0].location == Approx(y).epsilon(1e-15));
    CHECK(single.atoms()[0].mass == v);
    CHECK(single.mass_at_zero() == 0.0);

    CHECK(pushforward(AtomicMeasure{}, 3.0).atoms().empty());

    auto two = pushforward(AtomicMeasure{{1.0, 2.0}, {3.0, 4.0}}, 1.0);
    REQUIRE(two.atoms().size() == 2);
    CHECK(two.atoms()[0].location == 0.5);
    CHECK(two.atoms()[0].mass == 2.0);
    CHECK(two.atoms()[1].location == 0.75);
    CHECK(two.atoms()[1].mass == 4.0);
}

TEST_CASE("pullback inverts pushforward") {
    Stream rng(kDefaultSeed, stream_id(StreamSpace::misc, 2));
    for (int k = 0; k < 200; ++k) {
        std::vector<Atom> atoms;
        int n = 1 + static_cast<int>(4 * rng.uniform());
        for (int i = 0; i < n; ++i) atoms.push_back({0.01 + 20.0 * rng.uniform(), rng.uniform()});
        AtomicMeasure m(atoms);
        double z = 0.1 + 10.0 * rng.uniform();
        auto back = pullback(pushforward(m, z), z);
        REQUIRE(back.size() == m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            CHECK(back.atoms()[i].location == Approx(m.atoms()[i].location).epsilon(1e-12));
            CHECK(back.atoms()[i].mass == m.atoms()[i].mass);
        }
    }
    CHECK_THROWS_AS(pullback(MeasureOn01(1.0, {}), 1.0), InvalidParameter);
}

TEST_CASE("integrate examples") {
    AtomicMeasure d{{3.0, 2.0}};
    CHECK(integrate(d, [](double w) { return w * w; }) == 18.0);
    AtomicMeasure m{{0.5, 1.0}, {2.0, 3.0}};
    CHECK(integrate(m, [](double) { return 0.0; }) == 0.0);
    CHECK(integrate(m, [](double w) { return w; }, Region::from_one()) == 6.0);
    CHECK(integrate(m, [](double w) { return w; }, Region::below_one()) == 0.5);
}

TEST_CASE("integrate reports the offending atom") {
    AtomicMeasure m{{0.5, 1.0}, {2.0, 3.0}};
    try {
        integrate(m, [](double w) { return w > 1.0 ? std::numeric_limits<double>::infinity() : w; });
        FAIL("expected an evaluation error");
    } catch (const EvaluationError& e) {
        CHECK(e.location == 2.0);
    }
}

TEST_CASE("integrate of a pushforward is the integral of the composition") {
    AtomicMeasure m{{0.2, 1.5}, {4.0, 0.25}, {11.0, 2.0}};
    double z = 3.0;
    auto g = [](double u) { return u * u * (1.0 - u); };
    double lhs = integrate(pushforward(m, z), g);
    double rhs = integrate(m, [&](double w) { return g(tz_map(w, z)); });
    CHECK(lhs == Approx(rhs).epsilon(1e-14));
}

TEST_CASE("measures are canonical") {
    AtomicMeasure m{{2.0, 1.0}, {1.0, 0.0}, {0.5, 2.0}, {2.0 + 1e-14, 3.0}};
    REQUIRE(m.size() == 2);
    CHECK(m.atoms()[0].location == 0.5);
    CHECK(m.atoms()[1].location == 2.0);
    CHECK(m.atoms()[1].mass == 4.0);
    CHECK(m.total_mass() == 6.0);
    CHECK_THROWS_AS(AtomicMeasure({{0.0, 1.0}}), InvalidParameter);
    CHECK_THROWS_AS(AtomicMeasure({{1.0, -1.0}}), InvalidParameter);
    CHECK_THROWS_AS(MeasureOn01(0.0, {{1.0, 1.0}}), InvalidParameter);
    CHECK_THROWS_AS(MeasureOn01(-1.0, {}), InvalidParameter);
}

TEST_CASE("measures round-trip through JSON") {
    AtomicMeasure m{{0.5, 1.0}, {2.0, 3.0}};
    CHECK(json(m).get<AtomicMeasure>().atoms().size() == 2);
    CHECK(json(m).dump() == json(json(m).get<AtomicMeasure>()).dump());
    MeasureOn01 l(0.25, {{0.5, 1.0}});
    auto back = json(l).get<MeasureOn01>();
    CHECK(back.mass_at_zero() == 0.25);
    CHECK(back.atoms()[0].location == 0.5);
}

TEST_CASE("rng streams") {
    Stream a(kDefaultSeed, 0), b(kDefaultSeed, 1), a2(kDefaultSeed, 0);
    double x = a.uniform();
    CHECK(x != b.uniform());
    CHECK(x == a2.uniform());
    Stream c(kDefaultSeed, stream_id(StreamSpace::cbi, 0)), d(kDefaultSeed, stream_id(StreamSpace::dual, 0));
    CHECK(c.next_u64() != d.next_u64());
    // The documented scheme: key = mix64(seed ^ mix64(stream + c)), draw k = mix64(key + k * golden).
    Stream e(1, 0);
    std::uint64_t key = mix64(1 ^ mix64(0x632BE59BD9B4E019ULL));
    CHECK(e.next_u64() == mix64(key + 0x9E3779B97F4A7C15ULL));
    CHECK(e.next_u64() == mix64(key + 2 * 0x9E3779B97F4A7C15ULL));
}
