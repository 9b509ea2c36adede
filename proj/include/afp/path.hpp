#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "afp/errors.hpp"
#include "afp/rng.hpp"

namespace afp {

struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = kDefaultSeed;
    double cap = 1e12;
    std::uint64_t stream_id = 0;

    void validate() const {
        if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon) throw InvalidConfig("need 0 < dt <= horizon");
        if (!(cap > 0.0)) throw InvalidConfig("cap must be positive");
    }
};

struct Event {
    double time;
    std::string kind;
    double mark;
};

struct PathSample {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<Event> events;
    bool exploded = false;
    std::optional<double> truncated_at;

    void push(double t, double v) {
        times.push_back(t);
        values.push_back(v);
    }

    // Right-continuous lookup for piecewise-constant paths.
    double value_at(double t) const {
        if (times.empty()) throw InvalidParameter("empty path");
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return values.front();
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

// Number of Euler steps covering [0, horizon]; the last one may be short.
inline long step_count(double horizon, double dt) {
    double n = std::ceil(horizon / dt - 1e-9);
    return std::max(1L, static_cast<long>(n));
}

} // namespace afp
