#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace afp {

inline constexpr std::uint64_t kDefaultSeed = 0xA5F0C0A1ULL;

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// Stream ids are namespaced by the high byte so that different simulators
// never share a sequence.
enum class StreamSpace : std::uint64_t {
    cbi = 1,
    afp = 2,
    dual = 3,
    culling = 4,
    fluctuation = 5,
    coalescent = 6,
    misc = 7,
};

inline constexpr std::uint64_t stream_id(StreamSpace ns, std::uint64_t index) {
    return (static_cast<std::uint64_t>(ns) << 56) | (index & 0x00FFFFFFFFFFFFFFULL);
}

/**
 * Counter-based generator: output k is mix64(key + k * golden), with the key
 * derived from (seed, stream). Any (seed, stream) pair gives an independent,
 * reproducible sequence and streams can be created in any order.
 */
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL))), seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform on (0,1], never 0.
    double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double r = std::sqrt(-2.0 * std::log(uniform()));
        double a = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t id() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t seed_;
    std::uint64_t stream_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Stream rng_stream(std::uint64_t seed, std::uint64_t stream) { return Stream(seed, stream); }

} // namespace afp
