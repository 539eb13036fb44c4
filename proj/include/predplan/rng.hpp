#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace predplan {

using Seed = std::uint64_t;

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Small deterministic generator. All simulator and training randomness goes
// through this so that a (seed, label) pair pins down every draw exactly,
// independent of platform or standard library.
class Rng {
public:
    explicit Rng(Seed seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // uniform in [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // uniform integer in [0, n), n > 0
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; consumes two uniforms per call
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double mag = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * mag * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

// Root-seed splitting: every consumer derives its own stream from the run's
// root seed by a fixed label (and optional index), never by sharing state.
inline Seed derive_seed(Seed root, std::string_view label) {
    std::uint64_t s = root ^ fnv1a64(label);
    return splitmix64_next(s);
}

inline Seed derive_seed(Seed root, std::string_view label, std::uint64_t index) {
    std::uint64_t s = derive_seed(root, label) ^ (0x9E3779B97F4A7C15ull * (index + 1));
    return splitmix64_next(s);
}

}  // namespace predplan
