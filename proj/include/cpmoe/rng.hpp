#pragma once

#include <cmath>
#include <cstdint>

namespace cpmoe {

// Counter-based randomness. Every draw is a pure function of (key, counter),
// so data generation, corruption, gate noise and dropout are reproducible
// regardless of evaluation order or thread count.

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

inline uint64_t rng_u64(uint64_t key, uint64_t counter) { return mix64(mix64(key) ^ mix64(counter * 0x9e3779b97f4a7c15ull + 1)); }

// Uniform in [0, 1).
inline double rng_uniform(uint64_t key, uint64_t counter) {
    return static_cast<double>(rng_u64(key, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes counters 2c and 2c+1 of the key.
inline double rng_normal(uint64_t key, uint64_t counter) {
    double u1 = 1.0 - rng_uniform(key, 2 * counter);  // (0, 1]
    double u2 = rng_uniform(key, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Sequential stream over a fixed key.
struct RngStream {
    uint64_t key = 0;
    uint64_t n = 0;
    explicit RngStream(uint64_t k) : key(k) {}
    uint64_t u64() { return rng_u64(key, n++); }
    double uniform() { return rng_uniform(key, n++); }
    double normal() {
        uint64_t c = n;
        n += 1;
        return rng_normal(key, c + 0x8000000000000000ull);  // disjoint from uniform counters
    }
    // Uniform integer in [0, m).
    int64_t below(int64_t m) { return static_cast<int64_t>(u64() % static_cast<uint64_t>(m)); }
};

}  // namespace cpmoe
