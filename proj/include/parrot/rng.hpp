#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace parrot::nd {

/// Deterministic PRNG used everywhere in place of std:: distributions, so
/// that byte-level reproducibility does not depend on the standard library
/// implementation. Core generator is splitmix64; normals via Box-Muller.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_int(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    /// Derives an independent stream from a root seed and a path of indices.
    /// Used to shard data collection and per-episode seeding deterministically.
    static uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> path) {
        uint64_t x = seed;
        for (uint64_t p : path) {
            x ^= p + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
            Rng r(x);
            x = r.next_u64();
        }
        return x;
    }

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace parrot::nd
