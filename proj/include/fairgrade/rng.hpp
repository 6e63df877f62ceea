#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fairgrade {

// splitmix64: the mixing function used to derive independent named
// sub-streams from one master seed.
constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t fnv1a64(std::string_view text, uint64_t h = 0xcbf29ce484222325ULL) {
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives the seed of a named sub-stream, optionally indexed. All randomness
// in the pipeline flows from (config seed, stream name, indices), so results
// are reproducible at any worker count.
constexpr uint64_t substream(uint64_t seed, std::string_view name, uint64_t a = 0,
                             uint64_t b = 0) {
    uint64_t h = splitmix64(seed ^ fnv1a64(name));
    h = splitmix64(h ^ (a * 0x9e3779b97f4a7c15ULL + 1));
    h = splitmix64(h ^ (b * 0xd1b54a32d192ed03ULL + 2));
    return h;
}

// xoshiro256**. Self-contained so sampled values are identical on every
// platform and toolchain (std distributions make no such promise).
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s_) {
            x = splitmix64(x);
            word = x;
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
    // the small n used here, but do it right anyway.
    uint64_t uniform_index(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive range
        return lo + static_cast<int64_t>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller (polar form avoided to keep the draw
    // count per call fixed at two).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson by Knuth's product method, chunked so it stays exact for
    // large means.
    uint64_t poisson(double mean) {
        uint64_t count = 0;
        double remaining = mean;
        while (remaining > 500.0) {
            count += poisson_small(500.0);
            remaining -= 500.0;
        }
        return count + poisson_small(remaining);
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    static constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t poisson_small(double mean) {
        if (mean <= 0) return 0;
        const double threshold = std::exp(-mean);
        uint64_t count = 0;
        double product = uniform();
        while (product > threshold) {
            ++count;
            product *= uniform();
        }
        return count;
    }

    uint64_t s_[4];
};

}  // namespace fairgrade
