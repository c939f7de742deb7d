#pragma once
// Deterministic random number generation.
//
// All stochastic code in this library derives from SplitMix64 streams so that
// results are reproducible bit-for-bit across platforms and thread counts.
// std::* distributions are avoided on purpose: their output is not pinned by
// the standard and would break golden files between toolchains.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ultr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a, used to fold identifier strings into seed material.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Order-independent combination of seed material into a fresh stream seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t s = a;
    (void)splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL;
    (void)splitmix64(s);
    s ^= c + 0x7f4a7c159e3779b9ULL;
    (void)splitmix64(s);
    s ^= d + 0x2545f4914f6cdd1dULL;
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm up so that small seeds do not produce correlated first draws.
        (void)splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), bias-free via rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
        std::uint64_t v = next_u64();
        while (v > limit) v = next_u64();
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Exact binomial by counting Bernoulli trials. n stays in the 1e6 range
    // for every caller, so the linear cost is acceptable and the result is
    // exactly distributed.
    std::uint64_t binomial(std::uint64_t n, double p) {
        if (p <= 0.0) return 0;
        if (p >= 1.0) return n;
        std::uint64_t k = 0;
        for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
        return k;
    }

    // Marsaglia polar method; deterministic given the stream.
    double gaussian(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return mean + stddev * u * m;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stateless uniform value attached to a candidate identity; used where a
// random value must not depend on evaluation order.
inline double hash_to_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
    return static_cast<double>(mix_seed(seed, a, b, c) >> 11) * 0x1.0p-53;
}

}  // namespace ultr
