#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

// Seeded randomness helpers. std::mt19937_64 output is fully specified by the
// standard, but the standard *distributions* are not, so bounded ints and
// uniform doubles are derived here by hand to keep every seeded run
// bit-reproducible across toolchains.
namespace dskreg::rng {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Order-sensitive combination of stream tags into one seed.
inline uint64_t mix(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (uint64_t p : parts) h = splitmix64(h ^ p);
    return h;
}

// Stream salts; one per purpose so streams never collide.
inline constexpr uint64_t kSplitSalt = 1;
inline constexpr uint64_t kShuffleSalt = 2;
inline constexpr uint64_t kNegativeSalt = 3;
inline constexpr uint64_t kGumbelSalt = 4;
inline constexpr uint64_t kInitSalt = 5;
inline constexpr uint64_t kEvalSampleSalt = 6;
inline constexpr uint64_t kSynthSalt = 7;

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_real(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// Unbiased draw from [0, n) by rejection.
inline uint64_t uniform_below(std::mt19937_64& g, uint64_t n) {
    const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        uint64_t r = g();
        if (r >= threshold) return r % n;
    }
}

// Gumbel(0,1) noise; the uniform is clamped away from both endpoints so the
// double logarithm stays finite.
inline double gumbel(std::mt19937_64& g) {
    double u = uniform01(g);
    if (u < 1e-20) u = 1e-20;
    if (u > 1.0 - 1e-7) u = 1.0 - 1e-7;
    return -std::log(-std::log(u));
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_below(g, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace dskreg::rng
