#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace flmr {

// All randomness in the library flows through this header. std::mt19937_64 is
// fully specified by the standard, and the value transforms below are spelled
// out by hand, so a given seed yields the same stream on every platform and
// standard library. The std::<distribution> classes are deliberately not used:
// their output is implementation-defined.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and two indices
/// (e.g. client id and round number).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

/// Deterministic random source with pinned value transforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Modulo bias is negligible for the small n
    /// used here and keeps the transform trivially portable.
    std::uint64_t uniform_uint(std::uint64_t n) { return gen_() % n; }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform_uint(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Gaussian via Box-Muller (one value per call).
    double normal(double mean, double sd) {
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 gen_;
};

/// In-place Fisher-Yates shuffle driven by Rng (std::shuffle is
/// implementation-defined and would break cross-platform determinism).
template <typename T>
void deterministic_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_uint(i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace flmr
