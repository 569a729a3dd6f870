#pragma once

// Portable random helpers. std::mt19937_64 output is fixed by the standard,
// but the <random> distributions are not, so the few draws the library needs
// are derived here directly from the engine bits.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace shiftkit {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream for (seed, stream id).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL)));
}

/// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased (rejection on the top range).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

/// Draw `count` elements from `pool`. Without replacement when the pool is
/// large enough, otherwise with replacement; `replaced` reports which.
inline std::vector<std::size_t> draw(std::span<const std::size_t> pool, std::size_t count, Rng& rng,
                                     bool* replaced = nullptr) {
    std::vector<std::size_t> out;
    out.reserve(count);
    if (count <= pool.size()) {
        std::vector<std::size_t> work(pool.begin(), pool.end());
        // partial Fisher-Yates
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + uniform_index(rng, work.size() - i);
            std::swap(work[i], work[j]);
            out.push_back(work[i]);
        }
        if (replaced) *replaced = false;
    } else {
        for (std::size_t i = 0; i < count; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
        if (replaced) *replaced = true;
    }
    return out;
}

}  // namespace shiftkit
