#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace autoj::detail {

/// Uniform draw from [0, n) using rejection sampling on the raw 64-bit
/// stream. std::uniform_int_distribution is implementation-defined, so a run
/// seeded the same way could differ across standard libraries; this keeps
/// sampled corpora reproducible everywhere.
inline std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

inline bool bernoulli_half(std::mt19937_64& rng) { return (rng() & 1u) != 0; }

/// First k positions of a Fisher-Yates shuffle over [0, n); O(k) swaps.
inline std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(bounded_uniform(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k < n ? k : n);
    return idx;
}

}  // namespace autoj::detail
