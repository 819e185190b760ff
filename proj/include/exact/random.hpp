#pragma once

#include <cstdint>

namespace exact {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a parent seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream ^ 0x6a09e667f3bcc909ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(seed, a), b);
}

/**
 * Counter-based uniform generator: the n-th draw is a pure function of
 * (seed, n). Any draw can be regenerated without replaying the stream, which
 * is what lets two estimator evaluations share a sample path.
 */
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ + mix64(counter));
    }

    /// Uniform in the open interval (0, 1).
    constexpr double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

/// Sequential view over a CounterRng.
class UniformStream {
public:
    explicit constexpr UniformStream(std::uint64_t seed) noexcept : rng_(seed) {}

    constexpr double next() noexcept { return rng_.uniform(counter_++); }
    constexpr std::uint64_t next_bits() noexcept { return rng_.bits(counter_++); }

    /// Uniform integer in [0, n). Lemire's multiply-shift; bias is below 2^-64 * n.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        const unsigned __int128 product = static_cast<unsigned __int128>(next_bits()) * n;
        return static_cast<std::uint64_t>(product >> 64);
    }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

}  // namespace exact
