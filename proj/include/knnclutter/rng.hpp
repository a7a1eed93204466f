#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace knnclutter {

/// Seedable random generator with deterministic child streams.
///
/// All variates are produced from raw mt19937_64 output through fixed
/// arithmetic (no std::*_distribution), so a given seed yields the same
/// sequence on every platform. Child streams are derived by hashing the
/// parent seed with the stream ids, which keeps replicate r of a benchmark
/// reproducible independently of evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Index uniform in [0, n). n must be > 0.
    std::size_t index(std::size_t n) {
        auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    /// Poisson count by summing unit-rate exponentials until `mean` is exceeded.
    /// Exact for any mean; cost is O(mean) draws, fine for the counts used here.
    std::size_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        double acc = 0.0;
        std::size_t count = 0;
        for (;;) {
            acc += -std::log(1.0 - uniform01());
            if (acc > mean) return count;
            ++count;
        }
    }

    /// Deterministic child stream for (this seed, a[, b[, c]]).
    Rng child(std::uint64_t a) const { return Rng(combine(combine(seed_, a), 0x9e3779b97f4a7c15ull)); }
    Rng child(std::uint64_t a, std::uint64_t b) const { return Rng(combine(combine(combine(seed_, a), b), 0x9e3779b97f4a7c15ull)); }
    Rng child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return Rng(combine(combine(combine(combine(seed_, a), b), c), 0x9e3779b97f4a7c15ull));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return mix(h ^ mix(v)); }

    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace knnclutter
