#pragma once

#include <cstdint>
#include <cmath>

namespace polbc {

// Counter-based deterministic PRNG. Every consumer receives its own stream
// via split(), so adding or removing draws in one subsystem never shifts
// the values seen by another. Same seed, same stream, bit for bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_(mix(seed ^ kGolden)), counter_(0) {}

    // Independent child stream identified by stream_id.
    Rng split(std::uint64_t stream_id) const {
        return Rng(root_ ^ mix(stream_id * kGolden + 0x1D8E4E27C47D124FULL), 0);
    }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(root_ + counter_ * kGolden);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection-free modulo bias is negligible for the small n used here,
        // but use Lemire-style reduction anyway.
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller (one value per call, no cached state).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t root() const { return root_; }

private:
    Rng(std::uint64_t root, std::uint64_t counter) : root_(root), counter_(counter) {}

    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += kGolden;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t root_;
    std::uint64_t counter_;
};

} // namespace polbc
