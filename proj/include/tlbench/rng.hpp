#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace tlbench {

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a seed with stream identifiers into a new seed. Used to fan the
/// single top-level seed out to subcommands, strata, epochs, trials, ...
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed ^ 0x7c0fba5ed2c18a11ULL);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return derive_seed(seed, h);
}

/// Counter-based generator: the value of draw k is a pure function of
/// (seed, stream, k), so results do not depend on evaluation order. Augmentation
/// draws key the stream by (image index, epoch); dropout by (epoch, step, layer).
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0)
        : state_(derive_seed(seed, stream_a, stream_b)) {}

    std::uint64_t next_u64() { return mix64(state_ ^ counter_++); }

    /// Uniform in [0,1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Symmetric uniform in [-magnitude, magnitude].
    double next_symmetric(double magnitude) { return next_uniform(-magnitude, magnitude); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return n == 0 ? 0 : next_u64() % n;
    }

    bool next_bool() { return (next_u64() & 1ULL) != 0; }

    /// Standard normal via Box-Muller.
    double next_normal() {
        double u1 = next_unit();
        double u2 = next_unit();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

  private:
    std::uint64_t state_;
    std::uint64_t counter_ = 0;
};

/// Process-wide default seed (spec: one top-level seed, default 42).
std::uint64_t global_seed();
void set_global_seed(std::uint64_t seed);

} // namespace tlbench
