#pragma once

#include <cstdint>

namespace conckit {

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stateless counter-based generator: every (seed, stream, counter) triple
/// maps to one draw, so partitioned sampling reproduces bit-identically for
/// any work split. Streams index independent sampling lanes (e.g. one Monte
/// Carlo trial each).
struct CounterRng {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t h = mix64(seed ^ 0x8f14e45fceea167aULL);
        h = mix64(h ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        return mix64(h ^ (counter * 0x9e3779b97f4a7c15ULL + 0x94d049bb133111ebULL));
    }

    /// Uniform draw in the open interval (0, 1).
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }
};

/// Sequential view over one stream.
struct RngSequence {
    CounterRng rng;
    std::uint64_t counter = 0;

    double next() { return rng.uniform(counter++); }
    std::uint64_t next_bits() { return rng.bits(counter++); }
};

}  // namespace conckit
