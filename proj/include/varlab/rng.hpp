#pragma once

#include <cmath>
#include <cstdint>

namespace varlab {

/// A counter-based deterministic random stream (splitmix64).
///
/// The whole laboratory hangs off this one generator: a 64-bit state plus
/// the fixed splitmix64 recurrence gives identical sequences on every
/// platform, and stream derivation is a single mix of (seed, tag, epoch).
/// Streams are plain values; copying one forks the sequence.
struct RngStream {
    std::uint64_t state = 0;
};

/// The five nondeterminism sources a training run draws from, plus the
/// bit-flip probe stream. Ordinals are wire-stable: they feed stream
/// derivation and the run manifest.
enum class SourceId : std::uint32_t {
    ParamInit = 0,
    DataShuffle = 1,
    DataAugment = 2,
    StochasticReg = 3,
    LowLevelNoise = 4,
    BitFlip = 5,
};

inline constexpr int kNumSources = 5;  // BitFlip is a probe, not a per-epoch source

/// splitmix64 finalizer: the standard two-multiply xor-shift mix.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Advance the stream one step and produce a 64-bit value.
inline std::uint64_t rng_next(RngStream& s) {
    s.state += 0x9E3779B97F4A7C15ULL;
    return mix64(s.state);
}

/// Derive an independent stream for (master_seed, source, epoch).
///
/// The seed/tag combination is mixed to a full avalanche before the epoch
/// enters, so the small consecutive seeds and epochs the protocol uses
/// (seeds 1..R, epochs 0..E) cannot produce the structured collisions a
/// single xor would (1^2 == 3^0). Distinct triples give distinct states
/// with overwhelming probability; re-deriving per epoch keeps pre-onset
/// draws untouched when a source's seed switches mid-training.
inline RngStream derive_stream(std::uint64_t master_seed, SourceId source, int epoch) {
    const std::uint64_t tag = static_cast<std::uint64_t>(source);
    const std::uint64_t key = mix64(master_seed ^ (tag << 32)) ^ static_cast<std::uint64_t>(epoch);
    return RngStream{mix64(key)};
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(RngStream& s) {
    return static_cast<double>(rng_next(s) >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), n >= 1. Always consumes exactly one draw,
/// even for n == 1, so stream positions stay predictable.
/// Multiply-shift map; bias is O(n / 2^64).
inline std::uint64_t bounded_uint(RngStream& s, std::uint64_t n) {
    const unsigned __int128 wide = static_cast<unsigned __int128>(rng_next(s)) * n;
    return static_cast<std::uint64_t>(wide >> 64);
}

/// One standard-normal sample via Box-Muller. Consumes exactly two draws.
/// u1 is mapped into (0, 1], which bounds |result| below sqrt(-2 ln 2^-53) < 8.6.
inline float gaussian(RngStream& s) {
    const double u1 = static_cast<double>((rng_next(s) >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_next(s) >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(r * std::cos(6.283185307179586476925286766559 * u2));
}

}  // namespace varlab
