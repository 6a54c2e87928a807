#pragma once
// Counter-keyed random streams. Every random draw in the project comes from
// a stream derived from (seed, purpose, index-a, index-b), so results do not
// depend on thread scheduling or call interleaving. The generator is PCG32
// (64-bit state / 32-bit output); normal variates use Box-Muller on our own
// 53-bit uniforms rather than std::*_distribution, whose output is
// implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace reliatta {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream purposes. Values are stable identifiers baked into run outputs; do
// not renumber without bumping the report version.
enum class Purpose : std::uint64_t {
    Prototypes = 1,
    PatternBank = 2,
    Encoder = 3,
    LabelDraw = 4,
    SampleNoise = 5,
    CorruptionNoise = 6,
    WildKindDraw = 7,
    PerturbVision = 8,
    PerturbTouch = 9,
    FusionInit = 10,
    Test = 99,
};

class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}

    Pcg32(std::uint64_t init_state, std::uint64_t init_seq) {
        state_ = 0u;
        inc_ = (init_seq << 1u) | 1u;
        next_u32();
        state_ += init_state;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in (0, 1]: 53-bit mantissa, never zero so log() is safe.
    double next_double() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next_u64() >> 11) * 0x1.0p-53);
    }

    // Unbiased integer in [0, bound) by rejection.
    std::uint32_t next_below(std::uint32_t bound) {
        const std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller (second value discarded; streams stay
    // position-independent).
    double next_normal() {
        const double u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

// Derives an independent stream for (seed, purpose, a, b). Batch loops hand
// each sample its own stream, which makes parallel generation deterministic.
inline Pcg32 make_stream(std::uint64_t seed, Purpose purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = seed;
    std::uint64_t k1 = splitmix64(s);
    s ^= static_cast<std::uint64_t>(purpose) * 0x9e3779b97f4a7c15ULL;
    std::uint64_t k2 = splitmix64(s);
    s ^= a * 0xc2b2ae3d27d4eb4fULL + 0x165667b19e3779f9ULL;
    std::uint64_t k3 = splitmix64(s);
    s ^= b * 0x27d4eb2f165667c5ULL + 0x85ebca6b0b4e7bb1ULL;
    std::uint64_t k4 = splitmix64(s);
    return Pcg32(k1 ^ k3, k2 ^ k4);
}

}  // namespace reliatta
