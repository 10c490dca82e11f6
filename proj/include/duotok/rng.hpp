#pragma once

#include <cmath>
#include <cstdint>

namespace duotok::rng {

// SplitMix64. Every random draw in this library flows through this generator
// so that results are bit-reproducible across platforms (the standard-library
// distributions are implementation-defined and are deliberately avoided).
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// Counter-keyed stream: draws for item `counter` do not depend on how many
// other items exist. Used wherever the contract promises per-frame
// independence (Gaussian replacement, per-frame noise).
inline SplitMix64 keyed_stream(std::uint64_t seed, std::uint64_t counter) {
    SplitMix64 mixer(seed ^ (counter * 0xD6E8FEB86659FD93ULL + 0xA5A5A5A5A5A5A5A5ULL));
    // One warm-up step decorrelates nearby keys.
    std::uint64_t k = mixer.next();
    return SplitMix64(k);
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform01(SplitMix64 &g) {
    return static_cast<double>(g.next() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be > 0. The modulo bias at 64 bits is
// far below anything the statistical tests can resolve.
inline std::uint64_t uniform_below(SplitMix64 &g, std::uint64_t n) {
    return g.next() % n;
}

// Standard normal via Box-Muller (cosine branch). Consumes two uniforms per
// draw; u1 is shifted into (0, 1] so the log is always finite.
inline double gaussian(SplitMix64 &g) {
    double u1 = 1.0 - uniform01(g);
    double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace duotok::rng
