#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pms {

// splitmix64 step; used to derive well-separated stream seeds from a user seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic per-stream seed derivation. Streams with distinct ids yield
// statistically independent engines for the same base seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_id) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(stream_seed(seed, stream_id));
}

// Uniform draw on [0, 1) with exactly 53 random bits. Implemented directly on
// the engine output so that results do not depend on standard-library
// distribution internals.
inline double runif(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch). Deterministic given the
// engine state; consumes two uniforms per call.
inline double rnorm(std::mt19937_64& eng) {
    double u1 = 1.0 - runif(eng); // in (0, 1], keeps the log finite
    double u2 = runif(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Index in [0, n) drawn by rejection from the top bits; unbiased and
// implementation-independent.
inline std::size_t rindex(std::mt19937_64& eng, std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t span = n;
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t draw;
    do {
        draw = eng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % span);
}

} // namespace pms
