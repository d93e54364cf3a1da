#pragma once

#include <cstdint>
#include <random>

namespace uldyn {

// All randomness flows from (seed, trial, stream) triples so that every
// result is a pure function of the master seed and the trial index,
// independent of scheduling or worker count.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::uint64_t stream = 0;

    RngSpec with_trial(std::uint64_t t) const { return {seed, t, stream}; }
    RngSpec with_stream(std::uint64_t s) const { return {seed, trial, s}; }
};

// Stream ids used across the library. Keeping them in one place guarantees
// that independent random inputs (path noise, algorithmic midpoints, index
// draws) never share a generator state.
namespace stream {
inline constexpr std::uint64_t noise = 0;      // Brownian path
inline constexpr std::uint64_t midpoint = 1;   // solver's uniform midpoint draws
inline constexpr std::uint64_t ref_midpoint = 2;  // fine-reference midpoint draws
inline constexpr std::uint64_t index = 3;      // bump-pattern / class-member draws
inline constexpr std::uint64_t probe = 4;      // misc probe points
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mixes the triple into one well-spread 64-bit state. Sequential trials or
// streams land in unrelated engine states.
inline std::uint64_t derive_state(const RngSpec& r) {
    std::uint64_t h = splitmix64(r.seed);
    h = splitmix64(h ^ (0x100000001b3ULL * r.trial));
    h = splitmix64(h ^ (0xd6e8feb86659fd93ULL * r.stream));
    return h;
}

inline std::mt19937_64 make_engine(const RngSpec& r) {
    std::seed_seq seq{static_cast<std::uint32_t>(derive_state(r) >> 32),
                      static_cast<std::uint32_t>(derive_state(r)),
                      static_cast<std::uint32_t>(r.trial >> 32),
                      static_cast<std::uint32_t>(r.trial),
                      static_cast<std::uint32_t>(r.stream)};
    return std::mt19937_64(seq);
}

}  // namespace uldyn
