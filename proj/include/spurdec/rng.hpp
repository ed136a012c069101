#pragma once

// Deterministic, platform-independent RNG used for sampling and bootstrap
// replicates. Reports embed the seed; identical (seed, data) must reproduce
// identical numbers on any platform, hence no std::mt19937/distribution use.

#include <cstdint>

namespace spurdec {

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) via 128-bit multiply (no modulo bias pattern
    // dependence; deterministic across platforms).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Decorrelated stream for a derived purpose (e.g. one per bootstrap
    // replicate): hash-mix the base seed with the stream index.
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 mixer(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)));
        return SplitMix64(mixer.next());
    }

  private:
    std::uint64_t state_;
};

// FNV-1a 64-bit hash of a byte buffer (used to fingerprint input files).
std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace spurdec
