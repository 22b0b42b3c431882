#pragma once

#include <cstdint>
#include <random>

namespace guibee {

// Deterministic RNG wrapper. All randomness in the library goes through this
// class so that runs are reproducible from a single seed: mt19937_64 output is
// fully specified by the standard, and the derived draws below avoid the
// implementation-defined std <random> distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform_unit() * static_cast<double>(n)) % n;
    }

    // Independent child stream, for components that must not perturb the
    // parent draw sequence.
    Rng fork() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ull); }

private:
    std::mt19937_64 engine_;
};

}  // namespace guibee
