#pragma once
// Seeded random streams. Every draw comes from a named sub-stream derived
// from a 64-bit master seed. Uniform and Gaussian variates are computed
// directly from the engine output.

#include <cstdint>
#include <random>
#include <string_view>

namespace chemputer {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for sub-stream `name` (optionally indexed) of `master`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller (spare value cached).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace chemputer
