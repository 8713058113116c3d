#pragma once
// Copy-number detectability: how many copies must be made so that at least
// phi of them are flawless after a_i error-prone assembly steps, and the
// Monte Carlo model of flawless-copy decay versus assembly index.

#include <cstdint>
#include <string>
#include <vector>

#include "chemputer/common.hpp"

namespace chemputer::assembly {

class NotDetectable : public Error {
public:
    using Error::Error;
};

struct DetectabilitySpec {
    double phi = 1e6;
    std::vector<double> eps;  // one entry per assembly step; size() is a_i

    static DetectabilitySpec constant(double phi, int assembly_index, double eps);
    int assembly_index() const { return static_cast<int>(eps.size()); }
    void validate() const;
};

struct NMinResult {
    double value = 0.0;
    /// Set when the flawless fraction underflows to zero; value is +inf.
    bool infinite = false;
};

NMinResult n_min(const DetectabilitySpec& spec);

/// (1 - eps)^a_i
double survival_fraction(double eps, int assembly_index);

/// Largest constant per-step error that still leaves phi flawless copies
/// out of n_available. Throws NotDetectable when n_available < phi.
double max_error_for(double phi, int assembly_index, double n_available);

struct AssemblyBounds {
    int min = 0;
    int max = 0;
};

/// (ceil(log2 B), B - 1) for B >= 2 bonds.
AssemblyBounds assembly_bounds(std::int64_t bonds);

struct Realisability {
    bool realisable = false;
    std::vector<std::string> failed;  // "unstable", "below_detection_threshold"
};

Realisability check_realisable(bool stable, double produced_perfect, double phi);

struct MonteCarloConfig {
    double n0 = 6.022e23;
    std::vector<double> eps0 = {0.01, 0.015, 0.02, 0.03, 0.05, 0.06, 0.08, 0.10, 0.20, 0.50};
    double k_growth = 0.02;
    double systematic_sd = 0.005;
    int ai_max = 120;
    int trajectories = 5000;
    std::uint64_t seed = 0;
    /// Redraw the systematic term at every step instead of once per trajectory.
    bool redraw_systematic_per_step = false;

    void validate() const;
};

struct MCResult {
    std::vector<double> eps0;
    int ai_max = 0;
    /// mean_N[row][a - 1] is the mean flawless count after a steps.
    std::vector<std::vector<double>> mean_N;
};

MCResult monte_carlo(const MonteCarloConfig& config);

/// Effective per-step error for step s (1-based) before the systematic term.
double baseline_error(double eps0, double k_growth, int step);

std::string mc_to_csv(const MCResult& result);
std::string mc_to_svg(const MCResult& result);

}  // namespace chemputer::assembly
