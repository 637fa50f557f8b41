#pragma once

#include <cstdint>
#include <vector>

#include "physmg/family.hpp"
#include "physmg/prior.hpp"

namespace physmg::systems {

// Per-coordinate affine map onto [-1, 1].
struct Normalization {
    std::vector<double> lo;  // one entry per coordinate
    std::vector<double> hi;

    double normalize(double x, int c) const {
        size_t i = static_cast<size_t>(c);
        return 2.0 * (x - lo[i]) / (hi[i] - lo[i]) - 1.0;
    }
    double denormalize(double y, int c) const {
        size_t i = static_cast<size_t>(c);
        return lo[i] + (y + 1.0) * (hi[i] - lo[i]) / 2.0;
    }

    // Normalization for the family's native coordinate ranges.
    static Normalization for_family(const FamilyConfig& config);
};

struct Dataset {
    FamilyConfig family;
    QuantityPrior prior;
    Normalization normalization;
    std::vector<Trajectory> trajectories;

    size_t size() const { return trajectories.size(); }
};

// Draw n quantity values through the prior's quantile transport and roll
// them out. Each item uses a counter-based stream keyed by (seed, item), so
// the result is bitwise reproducible and order-independent.
Dataset sample_dataset(const FamilyConfig& config, const QuantityPrior& prior,
                       int n, std::uint64_t seed);

// Rejection-sample pendulum initial conditions until the true energies fill
// the prior's bins with equal counts (+-1). Throws if a bin stays empty
// after `attempt_budget` proposals.
Dataset curate_pendulum_dataset(const FamilyConfig& config, const QuantityPrior& prior,
                                int n, std::uint64_t seed,
                                std::int64_t attempt_budget = 1000000);

}  // namespace physmg::systems
