#pragma once

#include <vector>

namespace physmg::systems {

// Intended marginal over the physical quantity, stored as a piecewise
// constant density on `bins` equal-width bins over [lower, upper].
struct QuantityPrior {
    double lower = 0.0;
    double upper = 1.0;
    int bins = 64;
    std::vector<double> density;  // per-bin mass, sums to 1

    static QuantityPrior uniform(double lower, double upper, int bins = 64);

    void validate() const;

    double bin_width() const { return (upper - lower) / bins; }
    double bin_lo(int b) const { return lower + b * bin_width(); }
    double bin_hi(int b) const { return lower + (b + 1) * bin_width(); }

    // Index of the bin containing r; values outside [lower, upper] clamp
    // to the edge bins.
    int bin_of(double r) const;

    // Probability density (not mass) at r, from the binned representation.
    double density_at(double r) const;

    std::vector<double> edges() const;
};

// Quantile transport map T(u) = F^{-1}(u) for the piecewise-constant binned
// density. Monotone non-decreasing; T(0) = lower, T(1) = upper.
double quantile_transport(const QuantityPrior& prior, double u);

}  // namespace physmg::systems
