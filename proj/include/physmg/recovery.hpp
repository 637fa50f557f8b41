#pragma once

#include <Eigen/Core>
#include <vector>

#include "physmg/dataset.hpp"
#include "physmg/family.hpp"
#include "physmg/prior.hpp"

namespace physmg::recovery {

using systems::FamilyConfig;
using systems::Normalization;
using systems::QuantityPrior;
using systems::Trajectory;

// Dense grid of quantity values with reference trajectories generated by the
// exact family rule. References are stored in normalized coordinates, one
// row per grid point.
struct ReferenceGrid {
    FamilyConfig family;
    QuantityPrior prior;
    Normalization normalization;
    std::vector<double> quantities;  // strictly increasing, size J
    Eigen::MatrixXd references;      // J x (horizon * dims)
    Eigen::VectorXd ref_sqnorm;      // cached row squared norms
    double sigma_min_sq = 1e-6;

    int resolution() const { return static_cast<int>(quantities.size()); }
};

struct Posterior {
    const ReferenceGrid* grid = nullptr;
    Eigen::VectorXd weights;  // J, non-negative, sums to 1
};

struct BinnedMarginal {
    std::vector<double> edges;  // B + 1, strictly increasing
    std::vector<double> mass;   // B, sums to 1

    int bins() const { return static_cast<int>(mass.size()); }
    void validate() const;
};

BinnedMarginal uniform_marginal(const QuantityPrior& prior);

ReferenceGrid build_reference_grid(const FamilyConfig& config, const QuantityPrior& prior,
                                   int resolution = 16384);

// Grid posterior with adaptive bandwidth:
//   e_j = (1/H) ||x - g(r_j)||^2 in normalized coordinates,
//   sigma^2(x) = max(min_j e_j, sigma_min^2),
//   w_j proportional to exp(-e_j / (2 sigma^2(x))) * prior(r_j).
Posterior recover_posterior(const ReferenceGrid& grid, const Trajectory& x,
                            const QuantityPrior& prior);

// Batched recovery: rows of X are normalized trajectories; the result has
// one row per trajectory holding the posterior binned over the prior's bins.
Eigen::MatrixXd recover_binned_batch(const ReferenceGrid& grid, const Eigen::MatrixXd& X,
                                     const QuantityPrior& prior);

enum class SummaryRule { mode, mean };

// Posterior mode (ties break toward the lower quantity) or posterior mean.
double summarize(const Posterior& posterior, SummaryRule rule);

// Median of the per-timestep mechanical energies, with angular velocities
// from central differences at interior timesteps.
double recover_pendulum_energy(const Trajectory& x, const FamilyConfig& config);

// Total Euclidean path length of a position trajectory.
double recover_path_length(const Trajectory& x);

// Average of full posteriors, binned over the prior's bins.
BinnedMarginal pullback_marginal(const std::vector<Posterior>& posteriors,
                                 const QuantityPrior& prior);
BinnedMarginal pullback_marginal(const Eigen::MatrixXd& binned_posteriors,
                                 const QuantityPrior& prior);

// Histogram of scalar recoveries; values outside the prior range go to the
// nearest edge bin and are counted in *out_of_range if provided.
BinnedMarginal pullback_scalars(const std::vector<double>& recovered,
                                const QuantityPrior& prior, int* out_of_range = nullptr);

// Bin index on the prior's grid for each reference grid point.
std::vector<int> grid_bin_indices(const ReferenceGrid& grid, const QuantityPrior& prior);

// Row-major normalized copy of a trajectory, as a single Eigen row.
Eigen::RowVectorXd normalized_row(const Trajectory& x, const Normalization& norm);

}  // namespace physmg::recovery
