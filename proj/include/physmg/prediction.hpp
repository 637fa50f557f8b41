#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "physmg/devkernel.hpp"
#include "physmg/recovery.hpp"

namespace physmg::prediction {

using devkernel::KernelConfig;
using devkernel::PieceIndex;
using recovery::BinnedMarginal;
using recovery::ReferenceGrid;
using systems::FamilyConfig;
using systems::QuantityPrior;

// Total variation distance between marginals on identical bin edges.
double tv_distance(const BinnedMarginal& p, const BinnedMarginal& q);

// Per-bin signed mass difference a_b - b_b (positive: over-represented in a).
std::vector<double> signed_drift(const BinnedMarginal& a, const BinnedMarginal& b);

enum class RecoveryRule { posterior, mode, mean };

// Binned row-stochastic estimate of the probability that a trajectory
// generated in source bin b is recovered in bin b' after a kernel deviation.
struct TransportKernel {
    std::vector<double> edges;  // B + 1, source and recovered bins coincide
    Eigen::MatrixXd matrix;     // B x B, rows sum to 1
    int samples_per_row = 0;
    double sigma = 0.0;

    int bins() const { return static_cast<int>(matrix.rows()); }
};

TransportKernel estimate_transport_kernel(const FamilyConfig& family,
                                          const QuantityPrior& prior,
                                          const ReferenceGrid& grid,
                                          const PieceIndex& index,
                                          const KernelConfig& kernel,
                                          RecoveryRule rule, int samples_per_row,
                                          std::uint64_t seed);

// Same estimator without the kernel step: the pullback of unperturbed
// rollouts, sampled identically per (row, sample). With sigma = 0 the
// transport kernel reproduces these rows bitwise.
BinnedMarginal reference_pullback(const FamilyConfig& family, const QuantityPrior& prior,
                                  const ReferenceGrid& grid, RecoveryRule rule,
                                  int samples_per_row, std::uint64_t seed);

// Predicted marginal: apply the transport kernel to the intended prior.
BinnedMarginal predict_marginal(const TransportKernel& transport,
                                const QuantityPrior& prior);

struct PredictionConfig {
    int dataset_size = 25000;    // trajectories behind the data marginal and
                                 // the kernel's piece index
    int samples_per_row = 2000;  // Monte Carlo budget per transport row
    int grid_resolution = 16384;
    RecoveryRule rule = RecoveryRule::posterior;
};

struct DriftReport {
    BinnedMarginal prior_marginal;
    BinnedMarginal data_marginal;
    BinnedMarginal predicted_marginal;
    std::vector<double> drift;  // predicted - data, sums to 0
    double tv_data_prior = 0.0;
    double tv_pred_prior = 0.0;
    double tv_pred_data = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    int out_of_range_count = 0;
};

DriftReport drift_report(const FamilyConfig& family, const QuantityPrior& prior,
                         const KernelConfig& kernel, const PredictionConfig& config,
                         std::uint64_t seed);

// App-default deviation scales for the sweep.
const std::vector<double>& default_sigma_sweep();

std::vector<DriftReport> sigma_sweep(const FamilyConfig& family, const QuantityPrior& prior,
                                     const KernelConfig& kernel_base,
                                     const PredictionConfig& config,
                                     std::span<const double> sigmas, std::uint64_t seed);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool degenerate = false;  // zero sample deviation
};

// One-sided upper-tail paired t-test on n >= 2 differences.
TTestResult paired_t_test(std::span<const double> differences);

}  // namespace physmg::prediction
