#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "physmg/devkernel.hpp"
#include "physmg/recovery.hpp"

namespace physmg::mitigation {

using devkernel::KernelConfig;
using recovery::BinnedMarginal;
using systems::QuantityPrior;

// Importance weights that restore the intended prior over the recovered
// quantities: w_i proportional to pi_b / max(pi_hat_b, floor) at i's bin.
struct ReweightPlan {
    std::vector<double> weights;  // N, positive, sums to 1
    std::vector<int> bin_of;      // N quantity-bin indices
    double floor = 1e-6;
    int out_of_range = 0;  // recovered values clamped into an edge bin
};

ReweightPlan compute_reweight(std::span<const double> recovered, const QuantityPrior& prior,
                              const BinnedMarginal& model_marginal, double floor = 1e-6);

// Resampling density proportional to 1 / max(pi_hat_b, floor_fraction / B).
BinnedMarginal inverse_prior(const BinnedMarginal& model_marginal,
                             double floor_fraction = 0.10);

// Latin-hypercube code design: per dimension, one point in each of the n
// strata, jittered uniformly inside its stratum.
struct CodeSupport {
    Eigen::MatrixXd codes;  // n x d, entries in [0, 1]
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(codes.rows()); }
    int dims() const { return static_cast<int>(codes.cols()); }
};

CodeSupport latin_hypercube(int n, int d, std::uint64_t seed);

// Median (over codes) squared distance to the k-th nearest other code; the
// softmax temperature of the decoder weights.
double decoder_bandwidth(const CodeSupport& support, int k_dec);

// Expected k_dec-nearest-neighbor decoding weights under code-space
// perturbation: row j averages, over draws of the deviation kernel applied
// to code j, the alpha weights of the perturbed code's nearest codes.
struct DecoderMatrix {
    // Row-major sparse rows; entries sorted by column, aggregated over draws.
    std::vector<std::vector<std::pair<int, double>>> rows;
    int k_dec = 8;
    double tau = 0.0;

    int size() const { return static_cast<int>(rows.size()); }
};

DecoderMatrix decoder_matrix(const CodeSupport& support, const KernelConfig& kernel,
                             int k_dec, int perturbations_per_code, std::uint64_t seed);

// Assignment of code cells to trajectory indices plus the optimizer's
// objective value and accepted-step trace.
struct Pairing {
    std::vector<int> assignment;  // a: cell j -> trajectory index, bijective
    double objective = 0.0;       // (1/N) sum_j ||p_j - pi||^2
    std::vector<double> trace;    // objective after init and each accepted swap
};

// Mixture marginals p_j = sum_l M_jl nu_{a(l)}.
std::vector<BinnedMarginal> local_mixtures(const DecoderMatrix& m, const Pairing& pairing,
                                           const std::vector<BinnedMarginal>& nu);

double pairing_objective(const DecoderMatrix& m, const Pairing& pairing,
                         const std::vector<BinnedMarginal>& nu, const QuantityPrior& prior);

// Uniformly random bijection; per-bin assigned counts equal the data's bin
// counts for any bijection, so no further constraint applies here.
Pairing init_pairing(const DecoderMatrix& m, const std::vector<BinnedMarginal>& nu,
                     const QuantityPrior& prior, std::uint64_t seed);

struct SwapOptions {
    int max_iters = 0;  // 0: 200 * N
    int patience = 0;   // 0: 20 * N consecutive rejections
    std::uint64_t seed = 0;
};

// Local search over ordered cross-bin swaps (cells whose assigned
// trajectories sit in different quantity bins, per bin_of); accepts strict
// objective decreases only. Deltas are evaluated incrementally on the rows
// touching the two swapped cells.
Pairing swap_optimize(const DecoderMatrix& m, const std::vector<BinnedMarginal>& nu,
                      const QuantityPrior& prior, std::span<const int> bin_of,
                      Pairing start, const SwapOptions& options);

// Decode an arbitrary code point: alpha-weighted average of the paired
// posteriors, or one paired trajectory index sampled by the alpha weights.
BinnedMarginal decode_average(std::span<const double> code, const CodeSupport& support,
                              const Pairing& pairing, const std::vector<BinnedMarginal>& nu,
                              int k_dec, double tau);
int decode_sample_index(std::span<const double> code, const CodeSupport& support,
                        const Pairing& pairing, int k_dec, double tau, rng::Stream& stream);

}  // namespace physmg::mitigation
