#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "physmg/dataset.hpp"
#include "physmg/rng.hpp"

namespace physmg::devkernel {

using systems::Dataset;
using systems::Normalization;
using systems::Trajectory;

struct KernelConfig {
    double sigma = 0.0;        // deviation scale, normalized units
    int run_length = 3;        // fragment persistence across timesteps
    int dense_cutoff = 0;      // 0 = derive from the index at this sigma
    int k_dec_floor = 1;       // minimum empirical neighborhood size
    bool clip_to_bounds = true;
    double bound_lo = -1.0;    // normalized coordinate bounds for the
    double bound_hi = 1.0;     //   admissibility projection
    bool preserve_endpoints = false;
    bool randomize_run_phase = false;
    int variance_prepass_draws = 256;

    void validate() const;
};

// Per-timestep piece sets from a dataset, in normalized coordinates.
// One-dimensional states are kept sorted for logarithmic radius queries;
// each piece remembers which trajectory it came from so a replacement
// decision can be carried across a run as a fragment of that trajectory.
class PieceIndex {
public:
    static PieceIndex build(const Dataset& dataset);

    int locations() const { return horizon_; }
    int dims() const { return dims_; }
    size_t pieces_per_location() const { return count_; }
    const Normalization& normalization() const { return norm_; }

    // Sorted scalar pieces at location u (dims() == 1 only).
    std::span<const double> pieces(int u) const;
    // d-dimensional piece p at location u (row-major within the location).
    std::span<const double> piece(int u, size_t p) const;
    // Trajectory that piece p at location u was taken from.
    size_t owner(int u, size_t p) const;
    // Normalized state of trajectory `traj` at location u.
    std::span<const double> state(size_t traj, int u) const;

    // Number of pieces within `radius` of a point (Euclidean).
    size_t count_within(int u, std::span<const double> center, double radius) const;
    // Index of the piece nearest to a point.
    size_t nearest(int u, std::span<const double> center) const;

private:
    int horizon_ = 0;
    int dims_ = 1;
    size_t count_ = 0;
    Normalization norm_;
    std::vector<double> data_;        // horizon blocks of count*dims values
    std::vector<std::uint32_t> owners_;  // same layout, source trajectory ids
    std::vector<double> by_traj_;     // count blocks of horizon*dims values
};

PieceIndex build_piece_index(const Dataset& dataset);

// Median over locations of the per-location median one-scale (radius sigma)
// neighbor count.
double one_scale_median(const PieceIndex& index, double sigma);

// Largest power of two not exceeding the median of the per-system medians.
int dense_cutoff(std::span<const double> per_system_medians);
int dense_cutoff(const PieceIndex& index, double sigma);

struct Neighborhood {
    std::vector<size_t> piece_ids;
    std::vector<double> weights;  // Gaussian distance weights, unnormalized
    int alpha = 1;
    bool fallback_nearest = false;
};

struct PerturbStats {
    std::uint64_t replacement_draws = 0;
    std::uint64_t residual_draws = 0;
};

// Data deviation kernel: local fragment recombination with density-stabilized
// Gaussian neighborhoods, residual Gaussian noise, and an admissibility
// projection back to the valid coordinate range. One replacement decision is
// drawn at the anchor of each run of run_length timesteps: it selects a donor
// trajectory whose states fill the whole run.
class DeviationKernel {
public:
    DeviationKernel(const PieceIndex& index, KernelConfig config);

    const KernelConfig& config() const { return config_; }
    int cutoff() const { return cutoff_; }

    // Candidate pieces and Gaussian weights around x's state at location u.
    Neighborhood local_neighborhood(const Trajectory& x, int u) const;

    // One draw from D(. | x). Deterministic given (x, config, stream state).
    Trajectory perturb(const Trajectory& x, rng::Stream& stream,
                       PerturbStats* stats = nullptr) const;

private:
    // Resolved draw machinery for one (location, state): either the dense 1-D
    // truncated-Gaussian path or an explicit weighted neighborhood.
    struct DrawContext {
        bool dense = false;
        Neighborhood nb;
        std::vector<double> cdf;  // cumulative weights for the sparse path
    };

    Neighborhood neighborhood_at(int u, std::span<const double> center) const;
    int alpha_at(int u, std::span<const double> center) const;
    DrawContext make_context(int u, std::span<const double> center) const;
    // Donor trajectory for the run anchored at location u. Consumes one or
    // two uniforms from the stream (the second breaks ties between pieces
    // sharing the snapped value).
    size_t draw_donor(const DrawContext& ctx, int u, std::span<const double> center,
                      rng::Stream& stream) const;
    // Memoized per-coordinate variance of donor states over the run anchored
    // at u0, laid out as (u - u0) * dims + c for u in [u0, u_end).
    const std::vector<double>& run_variance(int u0, int u_end,
                                            std::span<const double> center) const;

    const PieceIndex& index_;
    KernelConfig config_;
    int cutoff_ = 1;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::pair<int, std::vector<long long>>, std::vector<double>> var_cache_;
};

}  // namespace physmg::devkernel
