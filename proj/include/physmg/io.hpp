#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "physmg/dataset.hpp"
#include "physmg/mitigation.hpp"
#include "physmg/prediction.hpp"

namespace physmg::io {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

// Run configuration parsed from a JSON document. Unknown fields are
// rejected by name; missing fields fall back to the documented defaults.
struct RunConfig {
    systems::FamilyConfig family;
    systems::QuantityPrior prior;
    devkernel::KernelConfig kernel;
    prediction::PredictionConfig counts;
    std::vector<double> sigmas;        // defaults to the standard sweep
    std::vector<std::uint64_t> seeds;  // non-empty; default {1}
    std::string output_dir = ".";
};

RunConfig parse_config(const std::string& text);

// Long-format trajectory CSV (`traj_id,t,c0[,c1...]`) with a JSON metadata
// sidecar declaring horizon, dimension, coordinate ranges, and per-id
// quantities when known.
void write_dataset(const systems::Dataset& dataset, const std::string& csv_path,
                   const std::string& meta_path);
systems::Dataset ingest_trajectories(const std::string& csv_path,
                                     const std::string& meta_path);

// Marginal CSV: `bin_lo,bin_hi,mass`.
void write_marginal_csv(const recovery::BinnedMarginal& marginal, const std::string& path);
recovery::BinnedMarginal read_marginal_csv(const std::string& path);

// Drift report as a JSON document with fixed field order.
std::string report_to_json(const prediction::DriftReport& report);
void write_report(const prediction::DriftReport& report, const std::string& path);

// Gaussian-KDE curve of a binned marginal (Silverman bandwidth over the bin
// centers weighted by mass), for plotting only: `r,density`.
void write_kde_csv(const recovery::BinnedMarginal& marginal, const std::string& path,
                   int points = 256);

// Reweight plan CSV: `traj_id,weight`.
void write_reweight_csv(const mitigation::ReweightPlan& plan, const std::string& path);

// Pairing assignment and objective trace as JSON.
std::string pairing_to_json(const mitigation::Pairing& pairing);

}  // namespace physmg::io
