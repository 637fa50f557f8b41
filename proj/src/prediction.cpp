#include "physmg/prediction.hpp"

#include <cmath>
#include <stdexcept>

#include "physmg/special.hpp"

namespace physmg::prediction {

using systems::Trajectory;

namespace {

void require_compatible(const std::vector<double>& a, const std::vector<double>& b,
                        const char* who) {
    if (a != b) throw std::invalid_argument(std::string(who) + ": incompatible bin edges");
}

constexpr std::uint64_t kTransportTag = rng::tag("transport");

// One B x B matrix of binned recoveries: row b is the average recovery of
// samples_per_row trajectories with quantities uniform in source bin b,
// optionally passed through the deviation kernel. Sample s of row b draws
// from the stream keyed (seed, transport, b * samples_per_row + s), so the
// kernel-free and kernel-at-sigma variants see identical quantities.
Eigen::MatrixXd transport_rows(const FamilyConfig& family, const QuantityPrior& prior,
                               const ReferenceGrid& grid,
                               const devkernel::DeviationKernel* kernel, RecoveryRule rule,
                               int samples_per_row, std::uint64_t seed) {
    if (samples_per_row < 1)
        throw std::invalid_argument("estimate_transport_kernel: samples_per_row must be >= 1");
    const int b_count = prior.bins;
    const auto edges = prior.edges();
    Eigen::MatrixXd rows(b_count, prior.bins);
    Eigen::MatrixXd batch(samples_per_row, grid.references.cols());
    std::vector<Trajectory> kept;
    for (int b = 0; b < b_count; ++b) {
        const double lo = edges[static_cast<size_t>(b)];
        const double width = edges[static_cast<size_t>(b) + 1] - lo;
        kept.clear();
        for (int s = 0; s < samples_per_row; ++s) {
            rng::Stream stream(seed, kTransportTag,
                               static_cast<std::uint64_t>(b) * samples_per_row + s);
            double r = lo + width * stream.next_double();
            Trajectory x = systems::rollout(family, r);
            if (kernel) x = kernel->perturb(x, stream);
            if (rule == RecoveryRule::posterior)
                batch.row(s) = recovery::normalized_row(x, grid.normalization);
            else
                kept.push_back(std::move(x));
        }
        if (rule == RecoveryRule::posterior) {
            Eigen::MatrixXd binned = recovery::recover_binned_batch(grid, batch, prior);
            rows.row(b) = binned.colwise().mean();
        } else {
            std::vector<double> recovered;
            recovered.reserve(kept.size());
            auto summary = rule == RecoveryRule::mode ? recovery::SummaryRule::mode
                                                      : recovery::SummaryRule::mean;
            for (const Trajectory& x : kept)
                recovered.push_back(
                    recovery::summarize(recovery::recover_posterior(grid, x, prior), summary));
            recovery::BinnedMarginal hist = recovery::pullback_scalars(recovered, prior);
            for (int j = 0; j < prior.bins; ++j) rows(b, j) = hist.mass[static_cast<size_t>(j)];
        }
    }
    return rows;
}

}  // namespace

double tv_distance(const BinnedMarginal& p, const BinnedMarginal& q) {
    require_compatible(p.edges, q.edges, "tv_distance");
    double acc = 0.0;
    for (size_t i = 0; i < p.mass.size(); ++i) acc += std::fabs(p.mass[i] - q.mass[i]);
    return 0.5 * acc;
}

std::vector<double> signed_drift(const BinnedMarginal& a, const BinnedMarginal& b) {
    require_compatible(a.edges, b.edges, "signed_drift");
    std::vector<double> tau(a.mass.size());
    for (size_t i = 0; i < tau.size(); ++i) tau[i] = a.mass[i] - b.mass[i];
    return tau;
}

TransportKernel estimate_transport_kernel(const FamilyConfig& family,
                                          const QuantityPrior& prior,
                                          const ReferenceGrid& grid,
                                          const PieceIndex& index,
                                          const KernelConfig& kernel,
                                          RecoveryRule rule, int samples_per_row,
                                          std::uint64_t seed) {
    kernel.validate();
    devkernel::DeviationKernel dev(index, kernel);
    TransportKernel out;
    out.edges = prior.edges();
    out.matrix = transport_rows(family, prior, grid, &dev, rule, samples_per_row, seed);
    out.samples_per_row = samples_per_row;
    out.sigma = kernel.sigma;
    return out;
}

BinnedMarginal reference_pullback(const FamilyConfig& family, const QuantityPrior& prior,
                                  const ReferenceGrid& grid, RecoveryRule rule,
                                  int samples_per_row, std::uint64_t seed) {
    Eigen::MatrixXd rows =
        transport_rows(family, prior, grid, nullptr, rule, samples_per_row, seed);
    BinnedMarginal marg;
    marg.edges = prior.edges();
    marg.mass.assign(static_cast<size_t>(prior.bins), 0.0);
    for (int b = 0; b < prior.bins; ++b)
        for (int j = 0; j < prior.bins; ++j)
            marg.mass[static_cast<size_t>(j)] += prior.density[static_cast<size_t>(b)] * rows(b, j);
    return marg;
}

BinnedMarginal predict_marginal(const TransportKernel& transport, const QuantityPrior& prior) {
    require_compatible(transport.edges, prior.edges(), "predict_marginal");
    BinnedMarginal marg;
    marg.edges = transport.edges;
    marg.mass.assign(static_cast<size_t>(transport.bins()), 0.0);
    for (int b = 0; b < transport.bins(); ++b)
        for (int j = 0; j < transport.bins(); ++j)
            marg.mass[static_cast<size_t>(j)] +=
                prior.density[static_cast<size_t>(b)] * transport.matrix(b, j);
    return marg;
}

namespace {

struct SweepContext {
    systems::Dataset dataset;
    ReferenceGrid grid;
    PieceIndex index;
    BinnedMarginal data_marginal;
    int out_of_range = 0;
};

SweepContext make_context(const FamilyConfig& family, const QuantityPrior& prior,
                          const PredictionConfig& config, std::uint64_t seed) {
    if (config.dataset_size < 1)
        throw std::invalid_argument("drift_report: dataset_size must be >= 1");
    SweepContext ctx;
    ctx.dataset = systems::sample_dataset(family, prior, config.dataset_size,
                                          rng::mix64(seed ^ rng::tag("drift_data")));
    ctx.grid = recovery::build_reference_grid(family, prior, config.grid_resolution);
    // The data baseline is the marginal of the quantities actually sampled
    // into the dataset; recovery only enters when quantities are unknown
    // (external audits) or inside the transport estimate.
    std::vector<double> quantities;
    quantities.reserve(ctx.dataset.size());
    for (const Trajectory& x : ctx.dataset.trajectories)
        quantities.push_back(x.quantity_true);
    ctx.data_marginal = recovery::pullback_scalars(quantities, prior, &ctx.out_of_range);
    ctx.index = devkernel::PieceIndex::build(ctx.dataset);
    return ctx;
}

DriftReport report_from_context(const SweepContext& ctx, const FamilyConfig& family,
                                const QuantityPrior& prior, const KernelConfig& kernel,
                                const PredictionConfig& config, std::uint64_t seed) {
    TransportKernel transport = estimate_transport_kernel(
        family, prior, ctx.grid, ctx.index, kernel, config.rule, config.samples_per_row, seed);
    DriftReport report;
    report.prior_marginal.edges = prior.edges();
    report.prior_marginal.mass = prior.density;
    report.data_marginal = ctx.data_marginal;
    report.predicted_marginal = predict_marginal(transport, prior);
    report.drift = signed_drift(report.predicted_marginal, report.data_marginal);
    report.tv_data_prior = tv_distance(report.data_marginal, report.prior_marginal);
    report.tv_pred_prior = tv_distance(report.predicted_marginal, report.prior_marginal);
    report.tv_pred_data = tv_distance(report.predicted_marginal, report.data_marginal);
    report.sigma = kernel.sigma;
    report.seed = seed;
    report.out_of_range_count = ctx.out_of_range;
    return report;
}

}  // namespace

DriftReport drift_report(const FamilyConfig& family, const QuantityPrior& prior,
                         const KernelConfig& kernel, const PredictionConfig& config,
                         std::uint64_t seed) {
    SweepContext ctx = make_context(family, prior, config, seed);
    return report_from_context(ctx, family, prior, kernel, config, seed);
}

const std::vector<double>& default_sigma_sweep() {
    static const std::vector<double> sigmas = {0.0,    0.0005, 0.002, 0.0045, 0.008, 0.0125,
                                               0.018,  0.0245, 0.032, 0.0405, 0.05};
    return sigmas;
}

std::vector<DriftReport> sigma_sweep(const FamilyConfig& family, const QuantityPrior& prior,
                                     const KernelConfig& kernel_base,
                                     const PredictionConfig& config,
                                     std::span<const double> sigmas, std::uint64_t seed) {
    if (sigmas.empty()) throw std::invalid_argument("sigma_sweep: empty sigma list");
    SweepContext ctx = make_context(family, prior, config, seed);
    std::vector<DriftReport> reports;
    reports.reserve(sigmas.size());
    for (double sigma : sigmas) {
        KernelConfig kernel = kernel_base;
        kernel.sigma = sigma;
        reports.push_back(report_from_context(ctx, family, prior, kernel, config, seed));
    }
    return reports;
}

TTestResult paired_t_test(std::span<const double> differences) {
    const size_t n = differences.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 differences");
    double mean = 0.0;
    for (double d : differences) mean += d;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : differences) ss += (d - mean) * (d - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    TTestResult result;
    if (sd == 0.0) {
        result.degenerate = true;
        result.t = 0.0;
        result.p = mean > 0.0 ? 0.0 : 1.0;
        return result;
    }
    result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    result.p = special::student_t_sf(result.t, static_cast<double>(n - 1));
    return result;
}

}  // namespace physmg::prediction
