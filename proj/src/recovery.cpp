#include "physmg/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace physmg::recovery {

void BinnedMarginal::validate() const {
    if (edges.size() != mass.size() + 1)
        throw std::invalid_argument("BinnedMarginal: edges must have bins + 1 entries");
    for (size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i] < edges[i + 1]))
            throw std::invalid_argument("BinnedMarginal: edges must be strictly increasing");
    double total = 0.0;
    for (double m : mass) {
        if (!(m >= 0.0)) throw std::invalid_argument("BinnedMarginal: negative mass");
        total += m;
    }
    if (std::fabs(total - 1.0) > 1e-10)
        throw std::invalid_argument("BinnedMarginal: mass must sum to 1");
}

BinnedMarginal uniform_marginal(const QuantityPrior& prior) {
    BinnedMarginal m;
    m.edges = prior.edges();
    m.mass = prior.density;
    return m;
}

Eigen::RowVectorXd normalized_row(const Trajectory& x, const Normalization& norm) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(x.values.size()));
    for (int t = 0; t < x.horizon; ++t)
        for (int c = 0; c < x.dims; ++c)
            row(t * x.dims + c) = norm.normalize(x.at(t, c), c);
    return row;
}

ReferenceGrid build_reference_grid(const FamilyConfig& config, const QuantityPrior& prior,
                                   int resolution) {
    if (resolution < 2)
        throw std::invalid_argument("build_reference_grid: resolution must be >= 2");
    config.validate();
    prior.validate();

    ReferenceGrid grid;
    grid.family = config;
    grid.prior = prior;
    grid.normalization = Normalization::for_family(config);
    grid.quantities.resize(static_cast<size_t>(resolution));
    grid.references.resize(resolution, config.horizon * config.dims());
    for (int j = 0; j < resolution; ++j) {
        double r = prior.lower + (prior.upper - prior.lower) * j / (resolution - 1);
        grid.quantities[static_cast<size_t>(j)] = r;
        Trajectory ref = systems::rollout(config, r);
        grid.references.row(j) = normalized_row(ref, grid.normalization);
    }
    grid.ref_sqnorm = grid.references.rowwise().squaredNorm();
    return grid;
}

namespace {

// Unnormalized posterior weights for one row of squared errors (in place).
void weights_from_errors(Eigen::VectorXd& e, double sigma_min_sq,
                         const Eigen::VectorXd& prior_weight) {
    double e_min = e.minCoeff();
    double s2 = std::max(e_min, sigma_min_sq);
    e = ((e.array() - e_min) * (-0.5 / s2)).exp() * prior_weight.array();
    double total = e.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw std::runtime_error("recover_posterior: degenerate posterior");
    e /= total;
}

Eigen::VectorXd prior_weight_on_grid(const ReferenceGrid& grid, const QuantityPrior& prior) {
    Eigen::VectorXd w(grid.resolution());
    for (int j = 0; j < grid.resolution(); ++j)
        w(j) = prior.density_at(grid.quantities[static_cast<size_t>(j)]);
    return w;
}

}  // namespace

Posterior recover_posterior(const ReferenceGrid& grid, const Trajectory& x,
                            const QuantityPrior& prior) {
    if (x.horizon * x.dims != static_cast<int>(grid.references.cols()))
        throw std::invalid_argument("recover_posterior: trajectory shape does not match grid");
    Eigen::RowVectorXd row = normalized_row(x, grid.normalization);
    double h = static_cast<double>(x.horizon);
    Eigen::VectorXd e =
        (grid.ref_sqnorm.array() - 2.0 * (grid.references * row.transpose()).array() +
         row.squaredNorm()) /
        h;
    e = e.cwiseMax(0.0);
    weights_from_errors(e, grid.sigma_min_sq, prior_weight_on_grid(grid, prior));
    Posterior post;
    post.grid = &grid;
    post.weights = std::move(e);
    return post;
}

std::vector<int> grid_bin_indices(const ReferenceGrid& grid, const QuantityPrior& prior) {
    std::vector<int> idx(grid.quantities.size());
    for (size_t j = 0; j < grid.quantities.size(); ++j)
        idx[j] = prior.bin_of(grid.quantities[j]);
    return idx;
}

Eigen::MatrixXd recover_binned_batch(const ReferenceGrid& grid, const Eigen::MatrixXd& X,
                                     const QuantityPrior& prior) {
    if (X.cols() != grid.references.cols())
        throw std::invalid_argument("recover_binned_batch: trajectory shape does not match grid");
    const Eigen::Index n = X.rows();
    const Eigen::Index j_count = grid.references.rows();
    const double h = static_cast<double>(grid.family.horizon);
    const Eigen::VectorXd prior_w = prior_weight_on_grid(grid, prior);
    const std::vector<int> bin_idx = grid_bin_indices(grid, prior);

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, prior.bins);
    const Eigen::Index chunk = 256;
    Eigen::MatrixXd e;
    for (Eigen::Index start = 0; start < n; start += chunk) {
        Eigen::Index rows = std::min(chunk, n - start);
        auto Xc = X.middleRows(start, rows);
        e.noalias() = -2.0 * (Xc * grid.references.transpose());
        e.rowwise() += grid.ref_sqnorm.transpose();
        e.colwise() += Xc.rowwise().squaredNorm();
        e /= h;
        e = e.cwiseMax(0.0);
        for (Eigen::Index i = 0; i < rows; ++i) {
            Eigen::VectorXd w = e.row(i).transpose();
            weights_from_errors(w, grid.sigma_min_sq, prior_w);
            for (Eigen::Index j = 0; j < j_count; ++j)
                out(start + i, bin_idx[static_cast<size_t>(j)]) += w(j);
        }
    }
    return out;
}

double summarize(const Posterior& posterior, SummaryRule rule) {
    const auto& w = posterior.weights;
    const auto& r = posterior.grid->quantities;
    if (rule == SummaryRule::mode) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < w.size(); ++j)
            if (w(j) > w(best)) best = j;  // strict: ties keep the lower quantity
        return r[static_cast<size_t>(best)];
    }
    double mean = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) mean += w(j) * r[static_cast<size_t>(j)];
    return mean;
}

double recover_pendulum_energy(const Trajectory& x, const FamilyConfig& config) {
    if (x.horizon < 3)
        throw std::invalid_argument("recover_pendulum_energy: need at least 3 timesteps");
    if (x.dims != 2)
        throw std::invalid_argument("recover_pendulum_energy: expected two angle coordinates");
    std::vector<double> energies;
    energies.reserve(static_cast<size_t>(x.horizon - 2));
    for (int t = 1; t + 1 < x.horizon; ++t) {
        double w1 = (x.at(t + 1, 0) - x.at(t - 1, 0)) / (2.0 * config.dt);
        double w2 = (x.at(t + 1, 1) - x.at(t - 1, 1)) / (2.0 * config.dt);
        energies.push_back(
            systems::pendulum_energy(config.pendulum, {x.at(t, 0), x.at(t, 1), w1, w2}));
    }
    size_t mid = energies.size() / 2;
    std::nth_element(energies.begin(), energies.begin() + static_cast<std::ptrdiff_t>(mid),
                     energies.end());
    if (energies.size() % 2 == 1) return energies[mid];
    double hi = energies[mid];
    double lo = *std::max_element(energies.begin(), energies.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double recover_path_length(const Trajectory& x) {
    if (x.horizon < 2) throw std::invalid_argument("recover_path_length: need at least 2 steps");
    double total = 0.0;
    for (int t = 0; t + 1 < x.horizon; ++t) {
        double step_sq = 0.0;
        for (int c = 0; c < x.dims; ++c) {
            double d = x.at(t + 1, c) - x.at(t, c);
            step_sq += d * d;
        }
        total += std::sqrt(step_sq);
    }
    return total;
}

BinnedMarginal pullback_marginal(const std::vector<Posterior>& posteriors,
                                 const QuantityPrior& prior) {
    if (posteriors.empty()) throw std::invalid_argument("pullback_marginal: empty input");
    BinnedMarginal marg;
    marg.edges = prior.edges();
    marg.mass.assign(static_cast<size_t>(prior.bins), 0.0);
    for (const Posterior& post : posteriors) {
        const auto& r = post.grid->quantities;
        for (Eigen::Index j = 0; j < post.weights.size(); ++j)
            marg.mass[static_cast<size_t>(prior.bin_of(r[static_cast<size_t>(j)]))] +=
                post.weights(j);
    }
    for (double& m : marg.mass) m /= static_cast<double>(posteriors.size());
    return marg;
}

BinnedMarginal pullback_marginal(const Eigen::MatrixXd& binned_posteriors,
                                 const QuantityPrior& prior) {
    if (binned_posteriors.rows() == 0)
        throw std::invalid_argument("pullback_marginal: empty input");
    if (binned_posteriors.cols() != prior.bins)
        throw std::invalid_argument("pullback_marginal: bin count mismatch");
    BinnedMarginal marg;
    marg.edges = prior.edges();
    Eigen::RowVectorXd mean = binned_posteriors.colwise().mean();
    marg.mass.assign(mean.data(), mean.data() + mean.size());
    return marg;
}

BinnedMarginal pullback_scalars(const std::vector<double>& recovered,
                                const QuantityPrior& prior, int* out_of_range) {
    if (recovered.empty()) throw std::invalid_argument("pullback_scalars: empty input");
    BinnedMarginal marg;
    marg.edges = prior.edges();
    marg.mass.assign(static_cast<size_t>(prior.bins), 0.0);
    int clamped = 0;
    for (double r : recovered) {
        if (r < prior.lower || r > prior.upper) ++clamped;
        marg.mass[static_cast<size_t>(prior.bin_of(r))] += 1.0;
    }
    for (double& m : marg.mass) m /= static_cast<double>(recovered.size());
    if (out_of_range) *out_of_range = clamped;
    return marg;
}

}  // namespace physmg::recovery
