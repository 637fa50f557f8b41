#include "physmg/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace physmg::mitigation {

namespace {

constexpr std::uint64_t kDecoderTag = rng::tag("decoder_matrix");
constexpr std::uint64_t kLhsTag = rng::tag("latin_hypercube");
constexpr std::uint64_t kInitTag = rng::tag("pairing_init");
constexpr std::uint64_t kSwapTag = rng::tag("pairing_swap");

void require_same_edges(const std::vector<double>& a, const std::vector<double>& b,
                        const char* who) {
    if (a != b) throw std::invalid_argument(std::string(who) + ": incompatible bin edges");
}

// k smallest squared distances from `query` to the support codes, nearest
// first; ties break toward the lower index.
std::vector<std::pair<double, int>> nearest_codes(std::span<const double> query,
                                                  const Eigen::MatrixXd& codes, int k) {
    const int n = static_cast<int>(codes.rows());
    std::vector<std::pair<double, int>> dist(static_cast<size_t>(n));
    for (int l = 0; l < n; ++l) {
        double d = 0.0;
        for (int c = 0; c < codes.cols(); ++c) {
            double diff = query[static_cast<size_t>(c)] - codes(l, c);
            d += diff * diff;
        }
        dist[static_cast<size_t>(l)] = {d, l};
    }
    k = std::min(k, n);
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    dist.resize(static_cast<size_t>(k));
    return dist;
}

// alpha_l proportional to exp(-(d_l^2 - d_l1^2) / (2 tau)) over the k nearest.
std::vector<std::pair<int, double>> alpha_weights(std::span<const double> query,
                                                  const Eigen::MatrixXd& codes, int k,
                                                  double tau) {
    auto near = nearest_codes(query, codes, k);
    std::vector<std::pair<int, double>> out;
    out.reserve(near.size());
    double base = near.front().first;
    double total = 0.0;
    for (auto [d, l] : near) {
        double w = tau > 0.0 ? std::exp(-(d - base) / (2.0 * tau)) : (d == base ? 1.0 : 0.0);
        out.emplace_back(l, w);
        total += w;
    }
    for (auto& [l, w] : out) w /= total;
    return out;
}

// Codes wrapped as a one-coordinate dataset on [0, 1] so the deviation
// kernel machinery applies unchanged in code space.
systems::Dataset code_dataset(const CodeSupport& support) {
    systems::Dataset ds;
    ds.family.kind = systems::FamilyKind::sinusoid;
    ds.family.horizon = support.dims();
    ds.normalization.lo = {0.0};
    ds.normalization.hi = {1.0};
    ds.trajectories.reserve(static_cast<size_t>(support.size()));
    for (int j = 0; j < support.size(); ++j) {
        systems::Trajectory t;
        t.horizon = support.dims();
        t.dims = 1;
        t.values.resize(static_cast<size_t>(support.dims()));
        for (int c = 0; c < support.dims(); ++c)
            t.values[static_cast<size_t>(c)] = support.codes(j, c);
        ds.trajectories.push_back(std::move(t));
    }
    return ds;
}

}  // namespace

ReweightPlan compute_reweight(std::span<const double> recovered, const QuantityPrior& prior,
                              const BinnedMarginal& model_marginal, double floor) {
    if (recovered.empty()) throw std::invalid_argument("compute_reweight: empty input");
    require_same_edges(prior.edges(), model_marginal.edges, "compute_reweight");
    ReweightPlan plan;
    plan.floor = floor;
    plan.weights.reserve(recovered.size());
    plan.bin_of.reserve(recovered.size());
    double total = 0.0;
    for (double r : recovered) {
        if (r < prior.lower || r > prior.upper) ++plan.out_of_range;
        int b = prior.bin_of(r);
        double w = prior.density[static_cast<size_t>(b)] /
                   std::max(model_marginal.mass[static_cast<size_t>(b)], floor);
        plan.bin_of.push_back(b);
        plan.weights.push_back(w);
        total += w;
    }
    if (!(total > 0.0)) throw std::runtime_error("compute_reweight: all weights vanish");
    for (double& w : plan.weights) w /= total;
    return plan;
}

BinnedMarginal inverse_prior(const BinnedMarginal& model_marginal, double floor_fraction) {
    model_marginal.validate();
    const double floor = floor_fraction / static_cast<double>(model_marginal.bins());
    BinnedMarginal out;
    out.edges = model_marginal.edges;
    out.mass.resize(model_marginal.mass.size());
    double total = 0.0;
    for (size_t b = 0; b < out.mass.size(); ++b) {
        out.mass[b] = 1.0 / std::max(model_marginal.mass[b], floor);
        total += out.mass[b];
    }
    for (double& m : out.mass) m /= total;
    return out;
}

CodeSupport latin_hypercube(int n, int d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw std::invalid_argument("latin_hypercube: n and d must be >= 1");
    CodeSupport support;
    support.seed = seed;
    support.codes.resize(n, d);
    for (int c = 0; c < d; ++c) {
        rng::Stream stream(seed, kLhsTag, static_cast<std::uint64_t>(c));
        std::vector<int> strata(static_cast<size_t>(n));
        std::iota(strata.begin(), strata.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(strata[static_cast<size_t>(i)], strata[static_cast<size_t>(j)]);
        }
        for (int i = 0; i < n; ++i)
            support.codes(i, c) =
                (strata[static_cast<size_t>(i)] + stream.next_double()) / static_cast<double>(n);
    }
    return support;
}

double decoder_bandwidth(const CodeSupport& support, int k_dec) {
    if (k_dec < 1) throw std::invalid_argument("decoder_bandwidth: k_dec must be >= 1");
    const int n = support.size();
    if (n < 2) return 1.0;  // single code: weights are trivially (1)
    const int k = std::min(k_dec, n - 1);
    std::vector<double> farthest(static_cast<size_t>(n));
    std::vector<double> dist;
    for (int j = 0; j < n; ++j) {
        dist.clear();
        for (int l = 0; l < n; ++l) {
            if (l == j) continue;
            dist.push_back((support.codes.row(j) - support.codes.row(l)).squaredNorm());
        }
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        farthest[static_cast<size_t>(j)] = dist[static_cast<size_t>(k - 1)];
    }
    size_t mid = farthest.size() / 2;
    std::nth_element(farthest.begin(), farthest.begin() + static_cast<std::ptrdiff_t>(mid),
                     farthest.end());
    if (farthest.size() % 2 == 1) return farthest[mid];
    double hi = farthest[mid];
    double lo = *std::max_element(farthest.begin(),
                                  farthest.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

DecoderMatrix decoder_matrix(const CodeSupport& support, const KernelConfig& kernel,
                             int k_dec, int perturbations_per_code, std::uint64_t seed) {
    if (k_dec < 1) throw std::invalid_argument("decoder_matrix: k_dec must be >= 1");
    if (perturbations_per_code < 1)
        throw std::invalid_argument("decoder_matrix: perturbations_per_code must be >= 1");
    kernel.validate();
    const int n = support.size();
    DecoderMatrix m;
    m.k_dec = k_dec;
    m.tau = decoder_bandwidth(support, k_dec);
    m.rows.resize(static_cast<size_t>(n));

    systems::Dataset ds = code_dataset(support);
    devkernel::PieceIndex index = devkernel::PieceIndex::build(ds);
    devkernel::DeviationKernel dev(index, kernel);

    std::vector<double> acc(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int p = 0; p < perturbations_per_code; ++p) {
            rng::Stream stream(seed, kDecoderTag,
                               static_cast<std::uint64_t>(j) * perturbations_per_code + p);
            systems::Trajectory perturbed =
                dev.perturb(ds.trajectories[static_cast<size_t>(j)], stream);
            for (auto [l, w] : alpha_weights(perturbed.values, support.codes, k_dec, m.tau))
                acc[static_cast<size_t>(l)] += w;
        }
        auto& row = m.rows[static_cast<size_t>(j)];
        for (int l = 0; l < n; ++l)
            if (acc[static_cast<size_t>(l)] > 0.0)
                row.emplace_back(l, acc[static_cast<size_t>(l)] /
                                        static_cast<double>(perturbations_per_code));
    }
    return m;
}

std::vector<BinnedMarginal> local_mixtures(const DecoderMatrix& m, const Pairing& pairing,
                                           const std::vector<BinnedMarginal>& nu) {
    const int n = m.size();
    if (static_cast<int>(pairing.assignment.size()) != n || static_cast<int>(nu.size()) != n)
        throw std::invalid_argument("local_mixtures: size mismatch");
    std::vector<BinnedMarginal> out(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        BinnedMarginal& p = out[static_cast<size_t>(j)];
        p.edges = nu.front().edges;
        p.mass.assign(nu.front().mass.size(), 0.0);
        for (auto [l, w] : m.rows[static_cast<size_t>(j)]) {
            const BinnedMarginal& v =
                nu[static_cast<size_t>(pairing.assignment[static_cast<size_t>(l)])];
            require_same_edges(p.edges, v.edges, "local_mixtures");
            for (size_t b = 0; b < p.mass.size(); ++b) p.mass[b] += w * v.mass[b];
        }
    }
    return out;
}

double pairing_objective(const DecoderMatrix& m, const Pairing& pairing,
                         const std::vector<BinnedMarginal>& nu, const QuantityPrior& prior) {
    std::vector<BinnedMarginal> mixtures = local_mixtures(m, pairing, nu);
    double total = 0.0;
    for (const BinnedMarginal& p : mixtures) {
        require_same_edges(p.edges, prior.edges(), "pairing_objective");
        for (size_t b = 0; b < p.mass.size(); ++b) {
            double d = p.mass[b] - prior.density[b];
            total += d * d;
        }
    }
    return total / static_cast<double>(mixtures.size());
}

Pairing init_pairing(const DecoderMatrix& m, const std::vector<BinnedMarginal>& nu,
                     const QuantityPrior& prior, std::uint64_t seed) {
    const int n = m.size();
    if (static_cast<int>(nu.size()) != n)
        throw std::invalid_argument("init_pairing: size mismatch");
    Pairing pairing;
    pairing.assignment.resize(static_cast<size_t>(n));
    std::iota(pairing.assignment.begin(), pairing.assignment.end(), 0);
    rng::Stream stream(seed, kInitTag);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(pairing.assignment[static_cast<size_t>(i)],
                  pairing.assignment[static_cast<size_t>(j)]);
    }
    pairing.objective = pairing_objective(m, pairing, nu, prior);
    pairing.trace = {pairing.objective};
    return pairing;
}

Pairing swap_optimize(const DecoderMatrix& m, const std::vector<BinnedMarginal>& nu,
                      const QuantityPrior& prior, std::span<const int> bin_of,
                      Pairing start, const SwapOptions& options) {
    const int n = m.size();
    if (static_cast<int>(start.assignment.size()) != n || static_cast<int>(nu.size()) != n ||
        static_cast<int>(bin_of.size()) != n)
        throw std::invalid_argument("swap_optimize: size mismatch");
    const int b_count = prior.bins;
    const int max_iters = options.max_iters > 0 ? options.max_iters : 200 * n;
    const int patience = options.patience > 0 ? options.patience : 20 * n;

    // Cells in more than one bin are required for a cross-bin proposal.
    bool mixed_bins = false;
    for (int i = 1; i < n && !mixed_bins; ++i)
        mixed_bins = bin_of[static_cast<size_t>(start.assignment[static_cast<size_t>(i)])] !=
                     bin_of[static_cast<size_t>(start.assignment[0])];

    // Current mixtures, stored row-major: proposals read whole rows.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(n, b_count);
    for (int j = 0; j < n; ++j)
        for (auto [l, w] : m.rows[static_cast<size_t>(j)]) {
            const auto& mass =
                nu[static_cast<size_t>(start.assignment[static_cast<size_t>(l)])].mass;
            for (int b = 0; b < b_count; ++b) p(j, b) += w * mass[static_cast<size_t>(b)];
        }
    Eigen::RowVectorXd pi(b_count);
    for (int b = 0; b < b_count; ++b) pi(b) = prior.density[static_cast<size_t>(b)];

    // Column-to-rows incidence of the decoder matrix.
    std::vector<std::vector<std::pair<int, double>>> col_rows(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        for (auto [l, w] : m.rows[static_cast<size_t>(j)])
            col_rows[static_cast<size_t>(l)].emplace_back(j, w);

    Pairing best = std::move(start);
    double objective = 0.0;
    for (int j = 0; j < n; ++j) objective += (p.row(j) - pi).squaredNorm();
    objective /= static_cast<double>(n);
    best.objective = objective;
    if (best.trace.empty()) best.trace.push_back(objective);

    rng::Stream stream(options.seed, kSwapTag);
    std::vector<int> touched;
    touched.reserve(static_cast<size_t>(n));
    std::vector<double> scale(static_cast<size_t>(n), 0.0);  // net row weight w_a - w_b
    std::vector<char> seen(static_cast<size_t>(n), 0);
    Eigen::RowVectorXd diff(b_count);  // nu[a(b)] - nu[a(a)]
    int rejections = 0;
    for (int iter = 0; iter < max_iters && mixed_bins && objective > 1e-18; ++iter) {
        int cell_a, cell_b;
        do {
            cell_a = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(n));
            cell_b = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(n));
        } while (bin_of[static_cast<size_t>(best.assignment[static_cast<size_t>(cell_a)])] ==
                 bin_of[static_cast<size_t>(best.assignment[static_cast<size_t>(cell_b)])]);

        const auto& mass_a =
            nu[static_cast<size_t>(best.assignment[static_cast<size_t>(cell_a)])].mass;
        const auto& mass_b =
            nu[static_cast<size_t>(best.assignment[static_cast<size_t>(cell_b)])].mass;
        for (int b = 0; b < b_count; ++b)
            diff(b) = mass_b[static_cast<size_t>(b)] - mass_a[static_cast<size_t>(b)];
        const double diff_sq = diff.squaredNorm();
        const double pi_dot = diff.dot(pi);

        // Row j moves by s_j * diff with s_j = w_a(j) - w_b(j); expanding the
        // squared deviation gives delta_j = s_j (2 <p_j - pi, diff> + s_j |diff|^2).
        touched.clear();
        for (auto [row, w] : col_rows[static_cast<size_t>(cell_a)]) {
            if (!seen[static_cast<size_t>(row)]) {
                seen[static_cast<size_t>(row)] = 1;
                scale[static_cast<size_t>(row)] = 0.0;
                touched.push_back(row);
            }
            scale[static_cast<size_t>(row)] += w;
        }
        for (auto [row, w] : col_rows[static_cast<size_t>(cell_b)]) {
            if (!seen[static_cast<size_t>(row)]) {
                seen[static_cast<size_t>(row)] = 1;
                scale[static_cast<size_t>(row)] = 0.0;
                touched.push_back(row);
            }
            scale[static_cast<size_t>(row)] -= w;
        }
        double delta = 0.0;
        for (int row : touched) {
            double s = scale[static_cast<size_t>(row)];
            if (s != 0.0) delta += s * (2.0 * (p.row(row).dot(diff) - pi_dot) + s * diff_sq);
        }
        delta /= static_cast<double>(n);

        if (delta < 0.0) {
            for (int row : touched) {
                double s = scale[static_cast<size_t>(row)];
                if (s != 0.0) p.row(row) += s * diff;
            }
            std::swap(best.assignment[static_cast<size_t>(cell_a)],
                      best.assignment[static_cast<size_t>(cell_b)]);
            objective += delta;
            best.trace.push_back(objective);
            rejections = 0;
        } else if (++rejections >= patience) {
            rejections = 0;
            for (int row : touched) seen[static_cast<size_t>(row)] = 0;
            break;
        }
        for (int row : touched) seen[static_cast<size_t>(row)] = 0;
    }
    best.objective = objective;
    return best;
}

BinnedMarginal decode_average(std::span<const double> code, const CodeSupport& support,
                              const Pairing& pairing, const std::vector<BinnedMarginal>& nu,
                              int k_dec, double tau) {
    if (static_cast<int>(code.size()) != support.dims())
        throw std::invalid_argument("decode_average: code dimension mismatch");
    BinnedMarginal out;
    out.edges = nu.front().edges;
    out.mass.assign(nu.front().mass.size(), 0.0);
    for (auto [l, w] : alpha_weights(code, support.codes, k_dec, tau)) {
        const BinnedMarginal& v =
            nu[static_cast<size_t>(pairing.assignment[static_cast<size_t>(l)])];
        require_same_edges(out.edges, v.edges, "decode_average");
        for (size_t b = 0; b < out.mass.size(); ++b) out.mass[b] += w * v.mass[b];
    }
    return out;
}

int decode_sample_index(std::span<const double> code, const CodeSupport& support,
                        const Pairing& pairing, int k_dec, double tau, rng::Stream& stream) {
    if (static_cast<int>(code.size()) != support.dims())
        throw std::invalid_argument("decode_sample_index: code dimension mismatch");
    auto alphas = alpha_weights(code, support.codes, k_dec, tau);
    double u = stream.next_double();
    double acc = 0.0;
    for (auto [l, w] : alphas) {
        acc += w;
        if (u < acc) return pairing.assignment[static_cast<size_t>(l)];
    }
    return pairing.assignment[static_cast<size_t>(alphas.back().first)];
}

}  // namespace physmg::mitigation
