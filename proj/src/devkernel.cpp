#include "physmg/devkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "physmg/special.hpp"

namespace physmg::devkernel {

void KernelConfig::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("KernelConfig: sigma must be >= 0");
    if (run_length < 1) throw std::invalid_argument("KernelConfig: run_length must be >= 1");
    if (k_dec_floor < 1) throw std::invalid_argument("KernelConfig: k_dec_floor must be >= 1");
    if (clip_to_bounds && !(bound_lo < bound_hi))
        throw std::invalid_argument("KernelConfig: invalid coordinate bounds");
    if (variance_prepass_draws < 2)
        throw std::invalid_argument("KernelConfig: variance_prepass_draws must be >= 2");
}

PieceIndex PieceIndex::build(const Dataset& dataset) {
    if (dataset.trajectories.empty())
        throw std::invalid_argument("build_piece_index: empty dataset");
    PieceIndex index;
    index.horizon_ = dataset.family.horizon;
    index.dims_ = dataset.trajectories.front().dims;
    index.count_ = dataset.trajectories.size();
    index.norm_ = dataset.normalization;
    const size_t d = static_cast<size_t>(index.dims_);
    index.data_.resize(static_cast<size_t>(index.horizon_) * index.count_ * d);
    index.owners_.resize(static_cast<size_t>(index.horizon_) * index.count_);
    index.by_traj_.resize(index.count_ * static_cast<size_t>(index.horizon_) * d);

    for (size_t p = 0; p < index.count_; ++p) {
        const Trajectory& traj = dataset.trajectories[p];
        if (traj.horizon != index.horizon_ || traj.dims != index.dims_)
            throw std::invalid_argument("build_piece_index: ragged dataset");
        for (int u = 0; u < index.horizon_; ++u)
            for (int c = 0; c < index.dims_; ++c)
                index.by_traj_[(p * static_cast<size_t>(index.horizon_) +
                                static_cast<size_t>(u)) * d + static_cast<size_t>(c)] =
                    index.norm_.normalize(traj.at(u, c), c);
    }

    std::vector<std::uint32_t> order(index.count_);
    for (int u = 0; u < index.horizon_; ++u) {
        double* block = index.data_.data() + static_cast<size_t>(u) * index.count_ * d;
        std::uint32_t* own = index.owners_.data() + static_cast<size_t>(u) * index.count_;
        std::iota(order.begin(), order.end(), 0u);
        if (index.dims_ == 1) {
            std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                double va = index.by_traj_[a * static_cast<size_t>(index.horizon_) +
                                           static_cast<size_t>(u)];
                double vb = index.by_traj_[b * static_cast<size_t>(index.horizon_) +
                                           static_cast<size_t>(u)];
                return va != vb ? va < vb : a < b;
            });
        }
        for (size_t p = 0; p < index.count_; ++p) {
            own[p] = order[p];
            const double* src = index.by_traj_.data() +
                                (order[p] * static_cast<size_t>(index.horizon_) +
                                 static_cast<size_t>(u)) * d;
            std::copy(src, src + d, block + p * d);
        }
    }
    return index;
}

PieceIndex build_piece_index(const Dataset& dataset) { return PieceIndex::build(dataset); }

std::span<const double> PieceIndex::pieces(int u) const {
    if (dims_ != 1) throw std::logic_error("PieceIndex::pieces: 1-D states only");
    return {data_.data() + static_cast<size_t>(u) * count_, count_};
}

std::span<const double> PieceIndex::piece(int u, size_t p) const {
    const double* base = data_.data() +
                         (static_cast<size_t>(u) * count_ + p) * static_cast<size_t>(dims_);
    return {base, static_cast<size_t>(dims_)};
}

size_t PieceIndex::owner(int u, size_t p) const {
    return owners_[static_cast<size_t>(u) * count_ + p];
}

std::span<const double> PieceIndex::state(size_t traj, int u) const {
    const double* base = by_traj_.data() +
                         (traj * static_cast<size_t>(horizon_) + static_cast<size_t>(u)) *
                             static_cast<size_t>(dims_);
    return {base, static_cast<size_t>(dims_)};
}

size_t PieceIndex::count_within(int u, std::span<const double> center, double radius) const {
    if (dims_ == 1) {
        auto ps = pieces(u);
        auto lo = std::lower_bound(ps.begin(), ps.end(), center[0] - radius);
        auto hi = std::upper_bound(ps.begin(), ps.end(), center[0] + radius);
        return static_cast<size_t>(hi - lo);
    }
    size_t n = 0;
    double r2 = radius * radius;
    for (size_t p = 0; p < count_; ++p) {
        auto z = piece(u, p);
        double d2 = 0.0;
        for (int c = 0; c < dims_; ++c) {
            double d = z[static_cast<size_t>(c)] - center[static_cast<size_t>(c)];
            d2 += d * d;
        }
        if (d2 <= r2) ++n;
    }
    return n;
}

size_t PieceIndex::nearest(int u, std::span<const double> center) const {
    if (dims_ == 1) {
        auto ps = pieces(u);
        auto it = std::lower_bound(ps.begin(), ps.end(), center[0]);
        size_t i = static_cast<size_t>(it - ps.begin());
        if (i == count_) return count_ - 1;
        if (i == 0) return 0;
        return (center[0] - ps[i - 1] <= ps[i] - center[0]) ? i - 1 : i;
    }
    size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < count_; ++p) {
        auto z = piece(u, p);
        double d2 = 0.0;
        for (int c = 0; c < dims_; ++c) {
            double d = z[static_cast<size_t>(c)] - center[static_cast<size_t>(c)];
            d2 += d * d;
        }
        if (d2 < best_d2) {
            best_d2 = d2;
            best = p;
        }
    }
    return best;
}

double one_scale_median(const PieceIndex& index, double sigma) {
    std::vector<double> loc_medians;
    loc_medians.reserve(static_cast<size_t>(index.locations()));
    std::vector<double> counts;
    for (int u = 0; u < index.locations(); ++u) {
        counts.clear();
        for (size_t p = 0; p < index.pieces_per_location(); ++p)
            counts.push_back(
                static_cast<double>(index.count_within(u, index.piece(u, p), sigma)));
        std::sort(counts.begin(), counts.end());
        size_t m = counts.size() / 2;
        loc_medians.push_back(counts.size() % 2 == 1 ? counts[m]
                                                     : 0.5 * (counts[m - 1] + counts[m]));
    }
    std::sort(loc_medians.begin(), loc_medians.end());
    size_t m = loc_medians.size() / 2;
    return loc_medians.size() % 2 == 1 ? loc_medians[m]
                                       : 0.5 * (loc_medians[m - 1] + loc_medians[m]);
}

int dense_cutoff(std::span<const double> per_system_medians) {
    if (per_system_medians.empty())
        throw std::invalid_argument("dense_cutoff: no medians given");
    std::vector<double> meds(per_system_medians.begin(), per_system_medians.end());
    std::sort(meds.begin(), meds.end());
    size_t m = meds.size() / 2;
    double median = meds.size() % 2 == 1 ? meds[m] : 0.5 * (meds[m - 1] + meds[m]);
    int cutoff = 1;
    while (2.0 * cutoff <= median) cutoff *= 2;
    return cutoff;
}

int dense_cutoff(const PieceIndex& index, double sigma) {
    double med = one_scale_median(index, sigma);
    return dense_cutoff(std::span<const double>(&med, 1));
}

DeviationKernel::DeviationKernel(const PieceIndex& index, KernelConfig config)
    : index_(index), config_(config) {
    config_.validate();
    if (config_.dense_cutoff > 0)
        cutoff_ = config_.dense_cutoff;
    else if (config_.sigma > 0.0)
        cutoff_ = dense_cutoff(index_, config_.sigma);
}

int DeviationKernel::alpha_at(int u, std::span<const double> center) const {
    size_t one_scale = index_.count_within(u, center, config_.sigma);
    return one_scale >= static_cast<size_t>(cutoff_) ? 3 : 1;
}

Neighborhood DeviationKernel::neighborhood_at(int u, std::span<const double> center) const {
    Neighborhood nb;
    nb.alpha = alpha_at(u, center);
    double radius = nb.alpha * config_.sigma;
    double inv_2s2 = 1.0 / (2.0 * config_.sigma * config_.sigma);
    if (index_.dims() == 1) {
        auto ps = index_.pieces(u);
        auto lo = std::lower_bound(ps.begin(), ps.end(), center[0] - radius);
        auto hi = std::upper_bound(ps.begin(), ps.end(), center[0] + radius);
        for (auto it = lo; it != hi; ++it) {
            double d = *it - center[0];
            nb.piece_ids.push_back(static_cast<size_t>(it - ps.begin()));
            nb.weights.push_back(std::exp(-d * d * inv_2s2));
        }
    } else {
        double r2 = radius * radius;
        for (size_t p = 0; p < index_.pieces_per_location(); ++p) {
            auto z = index_.piece(u, p);
            double d2 = 0.0;
            for (int c = 0; c < index_.dims(); ++c) {
                double d = z[static_cast<size_t>(c)] - center[static_cast<size_t>(c)];
                d2 += d * d;
            }
            if (d2 <= r2) {
                nb.piece_ids.push_back(p);
                nb.weights.push_back(std::exp(-d2 * inv_2s2));
            }
        }
    }
    if (nb.piece_ids.size() < static_cast<size_t>(config_.k_dec_floor)) {
        nb.piece_ids.assign(1, index_.nearest(u, center));
        nb.weights.assign(1, 1.0);
        nb.fallback_nearest = true;
    }
    return nb;
}

Neighborhood DeviationKernel::local_neighborhood(const Trajectory& x, int u) const {
    if (config_.sigma == 0.0)
        throw std::logic_error("local_neighborhood: undefined at sigma = 0");
    std::vector<double> center(static_cast<size_t>(index_.dims()));
    for (int c = 0; c < index_.dims(); ++c)
        center[static_cast<size_t>(c)] = index_.normalization().normalize(x.at(u, c), c);
    return neighborhood_at(u, center);
}

DeviationKernel::DrawContext DeviationKernel::make_context(
    int u, std::span<const double> center) const {
    DrawContext ctx;
    if (index_.dims() == 1 && alpha_at(u, center) == 3) {
        ctx.dense = true;
        return ctx;
    }
    ctx.nb = neighborhood_at(u, center);
    ctx.cdf.resize(ctx.nb.weights.size());
    double cum = 0.0;
    for (size_t i = 0; i < ctx.nb.weights.size(); ++i) {
        cum += ctx.nb.weights[i];
        ctx.cdf[i] = cum;
    }
    return ctx;
}

size_t DeviationKernel::draw_donor(const DrawContext& ctx, int u,
                                   std::span<const double> center,
                                   rng::Stream& stream) const {
    if (ctx.dense) {
        // Dense 1-D path: truncated Gaussian offset snapped to the nearest
        // observed piece; truncation matches the support radius alpha = 3.
        // Pieces sharing that value are tied, so the donor among them is
        // picked uniformly.
        static const double lo = special::norm_cdf(-3.0);
        static const double hi = special::norm_cdf(3.0);
        double offset = special::norm_ppf(lo + stream.next_double() * (hi - lo)) *
                        config_.sigma;
        double target = center[0] + offset;
        auto ps = index_.pieces(u);
        size_t p = index_.nearest(u, std::span<const double>(&target, 1));
        auto range = std::equal_range(ps.begin(), ps.end(), ps[p]);
        size_t first = static_cast<size_t>(range.first - ps.begin());
        size_t n_tied = static_cast<size_t>(range.second - range.first);
        size_t pick = first;
        if (n_tied > 1)
            pick = first + static_cast<size_t>(stream.next_double() *
                                               static_cast<double>(n_tied));
        return index_.owner(u, std::min(pick, first + n_tied - 1));
    }
    double target = stream.next_double() * ctx.cdf.back();
    size_t pick = static_cast<size_t>(
        std::upper_bound(ctx.cdf.begin(), ctx.cdf.end(), target) - ctx.cdf.begin());
    if (pick >= ctx.nb.piece_ids.size()) pick = ctx.nb.piece_ids.size() - 1;
    return index_.owner(u, ctx.nb.piece_ids[pick]);
}

const std::vector<double>& DeviationKernel::run_variance(
    int u0, int u_end, std::span<const double> center) const {
    // Memo key quantizes the anchor state; the prepass stream is keyed by
    // (location, quantized state) so the estimate is independent of
    // evaluation order. The donor-state variance does not depend on the rest
    // of the perturbed trajectory, only on the anchor that selects donors.
    std::vector<long long> q(center.size());
    for (size_t c = 0; c < center.size(); ++c)
        q[c] = std::llround(center[c] * 4096.0);
    auto key = std::make_pair(u0, std::move(q));

    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = var_cache_.find(key);
        if (it != var_cache_.end()) return it->second;
    }

    std::uint64_t idx = static_cast<std::uint64_t>(u0);
    for (long long qc : key.second)
        idx = rng::mix64(idx ^ static_cast<std::uint64_t>(qc) * 0x9e3779b97f4a7c15ULL);
    rng::Stream stream(0x7265736964ULL, rng::tag("residual_variance"), idx);

    const size_t d = static_cast<size_t>(index_.dims());
    const size_t span_len = static_cast<size_t>(u_end - u0) * d;
    const int n = config_.variance_prepass_draws;
    DrawContext ctx = make_context(u0, center);
    std::vector<double> sum(span_len, 0.0), sumsq(span_len, 0.0);
    for (int i = 0; i < n; ++i) {
        size_t donor = draw_donor(ctx, u0, center, stream);
        for (int u = u0; u < u_end; ++u) {
            auto z = index_.state(donor, u);
            for (size_t c = 0; c < d; ++c) {
                size_t k = static_cast<size_t>(u - u0) * d + c;
                sum[k] += z[c];
                sumsq[k] += z[c] * z[c];
            }
        }
    }
    std::vector<double> var(span_len);
    for (size_t k = 0; k < span_len; ++k) {
        double mean = sum[k] / n;
        var[k] = std::max(sumsq[k] / n - mean * mean, 0.0);
    }

    std::lock_guard<std::mutex> lock(cache_mutex_);
    return var_cache_.emplace(std::move(key), std::move(var)).first->second;
}

Trajectory DeviationKernel::perturb(const Trajectory& x, rng::Stream& stream,
                                    PerturbStats* stats) const {
    if (x.horizon != index_.locations() || x.dims != index_.dims())
        throw std::invalid_argument("perturb: trajectory shape does not match index");
    if (config_.sigma == 0.0) return x;  // exact identity kernel

    const int h = x.horizon;
    const int d = x.dims;
    const Normalization& norm = index_.normalization();
    const double sigma_sq = config_.sigma * config_.sigma;

    Trajectory out = x;
    std::vector<double> center(static_cast<size_t>(d));

    int phase = 0;
    if (config_.randomize_run_phase)
        phase = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(config_.run_length));

    int run_start = phase == 0 ? 0 : phase - config_.run_length;
    for (; run_start < h; run_start += config_.run_length) {
        int u0 = std::max(run_start, 0);
        int u_end = std::min(run_start + config_.run_length, h);
        for (int c = 0; c < d; ++c)
            center[static_cast<size_t>(c)] = norm.normalize(x.at(u0, c), c);
        DrawContext ctx = make_context(u0, center);
        size_t donor = draw_donor(ctx, u0, center, stream);
        if (stats) ++stats->replacement_draws;
        const std::vector<double>& var = run_variance(u0, u_end, center);
        for (int u = u0; u < u_end; ++u) {
            auto z = index_.state(donor, u);
            for (int c = 0; c < d; ++c) {
                size_t k = static_cast<size_t>(u - u0) * static_cast<size_t>(d) +
                           static_cast<size_t>(c);
                double residual_sd = std::sqrt(std::max(sigma_sq - var[k], 0.0));
                double value = z[static_cast<size_t>(c)];
                if (residual_sd > 0.0) {
                    value += residual_sd * stream.next_normal();
                    if (stats) ++stats->residual_draws;
                }
                if (config_.clip_to_bounds)
                    value = std::clamp(value, config_.bound_lo, config_.bound_hi);
                out.at(u, c) = norm.denormalize(value, c);
            }
        }
    }

    if (config_.preserve_endpoints) {
        for (int c = 0; c < d; ++c) {
            out.at(0, c) = x.at(0, c);
            out.at(h - 1, c) = x.at(h - 1, c);
        }
    }
    return out;
}

}  // namespace physmg::devkernel
