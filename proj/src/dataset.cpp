#include "physmg/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "physmg/rng.hpp"

namespace physmg::systems {

Normalization Normalization::for_family(const FamilyConfig& config) {
    Normalization norm;
    if (config.kind == FamilyKind::pendulum) {
        // Angles start in [-pi, pi]; leave headroom for occasional winding
        // near the top of the energy range.
        norm.lo = {-2.0 * M_PI, -2.0 * M_PI};
        norm.hi = {2.0 * M_PI, 2.0 * M_PI};
    } else {
        norm.lo = {0.0};
        norm.hi = {1.0};
    }
    return norm;
}

Dataset sample_dataset(const FamilyConfig& config, const QuantityPrior& prior,
                       int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    config.validate();
    prior.validate();
    if (config.kind == FamilyKind::pendulum)
        throw std::invalid_argument("sample_dataset: use curate_pendulum_dataset for the pendulum");

    Dataset ds;
    ds.family = config;
    ds.prior = prior;
    ds.normalization = Normalization::for_family(config);
    ds.trajectories.reserve(static_cast<size_t>(n));
    const std::uint64_t purpose = rng::tag("sample_dataset");
    for (int i = 0; i < n; ++i) {
        rng::Stream stream(seed, purpose, static_cast<std::uint64_t>(i));
        double r = quantile_transport(prior, stream.next_double());
        ds.trajectories.push_back(rollout(config, r));
    }
    return ds;
}

Dataset curate_pendulum_dataset(const FamilyConfig& config, const QuantityPrior& prior,
                                int n, std::uint64_t seed,
                                std::int64_t attempt_budget) {
    if (n < 1) throw std::invalid_argument("curate_pendulum_dataset: n must be >= 1");
    config.validate();
    prior.validate();
    if (config.kind != FamilyKind::pendulum)
        throw std::invalid_argument("curate_pendulum_dataset: pendulum family only");

    Dataset ds;
    ds.family = config;
    ds.prior = prior;
    ds.normalization = Normalization::for_family(config);
    ds.trajectories.reserve(static_cast<size_t>(n));

    const int bins = prior.bins;
    const std::uint64_t purpose = rng::tag("curate_pendulum");
    const double v_max = 3.0;  // rad/s; potential alone already spans the range
    for (int b = 0; b < bins; ++b) {
        int want = n / bins + (b < n % bins ? 1 : 0);
        double lo = prior.bin_lo(b), hi = prior.bin_hi(b);
        rng::Stream stream(seed, purpose, static_cast<std::uint64_t>(b));
        std::int64_t attempts = 0;
        int have = 0;
        while (have < want) {
            if (++attempts > attempt_budget)
                throw std::runtime_error("curate_pendulum_dataset: bin " + std::to_string(b) +
                                         " unreachable within the attempt budget");
            std::array<double, 4> s;
            s[0] = (2.0 * stream.next_double() - 1.0) * M_PI;
            s[1] = (2.0 * stream.next_double() - 1.0) * M_PI;
            double dir = 2.0 * M_PI * stream.next_double();
            double mag = v_max * stream.next_double();
            s[2] = mag * std::cos(dir);
            s[3] = mag * std::sin(dir);
            double energy = pendulum_energy(config.pendulum, s);
            if (energy < lo || energy >= hi) continue;
            double e_out = 0.0;
            ds.trajectories.push_back(pendulum_rollout(config, s, &e_out));
            ++have;
        }
    }
    return ds;
}

}  // namespace physmg::systems
