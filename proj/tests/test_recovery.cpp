#include <doctest.h>

#include <cmath>
#include <vector>

#include "physmg/dataset.hpp"
#include "physmg/recovery.hpp"
#include "physmg/rng.hpp"

using namespace physmg;
using namespace physmg::recovery;
using systems::Dataset;
using systems::FamilyConfig;
using systems::FamilyKind;
using systems::QuantityPrior;

namespace {

FamilyConfig tent_config(int horizon = 64) {
    FamilyConfig c;
    c.kind = FamilyKind::tent;
    c.horizon = horizon;
    return c;
}

// Scalar-loop reimplementation of the posterior, used as an oracle against
// the vectorized recovery.
std::vector<double> oracle_posterior(const ReferenceGrid& grid, const Trajectory& x,
                                     const QuantityPrior& prior) {
    Eigen::RowVectorXd row = normalized_row(x, grid.normalization);
    int J = grid.resolution();
    std::vector<double> e(static_cast<size_t>(J));
    double emin = 1e300;
    for (int j = 0; j < J; ++j) {
        double acc = 0.0;
        for (int k = 0; k < row.size(); ++k) {
            double d = row[k] - grid.references(j, k);
            acc += d * d;
        }
        e[static_cast<size_t>(j)] = acc / x.horizon;
        emin = std::min(emin, e[static_cast<size_t>(j)]);
    }
    double s2 = std::max(emin, grid.sigma_min_sq);
    std::vector<double> w(static_cast<size_t>(J));
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
        w[static_cast<size_t>(j)] = std::exp(-(e[static_cast<size_t>(j)] - emin) / (2.0 * s2)) *
                                    prior.density_at(grid.quantities[static_cast<size_t>(j)]);
        total += w[static_cast<size_t>(j)];
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

TEST_CASE("reference grid endpoints and determinism") {
    FamilyConfig c = tent_config(16);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 64);
    CHECK(g.resolution() == 64);
    CHECK(g.quantities.front() == 0.0);
    CHECK(g.quantities.back() == 2.0);
    ReferenceGrid g2 = build_reference_grid(c, prior, 64);
    CHECK(g.references == g2.references);

    ReferenceGrid tiny = build_reference_grid(c, prior, 2);
    CHECK(tiny.resolution() == 2);
    CHECK(tiny.quantities.front() == 0.0);
    CHECK(tiny.quantities.back() == 2.0);
}

TEST_CASE("posterior of an exact reference peaks at that reference") {
    FamilyConfig c = tent_config(32);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 256);
    Trajectory x = systems::rollout(c, g.quantities[100]);
    Posterior p = recover_posterior(g, x, prior);
    int argmax = 0;
    p.weights.maxCoeff(&argmax);
    CHECK(argmax == 100);
    CHECK(p.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vectorized posterior matches the scalar-loop oracle") {
    FamilyConfig c = tent_config(32);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 512);
    rng::Stream s(31, rng::tag("oracle"), 0);
    for (int i = 0; i < 5; ++i) {
        Trajectory x = systems::rollout(c, 2.0 * s.next_double());
        // add small noise so e_min is strictly positive
        for (auto& v : x.values) v = std::clamp(v + 1e-3 * s.next_normal(), 0.0, 1.0);
        Posterior p = recover_posterior(g, x, prior);
        auto w = oracle_posterior(g, x, prior);
        for (int j = 0; j < g.resolution(); ++j)
            CHECK(p.weights[j] == doctest::Approx(w[static_cast<size_t>(j)]).epsilon(1e-9));
    }
}

TEST_CASE("noisy tent posterior mode lands within 2 grid cells for r < 1") {
    FamilyConfig c = tent_config();
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 2048);
    rng::Stream s(77, rng::tag("noisy"), 0);
    for (int i = 0; i < 10; ++i) {
        double r = 0.4 + 0.55 * s.next_double();
        Trajectory x = systems::rollout(c, r);
        for (auto& v : x.values) v = std::clamp(v + 1e-3 * s.next_normal(), 0.0, 1.0);
        Posterior p = recover_posterior(g, x, prior);
        double mode = summarize(p, SummaryRule::mode);
        // decaying orbits carry only a handful of informative early steps, so
        // the mode is recovered coarsely rather than to grid precision
        CHECK(std::abs(mode - r) <= 0.02);
    }
}

TEST_CASE("posterior weights are invariant under shifting all e_j") {
    // softmax shift invariance: adding white noise of the same magnitude to
    // every coordinate raises all e_j roughly equally; the direct assertion
    // uses the oracle with an explicit constant added to e.
    FamilyConfig c = tent_config(16);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 128);
    Trajectory x = systems::rollout(c, 1.3);
    Eigen::RowVectorXd row = normalized_row(x, g.normalization);
    int J = g.resolution();
    Eigen::VectorXd e(J);
    for (int j = 0; j < J; ++j)
        e[j] = (row - g.references.row(j)).squaredNorm() / x.horizon;
    double s2 = std::max(e.minCoeff(), g.sigma_min_sq);
    auto weights_of = [&](const Eigen::VectorXd& ev) {
        Eigen::VectorXd w = (-(ev.array() - ev.minCoeff()) / (2.0 * s2)).exp();
        return (w / w.sum()).eval();
    };
    Eigen::VectorXd w0 = weights_of(e);
    Eigen::VectorXd w1 = weights_of((e.array() + 0.37).matrix().eval());
    CHECK((w0 - w1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("summarize rules on a hand-made posterior") {
    FamilyConfig c = tent_config(8);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0);
    ReferenceGrid g = build_reference_grid(c, prior, 3);  // quantities 0, 1, 2
    Posterior p;
    p.grid = &g;
    p.weights = Eigen::Vector3d(0.2, 0.3, 0.5);
    CHECK(summarize(p, SummaryRule::mode) == 2.0);
    CHECK(summarize(p, SummaryRule::mean) == doctest::Approx(1.3).epsilon(1e-12));
    // tie breaks toward the lower quantity
    p.weights = Eigen::Vector3d(0.4, 0.2, 0.4);
    CHECK(summarize(p, SummaryRule::mode) == 0.0);
}

TEST_CASE("pullback of point-mass posteriors splits mass across bins") {
    FamilyConfig c = tent_config(8);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0, 4);
    ReferenceGrid g = build_reference_grid(c, prior, 5);  // 0, .5, 1, 1.5, 2
    Posterior a, b;
    a.grid = b.grid = &g;
    a.weights = Eigen::VectorXd::Zero(5);
    a.weights[0] = 1.0;  // r=0 -> bin 0
    b.weights = Eigen::VectorXd::Zero(5);
    b.weights[4] = 1.0;  // r=2 -> clamped to bin 3
    BinnedMarginal m = pullback_marginal(std::vector<Posterior>{a, b}, prior);
    CHECK(m.mass[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.mass[3] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pullback_scalars clamps and counts out-of-range recoveries") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0, 4);
    int oor = 0;
    BinnedMarginal m = pullback_scalars({-0.5, 0.1, 1.1, 2.7}, prior, &oor);
    CHECK(oor == 2);
    CHECK(m.mass[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.mass[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(m.mass[3] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("pullback of references reproduces the binned prior") {
    FamilyConfig c = tent_config(32);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0, 8);
    ReferenceGrid g = build_reference_grid(c, prior, 4096);
    std::vector<double> qs(g.quantities.begin(), g.quantities.end());
    BinnedMarginal m = pullback_scalars(qs, prior);
    double tv = 0.0;
    for (int b = 0; b < 8; ++b) tv += std::abs(m.mass[static_cast<size_t>(b)] - 0.125);
    CHECK(0.5 * tv <= 0.125);  // within one grid cell of mass
}

TEST_CASE("recovered pendulum energy is within 2% on ground-truth rollouts") {
    FamilyConfig c;
    c.kind = FamilyKind::pendulum;
    c.horizon = 64;
    rng::Stream s(5, rng::tag("pend"), 0);
    for (int i = 0; i < 5; ++i) {
        std::array<double, 4> init = {2.0 * s.next_double() - 1.0, 2.0 * s.next_double() - 1.0,
                                      3.0 * s.next_double(), 3.0 * s.next_double()};
        double energy = 0.0;
        Trajectory x = systems::pendulum_rollout(c, init, &energy);
        if (energy < 1.0) continue;
        double rec = recover_pendulum_energy(x, c);
        CHECK(rec == doctest::Approx(energy).epsilon(0.02));
    }
}

TEST_CASE("median energy shrugs off one corrupted interior timestep") {
    FamilyConfig c;
    c.kind = FamilyKind::pendulum;
    c.horizon = 64;
    double energy = 0.0;
    Trajectory x = systems::pendulum_rollout(c, {1.0, -0.5, 1.0, 0.5}, &energy);
    double clean = recover_pendulum_energy(x, c);
    Trajectory dirty = x;
    dirty.at(30, 0) += 0.5;  // corrupt a single angle sample
    double rec = recover_pendulum_energy(dirty, c);
    // the outlier shifts only a few E_t entries, so the median barely moves
    CHECK(std::abs(rec - clean) / clean < 0.05);
}

TEST_CASE("path length basics") {
    Trajectory line;
    line.horizon = 3;
    line.dims = 2;
    line.values = {0.0, 0.0, 0.5, 0.0, 1.0, 0.0};
    CHECK(recover_path_length(line) == doctest::Approx(1.0).epsilon(1e-12));

    Trajectory square;
    square.horizon = 5;
    square.dims = 2;
    square.values = {0, 0, 1, 0, 1, 1, 0, 1, 0, 0};
    CHECK(recover_path_length(square) == doctest::Approx(4.0).epsilon(1e-12));

    Trajectory still;
    still.horizon = 4;
    still.dims = 2;
    still.values = {0.3, 0.4, 0.3, 0.4, 0.3, 0.4, 0.3, 0.4};
    CHECK(recover_path_length(still) == 0.0);
}

TEST_CASE("path length dominates the straight chord") {
    physmg::rng::Stream s(2, physmg::rng::tag("chord"), 0);
    for (int i = 0; i < 50; ++i) {
        Trajectory x;
        x.horizon = 10;
        x.dims = 2;
        x.values.resize(20);
        for (auto& v : x.values) v = s.next_double();
        double dx = x.at(9, 0) - x.at(0, 0);
        double dy = x.at(9, 1) - x.at(0, 1);
        CHECK(recover_path_length(x) >= std::sqrt(dx * dx + dy * dy) - 1e-12);
    }
}

TEST_CASE("recover_binned_batch agrees with per-trajectory recovery") {
    FamilyConfig c = tent_config(32);
    QuantityPrior prior = QuantityPrior::uniform(0.0, 2.0, 8);
    ReferenceGrid g = build_reference_grid(c, prior, 512);
    rng::Stream s(13, rng::tag("batch"), 0);
    std::vector<Trajectory> xs;
    Eigen::MatrixXd X(6, 32);
    for (int i = 0; i < 6; ++i) {
        Trajectory x = systems::rollout(c, 2.0 * s.next_double());
        X.row(i) = normalized_row(x, g.normalization);
        xs.push_back(x);
    }
    Eigen::MatrixXd binned = recover_binned_batch(g, X, prior);
    auto bins = grid_bin_indices(g, prior);
    for (int i = 0; i < 6; ++i) {
        Posterior p = recover_posterior(g, xs[static_cast<size_t>(i)], prior);
        Eigen::VectorXd expect = Eigen::VectorXd::Zero(8);
        for (int j = 0; j < g.resolution(); ++j)
            expect[bins[static_cast<size_t>(j)]] += p.weights[j];
        for (int b = 0; b < 8; ++b)
            CHECK(binned(i, b) == doctest::Approx(expect[b]).epsilon(1e-9));
    }
}
