#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "physmg/mitigation.hpp"
#include "physmg/rng.hpp"

using namespace physmg;
using namespace physmg::mitigation;
using recovery::BinnedMarginal;
using systems::QuantityPrior;

namespace {

BinnedMarginal marginal_from(std::vector<double> mass, const QuantityPrior& prior) {
    BinnedMarginal m;
    m.edges = prior.edges();
    m.mass = std::move(mass);
    return m;
}

// Point-mass posterior in a given bin.
BinnedMarginal point_mass(int bin, const QuantityPrior& prior) {
    std::vector<double> mass(static_cast<size_t>(prior.bins), 0.0);
    mass[static_cast<size_t>(bin)] = 1.0;
    return marginal_from(std::move(mass), prior);
}

}  // namespace

TEST_CASE("reweight restores the intended prior against a skewed model") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 1.0, 2);
    BinnedMarginal model = marginal_from({0.8, 0.2}, prior);
    // recovered values: 4 in bin 0, 1 in bin 1
    std::vector<double> rec = {0.1, 0.2, 0.3, 0.4, 0.9};
    ReweightPlan plan = compute_reweight(rec, prior, model);
    REQUIRE(plan.weights.size() == 5);
    double total = std::accumulate(plan.weights.begin(), plan.weights.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // w proportional to 0.5/0.8 for bin 0 and 0.5/0.2 for bin 1; the weighted
    // bin masses then both equal 1/2 exactly: 4 * (0.625 k) = 1 * (2.5 k)
    double bin0 = plan.weights[0] + plan.weights[1] + plan.weights[2] + plan.weights[3];
    double bin1 = plan.weights[4];
    CHECK(bin0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bin1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(plan.out_of_range == 0);
}

TEST_CASE("reweight floor guards empty model bins and flags out-of-range") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 1.0, 2);
    BinnedMarginal model = marginal_from({1.0, 0.0}, prior);
    std::vector<double> rec = {0.25, 0.75, 1.5};
    ReweightPlan plan = compute_reweight(rec, prior, model);
    CHECK(plan.out_of_range == 1);
    for (double w : plan.weights) {
        CHECK(std::isfinite(w));
        CHECK(w > 0.0);
    }
    // the empty-bin sample is clamped by the floor, so it dominates
    CHECK(plan.weights[1] > plan.weights[0]);
}

TEST_CASE("inverse prior applies the 0.10/B floor") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 1.0, 4);
    BinnedMarginal model = marginal_from({0.7, 0.3, 0.0, 0.0}, prior);
    BinnedMarginal inv = inverse_prior(model);
    double total = std::accumulate(inv.mass.begin(), inv.mass.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // bins 2 and 3 both clamp to the floor 0.025, so they tie at the maximum
    CHECK(inv.mass[2] == doctest::Approx(inv.mass[3]).epsilon(1e-12));
    CHECK(inv.mass[2] > inv.mass[1]);
    CHECK(inv.mass[1] > inv.mass[0]);
    // unnormalized ratios: 1/0.7 : 1/0.3 : 1/0.025 : 1/0.025
    CHECK(inv.mass[1] / inv.mass[0] == doctest::Approx(0.7 / 0.3).epsilon(1e-12));
}

TEST_CASE("latin hypercube has one point per stratum per dimension") {
    CodeSupport s = latin_hypercube(16, 3, 5);
    REQUIRE(s.size() == 16);
    REQUIRE(s.dims() == 3);
    for (int d = 0; d < 3; ++d) {
        std::vector<int> strata(16, 0);
        for (int i = 0; i < 16; ++i) {
            double v = s.codes(i, d);
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
            strata[static_cast<size_t>(std::min(15, static_cast<int>(v * 16)))]++;
        }
        for (int k : strata) CHECK(k == 1);
    }
    CodeSupport again = latin_hypercube(16, 3, 5);
    CHECK(s.codes == again.codes);
}

TEST_CASE("decoder bandwidth is the median k-th neighbor squared distance") {
    // four codes on a line in 1-D: 0, 0.1, 0.3, 0.6
    CodeSupport s;
    s.codes.resize(4, 1);
    s.codes << 0.0, 0.1, 0.3, 0.6;
    // k=1 nearest-other squared distances: 0.01, 0.01, 0.04, 0.09
    CHECK(decoder_bandwidth(s, 1) == doctest::Approx(0.025).epsilon(1e-12));
    // k=2: 0.09, 0.04, 0.09, 0.25 -> median 0.09
    CHECK(decoder_bandwidth(s, 2) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("decoder matrix rows are stochastic over at most k_dec entries") {
    CodeSupport s = latin_hypercube(32, 4, 9);
    devkernel::KernelConfig kcfg;
    kcfg.sigma = 0.1;
    DecoderMatrix m = decoder_matrix(s, kcfg, 8, 16, 3);
    REQUIRE(m.size() == 32);
    for (const auto& row : m.rows) {
        CHECK(row.size() >= 1);
        double sum = 0.0;
        for (auto [col, w] : row) {
            CHECK(col >= 0);
            CHECK(col < 32);
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

namespace {

// Tiny fixture: N cells whose decoder rows and posteriors are hand-made.
struct Tiny {
    QuantityPrior prior;
    DecoderMatrix m;
    std::vector<BinnedMarginal> nu;
    std::vector<int> bins;

    Tiny(int n, int b, std::uint64_t seed) : prior(QuantityPrior::uniform(0.0, 1.0, b)) {
        rng::Stream s(seed, rng::tag("tiny"), 0);
        m.k_dec = 2;
        m.tau = 0.1;
        m.rows.resize(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j) {
            int other = (j + 1) % n;
            double w = 0.3 + 0.4 * s.next_double();
            m.rows[static_cast<size_t>(j)] = {{j, w}, {other, 1.0 - w}};
        }
        for (int i = 0; i < n; ++i) {
            int bin = static_cast<int>(s.next_double() * b);
            bin = std::min(bin, b - 1);
            nu.push_back(point_mass(bin, prior));
            bins.push_back(bin);
        }
    }
};

double brute_objective(const Tiny& t, const std::vector<int>& assign) {
    int n = static_cast<int>(assign.size());
    int b = t.prior.bins;
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        std::vector<double> p(static_cast<size_t>(b), 0.0);
        for (auto [col, w] : t.m.rows[static_cast<size_t>(j)])
            for (int k = 0; k < b; ++k)
                p[static_cast<size_t>(k)] +=
                    w * t.nu[static_cast<size_t>(assign[static_cast<size_t>(col)])]
                            .mass[static_cast<size_t>(k)];
        for (int k = 0; k < b; ++k) {
            double d = p[static_cast<size_t>(k)] - 1.0 / b;
            total += d * d;
        }
    }
    return total / n;
}

}  // namespace

TEST_CASE("pairing objective matches a brute-force recompute") {
    Tiny t(6, 3, 11);
    Pairing p = init_pairing(t.m, t.nu, t.prior, 4);
    CHECK(p.objective ==
          doctest::Approx(brute_objective(t, p.assignment)).epsilon(1e-12));
    CHECK(pairing_objective(t.m, p, t.nu, t.prior) ==
          doctest::Approx(p.objective).epsilon(1e-12));
}

TEST_CASE("init pairing is a bijection") {
    Tiny t(8, 3, 21);
    Pairing p = init_pairing(t.m, t.nu, t.prior, 7);
    std::vector<int> seen = p.assignment;
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 8; ++i) CHECK(seen[static_cast<size_t>(i)] == i);
}

TEST_CASE("swap optimizer trace is monotone and deltas match full recompute") {
    Tiny t(10, 4, 31);
    Pairing start = init_pairing(t.m, t.nu, t.prior, 2);
    SwapOptions opt;
    opt.seed = 5;
    Pairing done = swap_optimize(t.m, t.nu, t.prior, t.bins, start, opt);
    REQUIRE(done.trace.size() >= 1);
    for (size_t i = 1; i < done.trace.size(); ++i)
        CHECK(done.trace[i] < done.trace[i - 1]);
    CHECK(done.objective ==
          doctest::Approx(brute_objective(t, done.assignment)).epsilon(1e-9));
    CHECK(std::abs(done.objective - brute_objective(t, done.assignment)) < 1e-9);
    CHECK(done.objective <= start.objective);
}

TEST_CASE("optimizer reaches the exhaustive optimum on N<=6 instances") {
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
        Tiny t(6, 3, 41 + inst);
        // exhaustive: all 720 permutations
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            best = std::min(best, brute_objective(t, perm));
        } while (std::next_permutation(perm.begin(), perm.end()));

        double reached = 1e300;
        for (std::uint64_t restart = 0; restart < 8; ++restart) {
            Pairing start = init_pairing(t.m, t.nu, t.prior, restart);
            SwapOptions opt;
            opt.seed = restart * 13 + 1;
            Pairing done = swap_optimize(t.m, t.nu, t.prior, t.bins, start, opt);
            reached = std::min(reached, done.objective);
        }
        CHECK(reached == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("decode_average weights nearest posteriors by alpha") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 1.0, 2);
    CodeSupport s;
    s.codes.resize(3, 1);
    s.codes << 0.0, 0.5, 1.0;
    Pairing p;
    p.assignment = {0, 1, 2};
    std::vector<BinnedMarginal> nu = {point_mass(0, prior), point_mass(1, prior),
                                      point_mass(1, prior)};
    double code = 0.05;
    BinnedMarginal out =
        decode_average(std::span<const double>(&code, 1), s, p, nu, 2, 0.05);
    // nearest codes: 0.0 (d2=0.0025) and 0.5 (d2=0.2025); alpha ratio
    // exp(-(0.2025-0.0025)/0.1) = exp(-2)
    double w1 = std::exp(-2.0);
    CHECK(out.mass[0] == doctest::Approx(1.0 / (1.0 + w1)).epsilon(1e-9));
    CHECK(out.mass[1] == doctest::Approx(w1 / (1.0 + w1)).epsilon(1e-9));
}

TEST_CASE("decode_sample_index frequencies follow the alpha weights") {
    QuantityPrior prior = QuantityPrior::uniform(0.0, 1.0, 2);
    CodeSupport s;
    s.codes.resize(3, 1);
    s.codes << 0.0, 0.5, 1.0;
    Pairing p;
    p.assignment = {2, 0, 1};
    std::vector<BinnedMarginal> nu = {point_mass(0, prior), point_mass(0, prior),
                                      point_mass(1, prior)};
    double code = 0.05;
    double w1 = std::exp(-2.0);
    rng::Stream st(3, rng::tag("decode"), 0);
    int hit0 = 0, hit1 = 0, n = 20000;
    for (int i = 0; i < n; ++i) {
        int pick = decode_sample_index(std::span<const double>(&code, 1), s, p, 2, 0.05, st);
        if (pick == 2) ++hit0;        // cell 0 is paired with trajectory 2
        else if (pick == 0) ++hit1;   // cell 1 with trajectory 0
    }
    CHECK(hit0 + hit1 == n);
    double expect = n / (1.0 + w1);
    CHECK(std::abs(hit0 - expect) < 4.0 * std::sqrt(n * 0.12));
}
