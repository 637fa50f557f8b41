#include "physmg/prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace physmg::systems {

QuantityPrior QuantityPrior::uniform(double lower, double upper, int bins) {
    QuantityPrior p;
    p.lower = lower;
    p.upper = upper;
    p.bins = bins;
    p.density.assign(static_cast<size_t>(bins), 1.0 / bins);
    return p;
}

void QuantityPrior::validate() const {
    if (!(lower < upper)) throw std::invalid_argument("QuantityPrior: lower must be < upper");
    if (bins < 2) throw std::invalid_argument("QuantityPrior: bins must be >= 2");
    if (density.size() != static_cast<size_t>(bins))
        throw std::invalid_argument("QuantityPrior: density size must equal bins");
    double total = 0.0;
    for (double m : density) {
        if (!(m >= 0.0)) throw std::invalid_argument("QuantityPrior: density must be non-negative");
        total += m;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw std::invalid_argument("QuantityPrior: density must sum to 1");
}

int QuantityPrior::bin_of(double r) const {
    int b = static_cast<int>(std::floor((r - lower) / bin_width()));
    return std::clamp(b, 0, bins - 1);
}

double QuantityPrior::density_at(double r) const {
    if (r < lower || r > upper) return 0.0;
    return density[static_cast<size_t>(bin_of(r))] / bin_width();
}

std::vector<double> QuantityPrior::edges() const {
    std::vector<double> e(static_cast<size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) e[static_cast<size_t>(b)] = lower + b * bin_width();
    e.back() = upper;
    return e;
}

double quantile_transport(const QuantityPrior& prior, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::domain_error("quantile_transport: u must lie in [0,1]");
    if (u == 0.0) return prior.lower;
    if (u == 1.0) return prior.upper;
    double cum = 0.0;
    for (int b = 0; b < prior.bins; ++b) {
        double m = prior.density[static_cast<size_t>(b)];
        if (u <= cum + m || b == prior.bins - 1) {
            double frac = m > 0.0 ? (u - cum) / m : 1.0;
            frac = std::clamp(frac, 0.0, 1.0);
            return prior.bin_lo(b) + frac * prior.bin_width();
        }
        cum += m;
    }
    return prior.upper;
}

}  // namespace physmg::systems
