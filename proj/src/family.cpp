#include "physmg/family.hpp"

#include <cmath>
#include <stdexcept>

namespace physmg::systems {

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::sinusoid: return "sinusoid";
        case FamilyKind::tent: return "tent";
        case FamilyKind::logistic: return "logistic";
        case FamilyKind::pendulum: return "pendulum";
    }
    return "?";
}

FamilyKind family_from_string(const std::string& name) {
    if (name == "sinusoid") return FamilyKind::sinusoid;
    if (name == "tent") return FamilyKind::tent;
    if (name == "logistic") return FamilyKind::logistic;
    if (name == "pendulum") return FamilyKind::pendulum;
    throw std::invalid_argument("unknown family kind: " + name);
}

void FamilyConfig::validate() const {
    if (horizon < 2) throw std::invalid_argument("FamilyConfig: horizon must be >= 2");
    if (state_bins < 2) throw std::invalid_argument("FamilyConfig: state_bins must be >= 2");
    if (!(dt > 0.0)) throw std::invalid_argument("FamilyConfig: dt must be positive");
    if (kind != FamilyKind::pendulum && !(x0 >= 0.0 && x0 <= 1.0))
        throw std::invalid_argument("FamilyConfig: x0 must lie in [0,1]");
    const PendulumParams& p = pendulum;
    if (!(p.m1 > 0 && p.m2 > 0 && p.l1 > 0 && p.l2 > 0 && p.g > 0))
        throw std::invalid_argument("FamilyConfig: pendulum parameters must be positive");
}

double FamilyConfig::quantity_lower() const {
    switch (kind) {
        case FamilyKind::sinusoid: return 32.0;
        case FamilyKind::tent: return 0.0;
        case FamilyKind::logistic: return 0.0;
        case FamilyKind::pendulum: return 5.0;
    }
    return 0.0;
}

double FamilyConfig::quantity_upper() const {
    switch (kind) {
        case FamilyKind::sinusoid: return 128.0;
        case FamilyKind::tent: return 2.0;
        case FamilyKind::logistic: return 4.0;
        case FamilyKind::pendulum: return 40.0;
    }
    return 1.0;
}

double snap_state(double x, int levels) {
    // levels at multiples of 1/levels keep the canonical map values (0.25,
    // 0.5, 0.75) exact; 1.0 rounds down to the top level.
    double k = std::round(x * levels);
    if (k > levels - 1) k = levels - 1;
    if (k < 0) k = 0;
    return k / levels;
}

namespace {

double tent_step(double r, double x) { return r * std::min(x, 1.0 - x); }
double logistic_step(double r, double x) { return r * x * (1.0 - x); }

}  // namespace

Trajectory rollout(const FamilyConfig& config, double r) {
    config.validate();
    if (r < config.quantity_lower() || r > config.quantity_upper())
        throw std::domain_error("rollout: quantity value outside the family range");

    Trajectory traj;
    traj.horizon = config.horizon;
    traj.dims = 1;
    traj.values.resize(static_cast<size_t>(config.horizon));
    traj.has_quantity = true;
    traj.quantity_true = r;

    if (config.kind == FamilyKind::sinusoid) {
        for (int t = 0; t < config.horizon; ++t)
            traj.values[static_cast<size_t>(t)] =
                0.5 * (std::sin(2.0 * M_PI * t / r + config.phase) + 1.0);
        return traj;
    }
    if (config.kind == FamilyKind::pendulum)
        throw std::invalid_argument("rollout: use pendulum_rollout for the pendulum family");

    double x = config.x0;
    traj.values[0] = x;
    for (int t = 1; t < config.horizon; ++t) {
        x = config.kind == FamilyKind::tent ? tent_step(r, x) : logistic_step(r, x);
        x = snap_state(x, config.state_bins);
        if (!(x >= 0.0 && x <= 1.0))
            throw std::runtime_error("rollout: state left [0,1]");
        traj.values[static_cast<size_t>(t)] = x;
    }
    return traj;
}

namespace {

// Accelerations of the planar double pendulum from M(q) qdd = -C - dV/dq.
std::array<double, 2> pendulum_accel(const PendulumParams& p,
                                     const std::array<double, 4>& s) {
    double th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
    double c = std::cos(th1 - th2), sn = std::sin(th1 - th2);
    double m11 = (p.m1 + p.m2) * p.l1 * p.l1;
    double m12 = p.m2 * p.l1 * p.l2 * c;
    double m22 = p.m2 * p.l2 * p.l2;
    double b1 = -p.m2 * p.l1 * p.l2 * sn * w2 * w2 -
                (p.m1 + p.m2) * p.g * p.l1 * std::sin(th1);
    double b2 = p.m2 * p.l1 * p.l2 * sn * w1 * w1 - p.m2 * p.g * p.l2 * std::sin(th2);
    double det = m11 * m22 - m12 * m12;
    return {(m22 * b1 - m12 * b2) / det, (m11 * b2 - m12 * b1) / det};
}

std::array<double, 4> pendulum_deriv(const PendulumParams& p,
                                     const std::array<double, 4>& s) {
    auto a = pendulum_accel(p, s);
    return {s[2], s[3], a[0], a[1]};
}

std::array<double, 4> axpy(const std::array<double, 4>& s, double h,
                           const std::array<double, 4>& d) {
    return {s[0] + h * d[0], s[1] + h * d[1], s[2] + h * d[2], s[3] + h * d[3]};
}

}  // namespace

double pendulum_energy(const PendulumParams& p, const std::array<double, 4>& s) {
    double th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
    double c = std::cos(th1 - th2);
    double m11 = (p.m1 + p.m2) * p.l1 * p.l1;
    double m12 = p.m2 * p.l1 * p.l2 * c;
    double m22 = p.m2 * p.l2 * p.l2;
    double kinetic = 0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2);
    double v = -(p.m1 + p.m2) * p.g * p.l1 * std::cos(th1) - p.m2 * p.g * p.l2 * std::cos(th2);
    double v_min = -(p.m1 + p.m2) * p.g * p.l1 - p.m2 * p.g * p.l2;
    return kinetic + v - v_min;
}

Trajectory pendulum_rollout(const FamilyConfig& config,
                            const std::array<double, 4>& initial_state,
                            double* energy_out) {
    config.validate();
    for (double v : initial_state)
        if (!std::isfinite(v))
            throw std::invalid_argument("pendulum_rollout: non-finite initial state");

    if (energy_out) *energy_out = pendulum_energy(config.pendulum, initial_state);

    Trajectory traj;
    traj.horizon = config.horizon;
    traj.dims = 2;
    traj.values.resize(static_cast<size_t>(config.horizon) * 2);
    traj.has_quantity = energy_out != nullptr;
    if (energy_out) traj.quantity_true = *energy_out;

    std::array<double, 4> s = initial_state;
    const PendulumParams& p = config.pendulum;
    double h = config.dt;
    for (int t = 0; t < config.horizon; ++t) {
        traj.at(t, 0) = s[0];
        traj.at(t, 1) = s[1];
        if (t + 1 == config.horizon) break;
        auto k1 = pendulum_deriv(p, s);
        auto k2 = pendulum_deriv(p, axpy(s, h / 2, k1));
        auto k3 = pendulum_deriv(p, axpy(s, h / 2, k2));
        auto k4 = pendulum_deriv(p, axpy(s, h, k3));
        for (int i = 0; i < 4; ++i)
            s[static_cast<size_t>(i)] +=
                h / 6.0 * (k1[static_cast<size_t>(i)] + 2 * k2[static_cast<size_t>(i)] +
                           2 * k3[static_cast<size_t>(i)] + k4[static_cast<size_t>(i)]);
        for (double v : s)
            if (!std::isfinite(v))
                throw std::runtime_error("pendulum_rollout: integration blew up");
    }
    return traj;
}

double lyapunov_finite(const FamilyConfig& config, double r, double x0) {
    config.validate();
    if (config.kind == FamilyKind::pendulum)
        throw std::invalid_argument("lyapunov_finite: iterated maps and sinusoid only");
    if (config.kind == FamilyKind::sinusoid) return 0.0;
    if (r < config.quantity_lower() || r > config.quantity_upper())
        throw std::domain_error("lyapunov_finite: quantity value outside the family range");

    double x = x0;
    double acc = 0.0;
    for (int t = 0; t + 1 < config.horizon; ++t) {
        double deriv;
        if (config.kind == FamilyKind::tent) {
            if (x == 0.5)
                throw std::domain_error("lyapunov_finite: orbit hit the tent fold");
            deriv = r;  // |f'| = r on both branches
        } else {
            deriv = std::fabs(r * (1.0 - 2.0 * x));
            if (deriv == 0.0)
                throw std::domain_error("lyapunov_finite: zero derivative on the orbit");
        }
        acc += std::log(deriv);
        x = config.kind == FamilyKind::tent ? tent_step(r, x) : logistic_step(r, x);
    }
    return acc / (config.horizon - 1);
}

}  // namespace physmg::systems
