#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace physmg::systems {

enum class FamilyKind { sinusoid, tent, logistic, pendulum };

std::string to_string(FamilyKind kind);
FamilyKind family_from_string(const std::string& name);

struct PendulumParams {
    double m1 = 1.0;  // kg
    double m2 = 1.0;
    double l1 = 1.0;  // m
    double l2 = 1.0;
    double g = 9.81;  // m/s^2
};

struct FamilyConfig {
    FamilyKind kind = FamilyKind::tent;
    int horizon = 64;
    double x0 = 0.25;
    double phase = -M_PI / 6.0;  // sinusoid only
    int state_bins = 1024;       // iterated-map state discretization
    double dt = 0.01;            // pendulum only, seconds
    PendulumParams pendulum;

    void validate() const;

    // Quantity range of the family rule (sinusoid period, map parameter,
    // pendulum energy).
    double quantity_lower() const;
    double quantity_upper() const;

    int dims() const { return kind == FamilyKind::pendulum ? 2 : 1; }
};

struct Trajectory {
    std::vector<double> values;  // horizon x dims, row-major
    int horizon = 0;
    int dims = 1;
    bool has_quantity = false;
    double quantity_true = 0.0;

    double& at(int t, int c = 0) { return values[static_cast<size_t>(t * dims + c)]; }
    double at(int t, int c = 0) const { return values[static_cast<size_t>(t * dims + c)]; }
};

// Snap x to the nearest multiple of 1/levels, clamped to the top level
// (levels-1)/levels; the admissible states are k/levels, k in [0, levels).
double snap_state(double x, int levels);

// Generate a trajectory of the family at quantity value r. Iterated maps
// snap every produced state to the config's state grid; the initial state
// is stored as given.
Trajectory rollout(const FamilyConfig& config, double r);

// Integrate the planar double pendulum with fixed-step RK4 from
// (theta1, theta2, omega1, omega2); the returned trajectory holds the two
// angles only. `energy_out`, when non-null, receives the exact initial
// mechanical energy (potential measured from the downward equilibrium).
Trajectory pendulum_rollout(const FamilyConfig& config,
                            const std::array<double, 4>& initial_state,
                            double* energy_out = nullptr);

// Mechanical energy of a pendulum state, with V shifted so the downward
// equilibrium has energy zero.
double pendulum_energy(const PendulumParams& p, const std::array<double, 4>& state);

// Finite-horizon Lyapunov exponent along the un-snapped orbit. The sinusoid
// returns exactly 0. Throws if the orbit hits a non-differentiable state.
double lyapunov_finite(const FamilyConfig& config, double r, double x0);

}  // namespace physmg::systems
