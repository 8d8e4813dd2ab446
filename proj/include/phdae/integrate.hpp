#pragma once

#include "phdae/core.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace phdae {

/// Time grid, states, ports, Hamiltonian samples and the per-step
/// discrete power-balance ledger produced by the collocation integrator.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> inputs;
    std::vector<Vec> outputs;
    std::vector<double> hamiltonian;
    /// tau * sum_j beta_j <e_d^j, f_d^j>  (nonpositive when W >= 0)
    std::vector<double> dissipation_per_step;
    /// tau * sum_j beta_j y_j^T u_j
    std::vector<double> supply_per_step;

    std::size_t steps() const { return dissipation_per_step.size(); }
};

namespace integrate {

/// Butcher data of the s-stage Gauss-Legendre collocation method
/// (order 2s): nodes are the roots of the shifted Legendre polynomial,
/// alpha(i,j) = integral of the j-th Lagrange polynomial over [0, gamma_i],
/// beta(j) over [0, 1].
struct CollocationTableau {
    Index s = 0;
    Vec gamma;
    Mat alpha;
    Vec beta;
};

CollocationTableau gauss_tableau(Index s);

/// Input signal sampled at arbitrary times.
using InputFunction = std::function<Vec(double)>;

InputFunction zero_input(Index m);

struct StageData {
    std::vector<Vec> z, dz, u, y;
    double dissipation = 0.0;
    double supply = 0.0;
};

struct StepResult {
    Vec z_end;
    StageData stages;
};

/// One collocation step from t0 with stage inputs supplied explicitly.
StepResult collocation_step(const LtiPhDae& sys, const Vec& z0,
                            const std::vector<Vec>& u_stages, double tau,
                            const CollocationTableau& tab);

/// Minimal-norm correction of a state guess onto the (explicit and
/// hidden) constraint set at a fixed input value u0 (default zero, input
/// treated as constant for the hidden index-2 constraints).
Vec consistent_init(const LtiPhDae& sys, const Vec& z_guess, const Vec& u0 = Vec(),
                    double tol = 1e-10);

/// Fixed-step Gauss-Legendre collocation over [t0, t_f]. Direct stepping
/// of index-2 pencils is refused; reduce first.
Trajectory simulate(const LtiPhDae& sys, const Vec& z0, const InputFunction& u, double t0,
                    double t_f, double tau, Index stages = 1);

/// CSV columns: t, z_1..z_n, u_1..u_m, y_1..y_m, H, diss_step, supply_step
/// (ledger columns are 0 on the first row).
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

}  // namespace integrate
}  // namespace phdae
