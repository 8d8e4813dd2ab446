#pragma once

#include "phdae/matrix.hpp"

#include <optional>
#include <string>

namespace phdae {

struct Trajectory;  // integrate.hpp

/// Linear time-invariant port-Hamiltonian descriptor system
///
///   E z' = (J - R) Q z + (G - P) u,
///   y    = (G + P)^T Q z + (S - N) u,
///
/// with Hamiltonian H(z) = 1/2 z^T Q^T E z. Stored in full generality;
/// normalizations (Q = I, feedthrough removal) are explicit operations
/// in the transform module, never implicit.
struct LtiPhDae {
    Mat E;  ///< ell x n
    Mat J;  ///< ell x ell
    Mat R;  ///< ell x ell
    Mat Q;  ///< ell x n
    Mat G;  ///< ell x m
    Mat P;  ///< ell x m
    Mat S;  ///< m x m
    Mat N;  ///< m x m

    Index n() const { return E.cols(); }
    Index ell() const { return E.rows(); }
    Index m() const { return G.cols(); }

    /// System with Q = I, P = 0, S = N = 0 (the form most pipelines use).
    static LtiPhDae standard(Mat e, Mat j, Mat r, Mat g);
    static LtiPhDae general(Mat e, Mat j, Mat r, Mat q, Mat g, Mat p, Mat s, Mat nn);

    /// Structure matrix Gamma = [J G; -G^T N], (ell+m) square.
    Mat structure_matrix() const;
    /// Dissipation matrix W = diag(Q, I)^T [R P; P^T S] diag(Q, I), (n+m) square.
    Mat dissipation_matrix() const;

    /// A = (J - R) Q, the state-equation coefficient.
    Mat state_matrix() const { return (J - R) * Q; }

    bool has_identity_q(double tol = 1e-12) const;
    bool has_feedthrough(double tol = 1e-12) const;
    /// Q = I, P = 0, S - N = 0 within tol.
    bool is_standard_form(double tol = 1e-12) const;

    void check_dimensions() const;
};

struct ValidationReport {
    double skew_defect = 0.0;          ///< ||Gamma + Gamma^T||_F
    double dissipation_min_eig = 0.0;  ///< min eig of sym(W)
    double symmetry_defect = 0.0;      ///< ||Q^T E - E^T Q||_F
    bool pass = false;
    std::string reasons;  ///< empty when pass
};

/// Checks Gamma = -Gamma^T, W = W^T >= 0, Q^T E symmetric, each relative
/// to tol. Failures are reported, not thrown; operations that need a
/// valid system enforce the verdict themselves.
ValidationReport validate_structure(const LtiPhDae& sys, double tol = 1e-10);

/// Throws InvalidInput when validate_structure fails.
void require_valid(const LtiPhDae& sys, const char* where, double tol = 1e-8);

/// H(z) = 1/2 z^T sym(Q^T E) z.
double hamiltonian(const LtiPhDae& sys, const Vec& z);

/// One behavior sample (z, z', u, y) at time t.
struct PortSample {
    double t = 0.0;
    Vec z, dz, u, y;
};

/// | d/dt H - ( -[eta;u]^T W [eta;u] + y^T u ) | with eta = Q z and
/// d/dt H = eta^T (E dz). Zero (to roundoff) on exact solution samples.
double power_balance_residual(const LtiPhDae& sys, const PortSample& s);

struct DissipationCheck {
    double lhs = 0.0;  ///< H(z(t_f)) - H(z(t_0))
    double rhs = 0.0;  ///< quadrature of y^T u with the integrator's weights
    bool holds = false;
};

/// Dissipation inequality H(t_f) - H(t_0) <= integral of y^T u over a
/// computed trajectory, evaluated with the trajectory's own ledger.
DissipationCheck dissipation_check(const LtiPhDae& sys, const Trajectory& traj,
                                   double tol = 1e-9);

}  // namespace phdae
