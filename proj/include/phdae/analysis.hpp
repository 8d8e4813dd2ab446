#pragma once

#include "phdae/core.hpp"

#include <string>

namespace phdae::analysis {

enum class StabilityVerdict { asymptotically_stable, stable, unstable, not_applicable };

std::string to_string(StabilityVerdict v);

struct StabilityReport {
    CVec finite_eigenvalues;
    double max_real_part = 0.0;
    bool imaginary_axis_semisimple = true;
    StabilityVerdict verdict = StabilityVerdict::not_applicable;
    std::string reason;
};

/// Finite spectrum of the pencil lambda E - (J - R) (regular, index <= 1)
/// via the staircase reduction, with the semisimplicity test for
/// imaginary-axis eigenvalues and the stability case split.
StabilityReport stability_spectrum(const Mat& e, const Mat& j, const Mat& r,
                                   double tol = 1e-8);

enum class HypocoercivityMode {
    kalman_rank,       ///< rank [R, JR, ..., J^m R] = n
    tm_definiteness,   ///< T_m = sum J^j R (J^T)^j positive definite
    eigenvector_rank,  ///< rank [lambda I - J, R] = n at eigenvalues of J
    cross_check,       ///< evaluate kalman + tm and assert agreement
};

struct HypocoercivityResult {
    bool finite = false;
    Index index = -1;  ///< m_H when finite
    HypocoercivityMode witness = HypocoercivityMode::kalman_rank;
    bool cross_checks_agree = true;
};

HypocoercivityResult hypocoercivity_index(const Mat& j, const Mat& r,
                                          HypocoercivityMode mode = HypocoercivityMode::cross_check,
                                          double tol = -1.0);

/// Asymptotic stability of a regular index <= 1 dHDAE via the
/// hypocoercivity index of the symmetrized underlying ODE.
StabilityVerdict asymptotic_stability_dae(const Mat& e, const Mat& j, const Mat& r,
                                          double tol = -1.0);

struct RankConditionReport {
    bool c1 = false;  ///< rank [lambda E - A, B] = n at all finite eigenvalues
    bool c2 = false;  ///< impulse controllable: rank [E, A S_inf, B] = n
    bool o1 = false;
    bool o2 = false;
    bool c1_unstable_part = false;  ///< C1 restricted to Re(lambda) >= 0
    bool o1_unstable_part = false;
    bool strongly_stabilizable = false;  ///< c2 && c1_unstable_part
    bool strongly_detectable = false;    ///< o2 && o1_unstable_part
};

RankConditionReport rank_conditions(const Mat& e, const Mat& a, const Mat& b, const Mat& c,
                                    double tol = -1.0);

struct ClosedLoopResult {
    LtiPhDae closed;
    bool ph_preserved = false;
    bool behavior_form = false;  ///< true when the extended (E,J,R,Q) form was assembled
};

/// Output feedback u = F y + w. Standard-form systems close directly to
/// (E, J + G F_skew G^T, R - G F_sym G^T, G); anything else is assembled
/// in the behavior form with state (z, u, y).
ClosedLoopResult closed_loop(const LtiPhDae& sys, const Mat& f, double tol = 1e-10);

struct OptimalityPencil {
    Mat E_pencil;  ///< (2n+m) square
    Mat A_pencil;
    Mat W_u;          ///< algebraic block deciding the Kronecker index
    Mat W_u_rotated;  ///< after the balanced +/- rotation of the multiplier pair
    bool index_le_one = false;
    bool g2_full_column_rank = false;
    bool singular_control = false;
    Index dynamic_dim = 0;  ///< rank of E
};

/// Necessary-condition pencil for minimizing the supplied energy, with
/// the index diagnosis of its algebraic part. M must be symmetric with
/// range inside the range of E.
OptimalityPencil energy_optimality_pencil(const LtiPhDae& sys, const Mat& m_weight,
                                          double tol = -1.0);

}  // namespace phdae::analysis
