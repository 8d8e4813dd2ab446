#pragma once

#include "phdae/core.hpp"
#include "phdae/transform.hpp"

#include <optional>
#include <string>
#include <vector>

namespace phdae::mor {

using transform::SemiExplicitParts;

/// Reduced pHDAE together with its construction metadata and the
/// re-verified certificates.
struct ReducedModel {
    LtiPhDae rom;
    Mat projector;  ///< V1 (n1 x r), orthonormal columns, when projection-based
    std::string method;
    CVec shifts;               ///< interpolation points (empty for mm/ecrm)
    double sigma0 = 0.0;       ///< mm expansion point (inf for Markov matching)
    Index matched_moments = 0;
    bool ph_certified = true;  ///< interp_v2 may construct a non-certified ROM
    ValidationReport validation;
    double max_interp_residual = 0.0;  ///< re-verified, relative
};

/// Transfer function value G(s); full generality including feedthrough.
CMat transfer_eval(const LtiPhDae& sys, std::complex<double> s);

/// Generalized moments m_i, i = 0..k-1, of the expansion around sigma0.
std::vector<CMat> moments(const LtiPhDae& sys, std::complex<double> sigma0, Index k);

/// Moment-matching ROM at sigma0 (finite, or +inf for Markov parameters):
/// Galerkin on the dynamic block, algebraic block retained.
ReducedModel mm_rom(const SemiExplicitParts& semi, double sigma0, Index r);

/// Effort constraint reduction: truncation of the dynamic block by an
/// orthonormal V1, constraint block retained.
ReducedModel ecrm(const SemiExplicitParts& semi, const Mat& v1);

/// Flow constraint reduction: the discarded block is eliminated through
/// its skew coupling; produces a pHDAE with feedthrough. Requires the
/// normalized split (E11 = I) and an even-dimensional discarded block.
ReducedModel fcrm(const SemiExplicitParts& semi, const Mat& v1_keep);

struct BalancingResult {
    Mat v1;             ///< n1 x r, orthonormal
    Vec hankel_values;  ///< singular values of P^T O, descending
    bool truncated_to_rank = false;
    Mat reach_gramian;  ///< controllability Gramian of the dynamic block
};

/// Structure-preserving balancing of the dynamic part (E11 = I required):
/// Gramian factors from two Lyapunov solves, SVD of P^T O, QR of P U.
BalancingResult balancing_projector(const SemiExplicitParts& semi, Index r);

/// Rational interpolation, projection variant: V spans the (realified)
/// shifted solves; algebraic block retained, polynomial part matched.
ReducedModel interp_v1(const SemiExplicitParts& semi, const CVec& shifts);

/// Rational interpolation, feedthrough-corrected variant (SISO): the
/// explicit construction with the ones-vector correction; matches the
/// polynomial part and interpolates; pH-ness certified a posteriori.
ReducedModel interp_v2(const SemiExplicitParts& semi, const CVec& shifts);

struct IrkaConfig {
    Index max_sweeps = 50;
    double shift_tol = 1e-4;      ///< relative movement of the sorted shift set
    CVec initial_shifts;          ///< default: log-spaced in [1e-2, 1e2]
};

struct IrkaResult {
    ReducedModel rom;
    CVec final_shifts;
    std::vector<double> movement_history;
    bool converged = false;
};

/// Fixed-point iteration: interpolate, mirror the ROM poles, repeat.
IrkaResult irka(const SemiExplicitParts& semi, Index r, const IrkaConfig& cfg = {});

struct ModifiedHamiltonianResult {
    SemiExplicitParts parts;
    Mat x11;              ///< minimal positive definite storage certificate
    double are_residual = 0.0;
    double epsilon = 0.0;       ///< feedthrough regularization actually used
    double storage_defect = 0.0;  ///< || X G1 - E11^{-1} G1 ||, the I/O perturbation scale
};

/// Reformulates the dynamic block with the minimal-storage Hamiltonian:
/// the positive-real Riccati equation (zero feedthrough regularized by
/// eps I) is solved by Newton iterations started from the exact
/// certificate X = E11^{-1}; then E11 <- X^{-1}, J11 - R11 <- A X^{-1}.
/// By default the regularized solution is polished into an exact Lur'e
/// certificate (A^T X + X A = -L L^T, X G1 = E11^{-1} G1), which removes
/// the O(sqrt(eps)) input-output perturbation of the regularization; the
/// polish step is what keeps the reformulation exact even when the plant
/// has transmission zeros on the imaginary axis.
ModifiedHamiltonianResult modified_hamiltonian(const SemiExplicitParts& semi,
                                               double eps = 1e-8,
                                               bool polish = true);

/// Strictly proper realization (A, B, C) plus the constant polynomial
/// term D of an index <= 1 system.
struct ProperRealization {
    Mat A, B, C, D;
};

ProperRealization proper_part(const LtiPhDae& sys, double tol = -1.0);

/// Reusable data for repeated error evaluations against one full model:
/// its proper part, controllability Gramian, and H2 norm.
struct H2Cache {
    ProperRealization sys;
    Mat gram;           ///< controllability Gramian of the full proper part
    double norm = 0.0;  ///< H2 norm of the full model
};

H2Cache make_h2_cache(const LtiPhDae& sys);
/// Variant reusing an externally computed controllability Gramian to
/// avoid a second large Lyapunov solve. The Gramian must belong to the
/// proper part in the system's own coordinates (e.g. the balancing
/// Gramian of a normalized semi-explicit system); it is residual-checked.
H2Cache make_h2_cache(const LtiPhDae& sys, const Mat& gram);

double h2_norm(const LtiPhDae& sys);
double h2_error(const H2Cache& cache, const LtiPhDae& rom);
double h2_error(const LtiPhDae& sys, const LtiPhDae& rom);

}  // namespace phdae::mor
