#pragma once

#include "phdae/matrix.hpp"

#include <string>
#include <vector>

namespace phdae::solve {

/// Orthogonal staircase form of A = H + S (H symmetric PSD, S skew):
/// U^T H U = diag(H11, 0) with H11 SPD, and U^T S U block tridiagonal
/// with full-rank subdiagonal couplings [Sigma 0].
struct HsStaircase {
    Mat U;                         ///< n x n orthogonal
    std::vector<Index> block_sizes;  ///< n1 >= n2 >= ... >= n_{r-1}, n_r
    Mat Ht, St;                    ///< U^T H U, U^T S U
    double zero_defect = 0.0;

    Index blocks() const { return static_cast<Index>(block_sizes.size()); }
    std::vector<Index> offsets() const;
};

HsStaircase hs_staircase(const Mat& a, double tol = -1.0);

struct IterationLog {
    std::vector<double> residual_history;  ///< H-norm residuals, per iteration
    Index iterations = 0;
    std::string termination;  ///< "converged", "exhausted", "maxit"
};

/// Block Gaussian elimination along the staircase; the Schur complements
/// keep positive definite symmetric parts, so no pivoting is needed.
Vec staircase_solve(const HsStaircase& dec, const Vec& b);

/// Three-term-recurrence Krylov iteration for (H + S) x = b via the
/// preconditioned system (I + K) x = H^{-1} b, K = H^{-1} S. K is
/// skew-adjoint in the H-inner product, so a Lanczos recurrence with a
/// skew tridiagonal matrix generates the basis; the iterate minimizes the
/// H-norm of the residual over the Krylov space.
struct KrylovResult {
    Vec x;
    IterationLog log;
};

KrylovResult widlund_solve(const Mat& h, const Mat& s, const Vec& b, double tol = 1e-10,
                           Index maxit = -1);

/// Reference comparator: full-recurrence GMRES on the same preconditioned
/// system, Euclidean-residual minimizing, same H-norm termination rule.
KrylovResult gmres_ref(const Mat& h, const Mat& s, const Vec& b, double tol = 1e-10,
                       Index maxit = -1);

}  // namespace phdae::solve
