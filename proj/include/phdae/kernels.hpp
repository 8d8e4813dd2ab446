#pragma once

#include "phdae/matrix.hpp"

namespace phdae::kernels {

/// Rank-revealing orthogonal decomposition A = U * diag(S, 0) * V^T.
struct FullRankDecomposition {
    Mat left_factor;      ///< U, rows x rows, orthogonal
    Mat right_factor;     ///< V, cols x cols, orthogonal
    Vec singular_values;  ///< all min(rows, cols) values, descending
    Index rank = 0;
    /// Ratio sigma_rank / sigma_{rank+1} at the cut (inf when clean);
    /// recorded so callers can assert rank-decision stability.
    double rank_gap = 0.0;
};

/// Default relative rank threshold: max(rows, cols) * eps.
double default_rank_tol(const Mat& a);

/// SVD-based full rank decomposition. `tol` is relative: values
/// <= tol * max(sigma_1, scale_floor) count as zero. tol <= 0 selects the
/// default. The floor lets callers rank sub-blocks of a larger matrix
/// against the parent's scale, so a numerically zero block gets rank 0.
FullRankDecomposition svd_full_rank(const Mat& a, double tol = -1.0,
                                    double scale_floor = 0.0);

Index rank_of(const Mat& a, double tol = -1.0, double scale_floor = 0.0);

/// Orthonormal basis of the (right) null space; n x (n - rank).
Mat kernel_basis(const Mat& a, double tol = -1.0, double scale_floor = 0.0);

struct SymEig {
    Vec eigenvalues;   ///< ascending
    Mat eigenvectors;  ///< orthogonal, columns match eigenvalues
};

/// Symmetric eigendecomposition. Rejects inputs whose symmetry defect
/// exceeds sym_tol * ||A||.
SymEig sym_eig(const Mat& a, double sym_tol = 1e-10);

/// Eigenvalues of a general real square matrix (dimension capped).
CVec eig_small(const Mat& a, Index dim_cap = 2000);

/// Lower-triangular L with L L^T = A. Throws NumericalError when A is
/// not positive definite.
Mat cholesky(const Mat& a);

/// Solve A X = B for square nonsingular A (partial pivoting).
Mat solve_dense(const Mat& a, const Mat& b);
CMat solve_dense_complex(const CMat& a, const CMat& b);

/// Solve A X + X A^T + Q = 0 for symmetric Q and Hurwitz A, by the
/// scaled matrix sign-function iteration.
Mat lyapunov(const Mat& a, const Mat& q_rhs);

/// Stabilizing solution of A^T X + X A - X B Rw^{-1} B^T X + Q = 0 by
/// Newton-Kleinman with a Lyapunov-shift (Bass) initialization.
Mat care(const Mat& a, const Mat& b, const Mat& q_rhs, const Mat& rw);

/// Largest real part of the spectrum (helper shared by lyapunov/care).
double spectral_abscissa(const Mat& a);

}  // namespace phdae::kernels
