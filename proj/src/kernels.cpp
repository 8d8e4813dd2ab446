#include "phdae/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace phdae::kernels {

double default_rank_tol(const Mat& a) {
    return static_cast<double>(std::max(a.rows(), a.cols())) * kEps;
}

FullRankDecomposition svd_full_rank(const Mat& a, double tol, double scale_floor) {
    require_finite(a, "A");
    if (tol <= 0.0) tol = default_rank_tol(a);

    FullRankDecomposition dec;
    if (std::min(a.rows(), a.cols()) > 32) {
        Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
        dec.left_factor = svd.matrixU();
        dec.right_factor = svd.matrixV();
        dec.singular_values = svd.singularValues();
    } else {
        Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
        dec.left_factor = svd.matrixU();
        dec.right_factor = svd.matrixV();
        dec.singular_values = svd.singularValues();
    }

    const Index k = dec.singular_values.size();
    if (k == 0 || std::max(dec.singular_values(0), scale_floor) == 0.0) {
        dec.rank = 0;
        dec.rank_gap = std::numeric_limits<double>::infinity();
        return dec;
    }
    const double cut = tol * std::max(dec.singular_values(0), scale_floor);
    Index r = 0;
    while (r < k && dec.singular_values(r) > cut) ++r;
    dec.rank = r;
    if (r == 0)
        dec.rank_gap = std::numeric_limits<double>::infinity();
    else if (r == k || dec.singular_values(r) == 0.0)
        dec.rank_gap = std::numeric_limits<double>::infinity();
    else
        dec.rank_gap = dec.singular_values(r - 1) / dec.singular_values(r);
    return dec;
}

Index rank_of(const Mat& a, double tol, double scale_floor) {
    if (a.size() == 0) return 0;
    return svd_full_rank(a, tol, scale_floor).rank;
}

Mat kernel_basis(const Mat& a, double tol, double scale_floor) {
    if (a.size() == 0) return Mat::Identity(a.cols(), a.cols());
    const auto dec = svd_full_rank(a, tol, scale_floor);
    return dec.right_factor.rightCols(a.cols() - dec.rank);
}

SymEig sym_eig(const Mat& a, double sym_tol) {
    require_square(a, "A");
    require_finite(a, "A");
    const double defect = sym_defect(a);
    if (defect > sym_tol * norm_or_one(a))
        throw InvalidInput("sym_eig: input asymmetric beyond tolerance, defect " +
                           std::to_string(defect));
    Eigen::SelfAdjointEigenSolver<Mat> es(sym_part(a));
    if (es.info() != Eigen::Success)
        throw NumericalError("sym_eig: eigen iteration failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

CVec eig_small(const Mat& a, Index dim_cap) {
    require_square(a, "A");
    require_finite(a, "A");
    if (a.rows() > dim_cap)
        throw InvalidInput("eig_small: dimension " + std::to_string(a.rows()) +
                           " exceeds cap " + std::to_string(dim_cap));
    if (a.rows() == 0) return CVec(0);
    Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw NumericalError("eig_small: QR iteration did not converge");
    return es.eigenvalues();
}

Mat cholesky(const Mat& a) {
    require_square(a, "A");
    require_finite(a, "A");
    Eigen::LLT<Mat> llt(sym_part(a));
    if (llt.info() != Eigen::Success)
        throw NumericalError("cholesky: matrix not positive definite");
    return Mat(llt.matrixL());
}

Mat solve_dense(const Mat& a, const Mat& b) {
    require_square(a, "A");
    require_finite(a, "A");
    require_finite(b, "B");
    if (a.rows() != b.rows()) throw InvalidInput("solve_dense: dimension mismatch");
    if (a.rows() == 0) return Mat(0, b.cols());
    Eigen::PartialPivLU<Mat> lu(a);
    double umax = 0.0, umin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < a.rows(); ++i) {
        const double d = std::abs(lu.matrixLU()(i, i));
        umax = std::max(umax, d);
        umin = std::min(umin, d);
    }
    const double rc = lu.rcond();
    if (!(rc > 10.0 * kEps) || !(umin > a.rows() * kEps * umax))
        throw NumericalError("solve_dense: matrix singular to working precision (rcond " +
                             std::to_string(rc) + ")");
    return lu.solve(b);
}

CMat solve_dense_complex(const CMat& a, const CMat& b) {
    if (a.rows() != a.cols() || a.rows() != b.rows())
        throw InvalidInput("solve_dense_complex: dimension mismatch");
    Eigen::PartialPivLU<CMat> lu(a);
    const double rc = lu.rcond();
    if (!(rc > 10.0 * kEps))
        throw NumericalError("solve_dense_complex: matrix singular to working precision");
    return lu.solve(b);
}

double spectral_abscissa(const Mat& a) {
    if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
    const CVec ev = eig_small(a);
    double m = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ev.size(); ++i) m = std::max(m, ev(i).real());
    return m;
}

namespace {

// One scaled sign-function sweep on the block pair (A, Q) representing
// W = [A Q; 0 -A^T]; converges to A -> -I, Q -> 2X.
struct SignLyapState {
    Mat a;
    Mat q;
};

double log_abs_det(const Eigen::PartialPivLU<Mat>& lu, bool* singular) {
    double s = 0.0;
    const auto& u = lu.matrixLU();
    for (Index i = 0; i < u.rows(); ++i) {
        const double d = std::abs(u(i, i));
        if (d == 0.0) {
            *singular = true;
            return 0.0;
        }
        s += std::log(d);
    }
    *singular = false;
    return s;
}

}  // namespace

namespace {

/// One sign-function sweep for A X + X A^T + Q = 0 (A Hurwitz assumed;
/// divergence is detected through the sign limit).
Mat lyapunov_sign_once(const Mat& a, const Mat& q_sym) {
    const Index n = a.rows();
    SignLyapState s{a, q_sym};
    const Mat eye = Mat::Identity(n, n);
    bool converged = false;
    for (int it = 0; it < 150; ++it) {
        Eigen::PartialPivLU<Mat> lu(s.a);
        bool singular = false;
        const double ld = log_abs_det(lu, &singular);
        if (singular) throw NumericalError("lyapunov: sign iteration hit a singular iterate");
        // determinant scaling, applied through the inverse
        const double c = std::exp(-ld / static_cast<double>(n));
        const Mat ainv = lu.solve(eye);
        const Mat a_next = 0.5 * (c * s.a + ainv / c);
        const Mat q_next = 0.5 * (c * s.q + (ainv * s.q * ainv.transpose()) / c);
        const double change = (a_next - s.a).norm();
        s.a = a_next;
        s.q = q_next;
        if (change <= 1e-12 * norm_or_one(s.a)) {
            converged = true;
            break;
        }
    }
    if (!converged || (s.a + eye).norm() > 1e-4 * static_cast<double>(n))
        throw NumericalError("lyapunov: sign iteration did not converge to -I (A not Hurwitz?)");
    return sym_part(0.5 * s.q);
}

}  // namespace

Mat lyapunov(const Mat& a, const Mat& q_rhs) {
    require_square(a, "A");
    require_square(q_rhs, "Qrhs");
    require_finite(a, "A");
    require_finite(q_rhs, "Qrhs");
    if (a.rows() != q_rhs.rows()) throw InvalidInput("lyapunov: dimension mismatch");
    const Index n = a.rows();
    if (n == 0) return Mat(0, 0);

    // Cheap spectrum screen on small problems; large ones are caught by
    // the sign limit check inside the sweep.
    if (n <= 400 && spectral_abscissa(a) >= 0.0)
        throw NumericalError("lyapunov: A is not Hurwitz");

    const Mat q_sym = sym_part(q_rhs);
    Mat x = lyapunov_sign_once(a, q_sym);

    // Iterative refinement: drives the residual down even when the
    // Lyapunov operator is badly conditioned (eigenvalues close to the
    // imaginary axis), as long as kappa * eps < 1.
    double resid = 0.0, scale = 1.0;
    for (int pass = 0; pass < 4; ++pass) {
        const Mat res_mat = a * x + x * a.transpose() + q_sym;
        resid = res_mat.norm();
        scale = std::max({q_rhs.norm(), a.norm() * x.norm(), 1.0});
        if (resid <= 1e-9 * scale) break;
        x = sym_part(x + lyapunov_sign_once(a, Mat(sym_part(res_mat))));
    }
    if (resid > 1e-8 * scale)
        throw NumericalError("lyapunov: residual " + std::to_string(resid) +
                             " exceeds tolerance");
    return x;
}

Mat care(const Mat& a, const Mat& b, const Mat& q_rhs, const Mat& rw) {
    require_square(a, "A");
    require_finite(a, "A");
    require_finite(b, "B");
    require_square(q_rhs, "Qrhs");
    require_square(rw, "Rw");
    const Index n = a.rows();
    const Index m = b.cols();
    if (b.rows() != n || q_rhs.rows() != n || rw.rows() != m)
        throw InvalidInput("care: dimension mismatch");

    Eigen::LLT<Mat> rw_llt(sym_part(rw));
    if (rw_llt.info() != Eigen::Success)
        throw NumericalError("care: Rw must be positive definite");

    // Stabilizing initial gain: zero when A is already Hurwitz, otherwise
    // the Bass Lyapunov-shift construction K0 = B^T P^{-1} with
    // (A + beta I) P + P (A + beta I)^T = 2 B B^T.
    Mat k = Mat::Zero(m, n);
    if (spectral_abscissa(a) >= 0.0) {
        const double beta = a.norm() + 1.0;
        Mat p;
        try {
            p = lyapunov(-(a + beta * Mat::Identity(n, n)), 2.0 * b * b.transpose());
        } catch (const NumericalError&) {
            throw NumericalError("care: stabilizability check failed (Bass equation)");
        }
        Eigen::LLT<Mat> pllt(sym_part(p) + kEps * p.norm() * Mat::Identity(n, n));
        if (pllt.info() != Eigen::Success)
            throw NumericalError("care: stabilizability check failed (singular reachability)");
        k = pllt.solve(b).transpose();
        if (spectral_abscissa(a - b * k) >= 0.0)
            throw NumericalError("care: initial gain is not stabilizing");
    }

    Mat x = Mat::Zero(n, n);
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
        const Mat a_cl = a - b * k;
        const Mat rhs = sym_part(q_rhs) + k.transpose() * sym_part(rw) * k;
        const Mat x_next = lyapunov(a_cl.transpose(), rhs);
        const double change = (x_next - x).norm();
        x = x_next;
        k = rw_llt.solve(b.transpose() * x);
        if (change <= 1e-12 * norm_or_one(x)) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("care: Newton iteration did not converge");

    x = sym_part(x);
    const Mat resid = a.transpose() * x + x * a - x * b * rw_llt.solve(b.transpose() * x) +
                      sym_part(q_rhs);
    const double scale = std::max({q_rhs.norm(), x.norm() * a.norm(), 1.0});
    if (resid.norm() > 1e-7 * scale)
        throw NumericalError("care: residual " + std::to_string(resid.norm()) +
                             " exceeds tolerance");
    if (spectral_abscissa(a - b * (rw_llt.solve(b.transpose() * x))) >= 0.0)
        throw NumericalError("care: computed solution is not stabilizing");
    return x;
}

}  // namespace phdae::kernels
