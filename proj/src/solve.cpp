#include "phdae/solve.hpp"

#include "phdae/kernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace phdae::solve {

std::vector<Index> HsStaircase::offsets() const {
    std::vector<Index> off(block_sizes.size() + 1, 0);
    for (std::size_t i = 0; i < block_sizes.size(); ++i) off[i + 1] = off[i] + block_sizes[i];
    return off;
}

HsStaircase hs_staircase(const Mat& a, double tol) {
    require_square(a, "A");
    require_finite(a, "A");
    const Index n = a.rows();
    if (tol <= 0.0) tol = kernels::default_rank_tol(a);

    const Mat h = sym_part(a);
    const Mat s = skew_part(a);

    HsStaircase out;
    if (n == 0) {
        out.U = Mat::Identity(0, 0);
        out.Ht = out.St = Mat(0, 0);
        return out;
    }

    const auto eig = kernels::sym_eig(h, 1.0);
    const double lmax = eig.eigenvalues(n - 1);
    if (eig.eigenvalues(0) < -std::max(tol, 1e-10) * std::max(lmax, 1.0))
        throw InvalidInput("hs_staircase: symmetric part is indefinite (min eig " +
                           std::to_string(eig.eigenvalues(0)) + ")");

    // Leading block: range of H, eigenvalues descending.
    Index n1 = 0;
    for (Index i = 0; i < n; ++i)
        if (eig.eigenvalues(i) > tol * std::max(lmax, 0.0)) ++n1;
    Mat u(n, n);
    for (Index i = 0; i < n; ++i) u.col(i) = eig.eigenvectors.col(n - 1 - i);

    out.block_sizes.push_back(n1);
    Index done = n1;
    // Repeated compression of the skew coupling below the last block. The
    // loop appends chain blocks; the terminal decoupled block (possibly
    // empty) is appended exactly once at the end.
    bool terminal_added = false;
    while (done < n) {
        const Index prev = out.block_sizes.back();
        const Index rest = n - done;
        if (prev == 0) {
            out.block_sizes.push_back(rest);
            terminal_added = true;
            break;
        }
        const Mat s_cur = u.transpose() * s * u;
        const Mat coupling = s_cur.block(done, done - prev, rest, prev);
        const auto d = kernels::svd_full_rank(coupling, tol, s.norm());
        const Index ni = d.rank;
        if (ni == 0) {
            out.block_sizes.push_back(rest);
            terminal_added = true;
            break;
        }
        // rows: W2 reorders the trailing part; cols: V2 reorders the
        // previous block so the coupling lands on its leading columns.
        Mat u_step = Mat::Identity(n, n);
        u_step.block(done - prev, done - prev, prev, prev) = d.right_factor;
        u_step.block(done, done, rest, rest) = d.left_factor;
        u = u * u_step;
        out.block_sizes.push_back(ni);
        done += ni;
    }
    if (!terminal_added) out.block_sizes.push_back(0);

    out.U = u;
    out.Ht = sym_part(u.transpose() * h * u);
    out.St = skew_part(u.transpose() * s * u);

    // Clean the structural zeros: H outside its leading block, S beyond
    // the first sub/superdiagonal blocks, and the couplings of the
    // terminal block.
    const auto off = out.offsets();
    const Index r = out.blocks();
    double defect = 0.0;
    auto zero = [&](Mat& mat, Index i0, Index j0, Index ri, Index cj) {
        if (ri == 0 || cj == 0) return;
        auto blk = mat.block(i0, j0, ri, cj);
        defect = std::max(defect, blk.cwiseAbs().maxCoeff());
        blk.setZero();
    };
    if (n - n1 > 0) {
        zero(out.Ht, n1, 0, n - n1, n);
        zero(out.Ht, 0, n1, n1, n - n1);
    }
    for (Index bi = 0; bi < r; ++bi)
        for (Index bj = 0; bj < r; ++bj) {
            const bool tridiag = std::abs(bi - bj) <= 1;
            const bool last_coupling = (bi == r - 1 || bj == r - 1) && bi != bj;
            if (!tridiag || last_coupling)
                zero(out.St, off[static_cast<std::size_t>(bi)], off[static_cast<std::size_t>(bj)],
                     out.block_sizes[static_cast<std::size_t>(bi)],
                     out.block_sizes[static_cast<std::size_t>(bj)]);
        }
    out.zero_defect = defect;
    return out;
}

Vec staircase_solve(const HsStaircase& dec, const Vec& b) {
    const Index n = dec.U.rows();
    if (b.size() != n) throw InvalidInput("staircase_solve: rhs dimension mismatch");
    const Index r = dec.blocks();
    const auto off = dec.offsets();

    // Work on T = U^T A U, y = U^T b; forward elimination down the
    // staircase, then back substitution.
    Mat t = dec.Ht + dec.St;
    Vec y = dec.U.transpose() * b;

    std::vector<Eigen::PartialPivLU<Mat>> lus;
    lus.reserve(static_cast<std::size_t>(r));
    for (Index bi = 0; bi < r; ++bi) {
        const Index i0 = off[static_cast<std::size_t>(bi)];
        const Index ni = dec.block_sizes[static_cast<std::size_t>(bi)];
        if (ni == 0) {
            lus.emplace_back();
            continue;
        }
        Mat diag = t.block(i0, i0, ni, ni);
        Eigen::PartialPivLU<Mat> lu(diag);
        if (!(lu.rcond() > 10.0 * kEps))
            throw NumericalError("staircase_solve: singular pivot block (A singular)");
        // eliminate the sub-diagonal coupling into the next block
        if (bi + 1 < r) {
            const Index j0 = off[static_cast<std::size_t>(bi + 1)];
            const Index nj = dec.block_sizes[static_cast<std::size_t>(bi + 1)];
            if (nj > 0) {
                const Mat low = t.block(j0, i0, nj, ni);
                const Mat fac = lu.solve(Mat(t.block(i0, j0, ni, nj)));
                t.block(j0, j0, nj, nj) -= low * fac;
                y.segment(j0, nj) -= low * lu.solve(Vec(y.segment(i0, ni)));
                t.block(j0, i0, nj, ni).setZero();
            }
        }
        lus.push_back(std::move(lu));
    }

    Vec x = Vec::Zero(n);
    for (Index bi = r - 1; bi >= 0; --bi) {
        const Index i0 = off[static_cast<std::size_t>(bi)];
        const Index ni = dec.block_sizes[static_cast<std::size_t>(bi)];
        if (ni == 0) continue;
        Vec rhs = y.segment(i0, ni);
        if (bi + 1 < r) {
            const Index j0 = off[static_cast<std::size_t>(bi + 1)];
            const Index nj = dec.block_sizes[static_cast<std::size_t>(bi + 1)];
            if (nj > 0) rhs -= t.block(i0, j0, ni, nj) * x.segment(j0, nj);
        }
        x.segment(i0, ni) = lus[static_cast<std::size_t>(bi)].solve(rhs);
    }
    return dec.U * x;
}

namespace {

struct HOps {
    Eigen::LLT<Mat> llt;
    const Mat* s;

    Vec apply_k(const Vec& v) const { return llt.solve((*s) * v); }
    double h_norm(const Vec& v) const {
        // sqrt(v^T H v) via the Cholesky factor
        const Vec lv = llt.matrixL().transpose() * v;
        return lv.norm();
    }
};

}  // namespace

KrylovResult widlund_solve(const Mat& h, const Mat& s, const Vec& b, double tol, Index maxit) {
    require_square(h, "H");
    require_square(s, "S");
    const Index n = h.rows();
    if (s.rows() != n || b.size() != n) throw InvalidInput("widlund_solve: dimension mismatch");
    if (sym_defect(h) > 1e-8 * norm_or_one(h))
        throw InvalidInput("widlund_solve: H not symmetric");
    if (skew_defect(s) > 1e-8 * norm_or_one(s))
        throw InvalidInput("widlund_solve: S not skew-symmetric");
    if (maxit <= 0) maxit = n + 2;

    HOps ops;
    ops.llt.compute(sym_part(h));
    if (ops.llt.info() != Eigen::Success)
        throw NumericalError("widlund_solve: H is not positive definite");
    ops.s = &s;

    KrylovResult out;
    const Vec bhat = ops.llt.solve(b);
    const double bnorm = ops.h_norm(bhat);
    if (bnorm == 0.0) {
        out.x = Vec::Zero(n);
        out.log.termination = "converged";
        out.log.residual_history.push_back(0.0);
        return out;
    }

    // Lanczos in the H-inner product: K v_j = delta_{j+1} v_{j+1} - delta_j v_{j-1}.
    std::vector<Vec> basis;
    basis.push_back(bhat / bnorm);
    std::vector<double> delta;  // delta_{j+1}, j = 0, 1, ...

    // Minimum-H-norm-residual extraction: QR of the (j+1) x j matrix
    // (I + T_j^ext) by Givens rotations, updated column by column.
    std::vector<double> g_cos, g_sin;
    std::vector<Vec> r_cols;      // upper-triangular columns (dense, small)
    Vec rhs_rot(maxit + 1);
    rhs_rot.setZero();
    rhs_rot(0) = bnorm;

    double resid = bnorm;
    out.log.residual_history.push_back(resid / bnorm);
    Index j = 0;
    std::string term = "maxit";
    while (j < maxit) {
        // expand the basis
        Vec w = ops.apply_k(basis[static_cast<std::size_t>(j)]);
        if (j > 0) w += delta[static_cast<std::size_t>(j - 1)] * basis[static_cast<std::size_t>(j - 1)];
        // (skew-adjointness makes the diagonal term vanish; fold in a
        // safeguard reorthogonalization against the last two vectors)
        for (Index back = std::max<Index>(0, j - 1); back <= j; ++back) {
            const Vec& vb = basis[static_cast<std::size_t>(back)];
            const double c = (ops.llt.matrixL().transpose() * w)
                                 .dot(ops.llt.matrixL().transpose() * vb);
            w -= c * vb;
        }
        const double dnext = ops.h_norm(w);

        // column j of (I + T^ext): entries at rows j-1, j, j+1; the
        // superdiagonal of the skew tridiagonal T carries -delta_j
        Vec col = Vec::Zero(j + 2);
        if (j > 0) col(j - 1) = -delta[static_cast<std::size_t>(j - 1)];
        col(j) = 1.0;
        col(j + 1) = dnext;
        // apply the accumulated rotations
        for (Index i = 0; i < j; ++i) {
            const double a0 = col(i), a1 = col(i + 1);
            col(i) = g_cos[static_cast<std::size_t>(i)] * a0 + g_sin[static_cast<std::size_t>(i)] * a1;
            col(i + 1) = -g_sin[static_cast<std::size_t>(i)] * a0 + g_cos[static_cast<std::size_t>(i)] * a1;
        }
        // new rotation to kill the subdiagonal
        const double denom = std::hypot(col(j), col(j + 1));
        const double cj = denom > 0 ? col(j) / denom : 1.0;
        const double sj = denom > 0 ? col(j + 1) / denom : 0.0;
        g_cos.push_back(cj);
        g_sin.push_back(sj);
        col(j) = denom;
        col(j + 1) = 0.0;
        r_cols.push_back(col.head(j + 1));
        const double r0 = rhs_rot(j);
        rhs_rot(j) = cj * r0;
        rhs_rot(j + 1) = -sj * r0;

        resid = std::abs(rhs_rot(j + 1));
        ++j;
        out.log.residual_history.push_back(resid / bnorm);

        if (resid <= tol * bnorm) {
            term = "converged";
            break;
        }
        if (dnext <= 1e-14 * bnorm) {
            term = "exhausted";  // Krylov space exhausted: exact solve
            break;
        }
        delta.push_back(dnext);
        basis.push_back(w / dnext);
    }

    // back substitution for the least-squares coefficients
    Vec ycoef = Vec::Zero(j);
    for (Index i = j - 1; i >= 0; --i) {
        double v = rhs_rot(i);
        for (Index kk = i + 1; kk < j; ++kk) v -= r_cols[static_cast<std::size_t>(kk)](i) * ycoef(kk);
        ycoef(i) = v / r_cols[static_cast<std::size_t>(i)](i);
    }
    Vec x = Vec::Zero(n);
    for (Index i = 0; i < j; ++i) x += ycoef(i) * basis[static_cast<std::size_t>(i)];

    out.x = x;
    out.log.iterations = j;
    out.log.termination = term;
    return out;
}

KrylovResult gmres_ref(const Mat& h, const Mat& s, const Vec& b, double tol, Index maxit) {
    require_square(h, "H");
    require_square(s, "S");
    const Index n = h.rows();
    if (s.rows() != n || b.size() != n) throw InvalidInput("gmres_ref: dimension mismatch");
    if (maxit <= 0) maxit = n + 2;

    Eigen::LLT<Mat> llt(sym_part(h));
    if (llt.info() != Eigen::Success) throw NumericalError("gmres_ref: H is not positive definite");
    auto h_norm = [&](const Vec& v) { return Vec(llt.matrixL().transpose() * v).norm(); };
    auto op = [&](const Vec& v) -> Vec { return v + llt.solve(s * v); };

    KrylovResult out;
    const Vec bhat = llt.solve(b);
    const double bnorm_h = h_norm(bhat);
    const double beta = bhat.norm();
    if (beta == 0.0) {
        out.x = Vec::Zero(n);
        out.log.termination = "converged";
        out.log.residual_history.push_back(0.0);
        return out;
    }

    std::vector<Vec> basis{bhat / beta};
    Mat hess = Mat::Zero(maxit + 1, maxit);
    Vec g = Vec::Zero(maxit + 1);
    g(0) = beta;
    std::vector<double> cs, sn;

    auto current_x = [&](Index j) -> Vec {
        // solve the rotated triangular system of size j
        Vec y = Vec::Zero(j);
        for (Index i = j - 1; i >= 0; --i) {
            double v = g(i);
            for (Index kk = i + 1; kk < j; ++kk) v -= hess(i, kk) * y(kk);
            y(i) = v / hess(i, i);
        }
        Vec x = Vec::Zero(n);
        for (Index i = 0; i < j; ++i) x += y(i) * basis[static_cast<std::size_t>(i)];
        return x;
    };

    out.log.residual_history.push_back(h_norm(bhat - op(Vec::Zero(n))) / bnorm_h);
    Index j = 0;
    std::string term = "maxit";
    while (j < maxit) {
        Vec w = op(basis[static_cast<std::size_t>(j)]);
        for (Index i = 0; i <= j; ++i) {
            hess(i, j) = w.dot(basis[static_cast<std::size_t>(i)]);
            w -= hess(i, j) * basis[static_cast<std::size_t>(i)];
        }
        hess(j + 1, j) = w.norm();
        const bool breakdown = hess(j + 1, j) <= 1e-14 * beta;
        if (!breakdown) basis.push_back(w / hess(j + 1, j));

        for (Index i = 0; i < j; ++i) {
            const double a0 = hess(i, j), a1 = hess(i + 1, j);
            hess(i, j) = cs[static_cast<std::size_t>(i)] * a0 + sn[static_cast<std::size_t>(i)] * a1;
            hess(i + 1, j) = -sn[static_cast<std::size_t>(i)] * a0 + cs[static_cast<std::size_t>(i)] * a1;
        }
        const double denom = std::hypot(hess(j, j), hess(j + 1, j));
        const double cj = denom > 0 ? hess(j, j) / denom : 1.0;
        const double sj = denom > 0 ? hess(j + 1, j) / denom : 0.0;
        cs.push_back(cj);
        sn.push_back(sj);
        hess(j, j) = denom;
        hess(j + 1, j) = 0.0;
        const double g0 = g(j);
        g(j) = cj * g0;
        g(j + 1) = -sj * g0;
        ++j;

        // same termination rule as widlund_solve: H-norm of the residual
        const Vec x = current_x(j);
        const double res_h = h_norm(bhat - op(x));
        out.log.residual_history.push_back(res_h / bnorm_h);
        if (res_h <= tol * bnorm_h) {
            term = "converged";
            break;
        }
        if (breakdown) {
            term = "exhausted";
            break;
        }
    }

    out.x = current_x(j);
    out.log.iterations = j;
    out.log.termination = term;
    return out;
}

}  // namespace phdae::solve
