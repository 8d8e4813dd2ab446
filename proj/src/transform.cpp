#include "phdae/transform.hpp"

#include "phdae/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace phdae::transform {

namespace {

using kernels::kernel_basis;
using kernels::svd_full_rank;
using kernels::sym_eig;

constexpr double kStructTol = 1e-8;

void require_dhdae_triple(const Mat& e, const Mat& j, const Mat& r, const char* where) {
    require_square(e, "E");
    require_square(j, "J");
    require_square(r, "R");
    if (j.rows() != e.rows() || r.rows() != e.rows())
        throw InvalidInput(std::string(where) + ": E, J, R sizes differ");
    if (sym_defect(e) > kStructTol * norm_or_one(e))
        throw InvalidInput(std::string(where) + ": E not symmetric");
    if (skew_defect(j) > kStructTol * norm_or_one(j))
        throw InvalidInput(std::string(where) + ": J not skew-symmetric");
    if (sym_defect(r) > kStructTol * norm_or_one(r))
        throw InvalidInput(std::string(where) + ": R not symmetric");
}

/// Eigen-based split of a symmetric PSD matrix: columns ordered
/// [positive part (descending), kernel]; returns the rank.
struct PsdSplit {
    Mat basis;
    Index rank = 0;
    double gap = std::numeric_limits<double>::infinity();
    Vec positive_eigs;  ///< descending
};

PsdSplit psd_split(const Mat& a, double tol, const char* where) {
    const Index n = a.rows();
    PsdSplit out;
    if (n == 0) {
        out.basis = Mat::Identity(0, 0);
        return out;
    }
    const auto eig = sym_eig(a, kStructTol);
    const double lmax = eig.eigenvalues.size() ? eig.eigenvalues(n - 1) : 0.0;
    if (eig.eigenvalues(0) < -std::max(tol, kStructTol) * std::max(lmax, 1.0))
        throw InvalidInput(std::string(where) + ": matrix not positive semidefinite (min eig " +
                           std::to_string(eig.eigenvalues(0)) + ")");
    const double cut = tol * std::max(lmax, 0.0);
    Index rank = 0;
    for (Index i = 0; i < n; ++i)
        if (eig.eigenvalues(i) > cut) ++rank;
    out.basis.resize(n, n);
    out.positive_eigs.resize(rank);
    // eigenvalues ascend; positive part reversed to descend
    for (Index i = 0; i < rank; ++i) {
        out.basis.col(i) = eig.eigenvectors.col(n - 1 - i);
        out.positive_eigs(i) = eig.eigenvalues(n - 1 - i);
    }
    for (Index i = rank; i < n; ++i) out.basis.col(i) = eig.eigenvectors.col(n - 1 - i);
    out.rank = rank;
    if (rank > 0 && rank < n) {
        const double below = std::abs(eig.eigenvalues(n - 1 - rank));
        out.gap = below > 0.0 ? eig.eigenvalues(n - rank) / below
                              : std::numeric_limits<double>::infinity();
    }
    return out;
}

}  // namespace

std::array<Index, 5> StaircaseDecomposition::offsets() const {
    return {0, n1, n1 + n2, n1 + n2 + n3, n1 + n2 + n3 + n4};
}

Mat StaircaseDecomposition::eblock(int i, int j) const {
    const auto off = offsets();
    const auto sz = sizes();
    return Et.block(off[i - 1], off[j - 1], sz[i - 1], sz[j - 1]);
}

Mat StaircaseDecomposition::ablock(int i, int j) const {
    const auto off = offsets();
    const auto sz = sizes();
    return (Jt - Rt).block(off[i - 1], off[j - 1], sz[i - 1], sz[j - 1]);
}

Mat StaircaseDecomposition::jblock(int i, int j) const {
    const auto off = offsets();
    const auto sz = sizes();
    return Jt.block(off[i - 1], off[j - 1], sz[i - 1], sz[j - 1]);
}

Mat StaircaseDecomposition::rblock(int i, int j) const {
    const auto off = offsets();
    const auto sz = sizes();
    return Rt.block(off[i - 1], off[j - 1], sz[i - 1], sz[j - 1]);
}

std::string StaircaseDecomposition::index_label() const {
    if (!regular) return "singular";
    return std::to_string(kronecker_index);
}

StaircaseDecomposition staircase_dhdae(const Mat& e, const Mat& j, const Mat& r, double tol) {
    require_dhdae_triple(e, j, r, "staircase_dhdae");
    const Index n = e.rows();
    if (tol <= 0.0) tol = kernels::default_rank_tol(e);

    StaircaseDecomposition dec;
    dec.rank_gaps = {std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity()};

    // Step 1: orthogonal split of E into positive and kernel part.
    const auto esplit = psd_split(sym_part(e), tol, "staircase_dhdae: E");
    const Index t1 = esplit.rank;  // \tilde n_1
    dec.rank_gaps[0] = esplit.gap;
    Mat z = esplit.basis;
    Mat jt = z.transpose() * j * z;
    Mat rt = z.transpose() * r * z;

    // blocks of a larger matrix are ranked against the parent scale
    const double a_scale = (j - r).norm();

    Index t2 = 0;  // \tilde n_2
    const Index nk = n - t1;
    if (nk > 0) {
        // Step 2: full rank congruence of the (J - R) kernel block. For
        // skew J and PSD R the kernel of the sum is the common kernel of
        // both, so an SVD null space is a two-sided kernel.
        const Mat m22 = jt.bottomRightCorner(nk, nk) - rt.bottomRightCorner(nk, nk);
        const auto d22 = svd_full_rank(m22, tol, a_scale);
        t2 = d22.rank;
        dec.rank_gaps[1] = d22.rank_gap;
        Mat z22(nk, nk);
        z22 << d22.right_factor.leftCols(t2), d22.right_factor.rightCols(nk - t2);
        Mat z2 = Mat::Identity(n, n);
        z2.bottomRightCorner(nk, nk) = z22;
        z = z * z2;
        jt = z2.transpose() * jt * z2;
        rt = z2.transpose() * rt * z2;
    }

    const Index t3 = n - t1 - t2;
    if (t3 > 0 && t1 > 0) {
        // Step 3: compress the coupling of the leftover kernel block with
        // the E-positive block.
        const Mat j31 = (jt - rt).block(t1 + t2, 0, t3, t1);
        const auto d31 = svd_full_rank(j31, tol, a_scale);
        dec.n1 = d31.rank;
        dec.rank_gaps[2] = d31.rank_gap;
        Mat z3 = Mat::Identity(n, n);
        z3.topLeftCorner(t1, t1) = d31.right_factor;
        z3.bottomRightCorner(t3, t3) = d31.left_factor;
        z = z * z3;
        jt = z3.transpose() * jt * z3;
        rt = z3.transpose() * rt * z3;
    } else {
        dec.n1 = 0;
    }
    dec.n2 = t1 - dec.n1;
    dec.n3 = t2;
    dec.n4 = dec.n1;
    dec.n5 = t3 - dec.n1;

    dec.Z = z;
    dec.Et = z.transpose() * e * z;
    dec.Jt = jt;
    dec.Rt = rt;

    // Clean the structurally zero blocks, recording the largest deviation.
    const auto off = dec.offsets();
    const auto sz = dec.sizes();
    double defect = 0.0;
    auto zero_block = [&](Mat& mat, int bi, int bj) {
        auto blk = mat.block(off[bi - 1], off[bj - 1], sz[bi - 1], sz[bj - 1]);
        if (blk.size() == 0) return;
        defect = std::max(defect, blk.cwiseAbs().maxCoeff());
        blk.setZero();
    };
    for (int bi = 1; bi <= 5; ++bi)
        for (int bj = 1; bj <= 5; ++bj)
            if (bi >= 3 || bj >= 3) zero_block(dec.Et, bi, bj);
    // J rows/cols 4-5 vanish except the J41/J14 pair; R vanishes on
    // rows/cols 4-5 entirely.
    for (int bi = 1; bi <= 5; ++bi) {
        zero_block(dec.Jt, bi, 5);
        zero_block(dec.Jt, 5, bi);
        zero_block(dec.Rt, bi, 5);
        zero_block(dec.Rt, 5, bi);
        zero_block(dec.Rt, bi, 4);
        zero_block(dec.Rt, 4, bi);
        if (bi >= 2 && bi <= 4) {
            zero_block(dec.Jt, bi, 4);
            zero_block(dec.Jt, 4, bi);
        }
    }
    dec.Et = sym_part(dec.Et);
    dec.Jt = skew_part(dec.Jt);
    dec.Rt = sym_part(dec.Rt);
    dec.zero_defect = defect;

    dec.regular = (dec.n5 == 0);
    dec.unique_solutions = dec.regular;
    if (!dec.regular)
        dec.kronecker_index = -1;
    else if (dec.n1 > 0)
        dec.kronecker_index = 2;
    else if (dec.n3 > 0)
        dec.kronecker_index = 1;
    else
        dec.kronecker_index = 0;
    return dec;
}

QRemoval remove_q(const LtiPhDae& sys, double tol) {
    sys.check_dimensions();
    if (sys.has_identity_q()) {
        return {sys, false, 0, Mat::Identity(sys.n(), sys.n())};
    }
    if (tol <= 0.0) tol = kernels::default_rank_tol(sys.Q);
    const auto dq = svd_full_rank(sys.Q, tol);
    const Index r = dq.rank;

    if (r == sys.n()) {
        // Full column rank: multiply the state equation by Q^T.
        QRemoval out;
        out.system = LtiPhDae::general(
            sys.Q.transpose() * sys.E, sys.Q.transpose() * sys.J * sys.Q,
            sys.Q.transpose() * sys.R * sys.Q, Mat::Identity(sys.n(), sys.n()),
            sys.Q.transpose() * sys.G, sys.Q.transpose() * sys.P, sys.S, sys.N);
        out.system.E = sym_part(out.system.E);
        out.system.J = skew_part(out.system.J);
        out.system.R = sym_part(out.system.R);
        out.split_performed = false;
        out.removed_dim = 0;
        out.state_map = Mat::Identity(sys.n(), sys.n());
        return out;
    }

    // Rank-deficient Q: U^T Q V = [Q11 0; 0 0]; the z1 subsystem carries
    // the Hamiltonian, the z2 dynamics are structureless and reported.
    const Mat u = dq.left_factor;
    const Mat v = dq.right_factor;
    const Mat q11 = u.leftCols(r).transpose() * sys.Q * v.leftCols(r);
    const Mat e11 = u.leftCols(r).transpose() * sys.E * v.leftCols(r);
    const Mat j11 = u.leftCols(r).transpose() * sys.J * u.leftCols(r);
    const Mat r11 = u.leftCols(r).transpose() * sys.R * u.leftCols(r);
    const Mat g1 = u.leftCols(r).transpose() * sys.G;
    const Mat p1 = u.leftCols(r).transpose() * sys.P;

    QRemoval out;
    out.system = LtiPhDae::general(
        sym_part(q11.transpose() * e11), skew_part(q11.transpose() * j11 * q11),
        sym_part(q11.transpose() * r11 * q11), Mat::Identity(r, r), q11.transpose() * g1,
        q11.transpose() * p1, sys.S, sys.N);
    out.split_performed = true;
    out.removed_dim = sys.n() - r;
    out.state_map = v.leftCols(r);
    return out;
}

FeedthroughRemoval remove_feedthrough(const LtiPhDae& sys, double tol, double cond_warn) {
    sys.check_dimensions();
    if (!sys.has_identity_q())
        throw InvalidInput("remove_feedthrough: requires Q = I (run remove_q first)");
    if (tol <= 0.0) tol = kernels::default_rank_tol(sys.S);

    const Mat d = sys.S - sys.N;
    const double dscale = std::max({sys.S.norm(), sys.N.norm(), 1.0});
    if (d.norm() <= tol * dscale && sys.P.norm() <= tol * norm_or_one(sys.G)) {
        FeedthroughRemoval out;
        out.system = sys;
        return out;
    }

    const Index n = sys.n(), m = sys.m();
    const auto dd = svd_full_rank(d, tol);
    const Index r = dd.rank;
    // ker D = ker D^T because the symmetric part of D is PSD, so the
    // right singular basis gives a two-sided orthogonal reduction.
    Mat ud(m, m);
    ud << dd.right_factor.leftCols(r), dd.right_factor.rightCols(m - r);
    const Mat d1 = ud.leftCols(r).transpose() * d * ud.leftCols(r);

    const auto d1dec = svd_full_rank(d1, 0.0);
    const double cond = d1dec.singular_values(0) /
                        std::max(d1dec.singular_values(r - 1), kEps * d1dec.singular_values(0));

    const Mat gu = sys.G * ud;
    const Mat pu = sys.P * ud;
    const Mat g1 = gu.leftCols(r), g2 = gu.rightCols(m - r);
    const Mat p1 = pu.leftCols(r);
    // P2 = 0 follows from W >= 0; anything left is a structural defect.
    if (pu.rightCols(m - r).norm() > 1e-6 * norm_or_one(sys.P))
        throw InvalidInput("remove_feedthrough: P block outside range(D) violates W >= 0");

    const Mat d1inv = kernels::solve_dense(d1, Mat::Identity(r, r));
    const Mat mcore = p1 * d1inv * p1.transpose();

    Mat ee = Mat::Zero(n + r, n + r);
    ee.topLeftCorner(n, n) = sys.E;
    // assemble the extended state matrix, then take its exact skew and
    // negative-symmetric parts (the split leaves J - R untouched)
    Mat amat(n + r, n + r);
    amat << sys.J - sys.R + mcore, -p1 * d1inv, d1inv * p1.transpose(), -d1inv;
    Mat gg(n + r, m);
    Mat gtop(n, m);
    gtop << g1, g2;
    gg.topRows(n) = gtop * ud.transpose();
    Mat gbot = Mat::Zero(r, m);
    gbot.leftCols(r) = Mat::Identity(r, r);
    gg.bottomRows(r) = gbot * ud.transpose();

    FeedthroughRemoval out;
    out.system = LtiPhDae::standard(ee, skew_part(amat), sym_part(-amat), gg);
    out.extension_dim = r;
    out.d1_condition = cond;
    out.ill_conditioned = cond > cond_warn;
    return out;
}

Mat SemiExplicitParts::e_full() const {
    Mat e = Mat::Zero(n(), n());
    e.topLeftCorner(n1, n1) = e11_is_identity ? Mat(Mat::Identity(n1, n1)) : E11;
    return e;
}

Mat SemiExplicitParts::j_full() const {
    Mat j(n(), n());
    j << J11, J12, -J12.transpose(), J22;
    return j;
}

Mat SemiExplicitParts::r_full() const {
    Mat r(n(), n());
    r << R11, R12, R12.transpose(), R22;
    return r;
}

Mat SemiExplicitParts::g_full() const {
    Mat g(n(), m());
    g << G1, G2;
    return g;
}

LtiPhDae SemiExplicitParts::as_system() const {
    return LtiPhDae::standard(e_full(), j_full(), r_full(), g_full());
}

SemiExplicitParts semi_explicit_split(const LtiPhDae& sys, bool normalize_e11, double tol) {
    sys.check_dimensions();
    if (!sys.is_standard_form())
        throw InvalidInput(
            "semi_explicit_split: requires Q = I, P = 0, no feedthrough "
            "(apply remove_q / remove_feedthrough first)");
    if (tol <= 0.0) tol = kernels::default_rank_tol(sys.E);

    const auto esplit = psd_split(sym_part(sys.E), tol, "semi_explicit_split: E");
    const Index n1 = esplit.rank;
    const Index n2 = sys.n() - n1;
    Mat v0 = esplit.basis;

    SemiExplicitParts parts;
    parts.n1 = n1;
    parts.n2 = n2;
    parts.E11 = Mat(esplit.positive_eigs.asDiagonal());

    Mat j = v0.transpose() * sys.J * v0;
    Mat r = v0.transpose() * sys.R * v0;
    Mat g = v0.transpose() * sys.G;

    if (normalize_e11 && n1 > 0) {
        // E11 is diagonal positive here; the Cholesky congruence is a
        // row/column scaling.
        Vec scale = esplit.positive_eigs.array().sqrt().inverse().matrix();
        Mat dsc = Mat::Identity(sys.n(), sys.n());
        dsc.topLeftCorner(n1, n1) = Mat(scale.asDiagonal());
        v0 = v0 * dsc;
        j = dsc.transpose() * j * dsc;
        r = dsc.transpose() * r * dsc;
        g.topRows(n1) = scale.asDiagonal() * g.topRows(n1);
        parts.E11 = Mat::Identity(n1, n1);
        parts.e11_is_identity = true;
    }

    parts.V0 = v0;
    parts.J11 = skew_part(j.topLeftCorner(n1, n1));
    parts.J12 = j.topRightCorner(n1, n2);
    parts.J22 = skew_part(j.bottomRightCorner(n2, n2));
    parts.R11 = sym_part(r.topLeftCorner(n1, n1));
    parts.R12 = r.topRightCorner(n1, n2);
    parts.R22 = sym_part(r.bottomRightCorner(n2, n2));
    parts.G1 = g.topRows(n1);
    parts.G2 = g.bottomRows(n2);

    if (n2 > 0) {
        const Mat a22 = parts.J22 - parts.R22;
        const auto d = svd_full_rank(a22, tol, (sys.J - sys.R).norm());
        if (d.rank < n2) {
            const auto dec = staircase_dhdae(sys.E, sys.J, sys.R, tol);
            throw InvalidInput(
                "semi_explicit_split: J22 - R22 singular; pencil is index " +
                dec.index_label() + " -- reduce via staircase/reduce_to_ode first");
        }
    }
    return parts;
}

namespace {

/// Common two-sided kernel of A = J - R (skew plus negative PSD): any
/// right null vector is also a left null vector.
Mat steady_kernel(const Mat& a, double tol, double scale) {
    if (a.rows() == 0) return Mat(0, 0);
    return kernel_basis(a, tol, scale);
}

ReducedOde reduce_impl(const StaircaseDecomposition& dec, const Mat* g_opt, double tol) {
    if (!dec.regular)
        throw InvalidInput("reduce_to_ode: staircase reports a singular pencil (n5 > 0)");
    if (tol <= 0.0) tol = kernels::default_rank_tol(dec.Et);
    const Index n2 = dec.n2, n3 = dec.n3;

    const Mat e22 = dec.eblock(2, 2);
    Mat a_red = dec.ablock(2, 2);
    Mat z3c(n3, n2);
    if (n3 > 0) {
        const Mat a33 = dec.ablock(3, 3);
        const Mat a32 = dec.ablock(3, 2);
        z3c = -kernels::solve_dense(a33, a32);
        a_red += dec.ablock(2, 3) * z3c;
    }

    Mat g_red;
    if (g_opt) {
        const Mat gt = dec.Z.transpose() * (*g_opt);
        const auto off = dec.offsets();
        const auto sz = dec.sizes();
        const double gscale = norm_or_one(*g_opt);
        const Mat g3 = gt.middleRows(off[2], sz[2]);
        const Mat g4 = gt.middleRows(off[3], sz[3]);
        if (g3.norm() > 1e-10 * gscale || g4.norm() > 1e-10 * gscale)
            throw InvalidInput(
                "reduce_to_ode: inputs load the algebraic staircase rows; "
                "use the semi-explicit or condensed-form pipeline instead");
        g_red = gt.middleRows(off[1], sz[1]);
    }

    ReducedOde ode;
    ode.Z = dec.Z;
    ode.z3_coupling = z3c;

    // Split off conserved directions: the common kernel of the reduced
    // (J, R) pair carries no dynamics (a^T E z is a constant of motion).
    const Mat k0 = steady_kernel(a_red, tol, (dec.Jt - dec.Rt).norm());
    const Index k = k0.cols();
    ode.steady_dim = k;
    ode.steady_modes = k0;
    if (k == 0) {
        ode.dynamic_basis = Mat::Identity(n2, n2);
        ode.E = sym_part(e22);
        ode.J = skew_part(a_red);
        ode.R = sym_part(-a_red);
        ode.G = g_opt ? g_red : Mat(0, 0);
    } else {
        if (g_opt && (k0.transpose() * g_red).norm() > 1e-10 * norm_or_one(g_red))
            throw InvalidInput(
                "reduce_to_ode: inputs reach a conserved direction; the ODE part "
                "cannot be separated exactly");
        const Mat w = kernel_basis(Mat(k0.transpose() * e22), tol);
        ode.dynamic_basis = w;
        ode.E = sym_part(w.transpose() * e22 * w);
        const Mat a_def = w.transpose() * a_red * w;
        ode.J = skew_part(a_def);
        ode.R = sym_part(-a_def);
        ode.G = g_opt ? Mat(w.transpose() * g_red) : Mat(0, 0);
    }
    // Clamp roundoff in the PSD dissipation block.
    return ode;
}

}  // namespace

LtiPhDae ReducedOde::as_system() const {
    const Index nn = E.rows();
    Mat g = G.size() ? G : Mat::Zero(nn, 0);
    return LtiPhDae::standard(E, J, R, g);
}

ReducedOde reduce_to_ode(const StaircaseDecomposition& dec) {
    return reduce_impl(dec, nullptr, -1.0);
}

ReducedOde reduce_to_ode(const StaircaseDecomposition& dec, const Mat& g, double tol) {
    return reduce_impl(dec, &g, tol);
}

std::array<Index, 7> CondensedPhDae::offsets() const {
    std::array<Index, 7> off{};
    Index acc = 0;
    for (int i = 0; i < 6; ++i) {
        off[static_cast<std::size_t>(i)] = acc;
        acc += block_sizes[static_cast<std::size_t>(i)];
    }
    off[6] = acc;
    return off;
}

CondensedPhDae condensed_phdae(const LtiPhDae& sys, double tol) {
    sys.check_dimensions();
    if (!sys.is_standard_form())
        throw InvalidInput("condensed_phdae: requires Q = I, P = 0, no feedthrough");
    require_dhdae_triple(sys.E, sys.J, sys.R, "condensed_phdae");
    if (tol <= 0.0) tol = kernels::default_rank_tol(sys.E);

    const Index n = sys.n(), m = sys.m();
    CondensedPhDae out;
    const double a_scale = (sys.J - sys.R).norm();
    const double g_scale = norm_or_one(sys.G);

    // Common kernel of (E, J, R); within it, directions seen by G form
    // block 6, the rest is the removable null part.
    Mat stack(3 * n, n);
    stack << sym_part(sys.E), sys.J, sys.R;
    const auto dstack = svd_full_rank(stack, tol);
    const Index k = n - dstack.rank;
    const Mat w_common = dstack.right_factor.rightCols(k);
    const Mat w_c = dstack.right_factor.leftCols(n - k);

    Index k6 = 0;
    Mat w6(n, 0), w_null(n, 0);
    if (k > 0) {
        const auto dg = svd_full_rank(Mat(w_common.transpose() * sys.G), tol, g_scale);
        k6 = dg.rank;
        w6 = w_common * dg.left_factor.leftCols(k6);
        w_null = w_common * dg.left_factor.rightCols(k - k6);
    }

    // Work on the subsystem spanned by w_c.
    const Index ns = n - k;
    const Mat es = w_c.transpose() * sys.E * w_c;
    const Mat js = w_c.transpose() * sys.J * w_c;
    const Mat rs = w_c.transpose() * sys.R * w_c;

    const auto esplit = psd_split(sym_part(es), tol, "condensed_phdae: E");
    const Index ne = esplit.rank;
    Mat basis = w_c * esplit.basis;  // columns: [E-positive | E-kernel]

    // Invertible part of (J - R) restricted to the E-kernel.
    const Index nkern = ns - ne;
    Index n3 = 0;
    if (nkern > 0) {
        const Mat bk = basis.rightCols(nkern);
        const Mat m22 = bk.transpose() * (sys.J - sys.R) * bk;
        const auto d22 = svd_full_rank(m22, tol, a_scale);
        n3 = d22.rank;
        Mat reord(n, nkern);
        reord << bk * d22.right_factor.leftCols(n3), bk * d22.right_factor.rightCols(nkern - n3);
        basis.rightCols(nkern) = reord;
    }
    const Index nr = nkern - n3;  // leftover kernel rows -> blocks 4, 5

    // Input transform: compress the block-6 rows of G to the trailing
    // input columns, then the leftover-kernel rows to the middle ones.
    Mat u_in = Mat::Identity(m, m);
    Mat g63(0, 0);
    if (k6 > 0) {
        const auto d4 = svd_full_rank(Mat(w6.transpose() * sys.G), tol, g_scale);
        Mat u0(m, m);
        u0 << d4.right_factor.rightCols(m - k6), d4.right_factor.leftCols(k6);
        u_in = u0;
    }
    Index ra = 0;
    Mat b_rem = basis.middleCols(ne + n3, nr);
    if (nr > 0 && m - k6 > 0) {
        const Mat g3a = b_rem.transpose() * sys.G * u_in.leftCols(m - k6);
        const auto da = svd_full_rank(g3a, tol, g_scale);
        ra = da.rank;
        // rows: [G-visible part -> block 4 | rest -> block 5]
        Mat rows(n, nr);
        rows << b_rem * da.left_factor.leftCols(ra), b_rem * da.left_factor.rightCols(nr - ra);
        b_rem = rows;
        Mat ucols(m - k6, m - k6);
        ucols << da.right_factor.rightCols(m - k6 - ra), da.right_factor.leftCols(ra);
        Mat u2 = Mat::Identity(m, m);
        u2.topLeftCorner(m - k6, m - k6) = ucols;
        u_in = u_in * u2;
    }
    const Index m4 = ra;
    const Index m5 = nr - ra;

    // Column compression of the block-5 coupling splits the E-positive
    // part into blocks 1 and 2.
    Mat b_pos = basis.leftCols(ne);
    Index m1 = 0;
    Mat b5 = b_rem.rightCols(m5);
    if (m5 > 0) {
        const Mat j51 = b5.transpose() * (sys.J - sys.R) * b_pos;
        const auto d5 = svd_full_rank(j51, tol, a_scale);
        m1 = d5.rank;
        Mat pos(n, ne);
        pos << b_pos * d5.right_factor.leftCols(m1), b_pos * d5.right_factor.rightCols(ne - m1);
        b_pos = pos;
        b5 = b5 * d5.left_factor;
        out.certificates.push_back({"J15", m1 > 0 ? d5.singular_values(m1 - 1) : 0.0,
                                    d5.singular_values.size() ? d5.singular_values(0) : 0.0,
                                    m1 == m5, false});
    }
    const Index m2 = ne - m1;

    // Assemble the state transform: [1 | 2 | 3 | 4 | 5 | 6 | null].
    Mat v(n, n);
    v << b_pos, basis.middleCols(ne, n3), b_rem.leftCols(m4), b5, w6, w_null;
    out.V = v;
    out.U = u_in;
    out.block_sizes = {m1, m2, n3, m4, m5, k6};
    out.input_sizes = {m - k6 - ra, ra, k6};
    out.null_dim = k - k6;
    out.Et = sym_part(v.transpose() * sys.E * v);
    out.Jt = skew_part(v.transpose() * sys.J * v);
    out.Rt = sym_part(v.transpose() * sys.R * v);
    out.Gt = v.transpose() * sys.G * u_in;

    // Certificates for the invertible blocks named by the condensed form.
    const auto off = out.offsets();
    auto add_cert = [&](const std::string& name, const Mat& blk, bool square_needed) {
        CondensedPhDae::Certificate c;
        c.block = name;
        if (blk.size() == 0) {
            c.invertible = true;
            c.min_singular_value = std::numeric_limits<double>::infinity();
            out.certificates.push_back(c);
            return;
        }
        const auto d = svd_full_rank(blk, tol);
        c.scale = d.singular_values(0);
        c.min_singular_value = d.singular_values(d.singular_values.size() - 1);
        const bool square_ok = !square_needed || blk.rows() == blk.cols();
        c.invertible = square_ok && c.min_singular_value > tol * std::max(c.scale, 1.0);
        c.marginal = c.invertible && c.min_singular_value <= 1e3 * tol * std::max(c.scale, 1.0);
        out.certificates.push_back(c);
    };
    add_cert("E22", out.Et.block(off[1], off[1], m2, m2), true);
    add_cert("J33-R33", (out.Jt - out.Rt).block(off[2], off[2], n3, n3), true);
    if (m5 == 0)
        out.certificates.push_back({"J15", std::numeric_limits<double>::infinity(), 0.0, true, false});
    const Index u_off1 = m - k6 - ra;
    add_cert("G42", out.Gt.block(off[3], u_off1, m4, ra), true);
    add_cert("G63", out.Gt.block(off[5], m - k6, k6, k6), true);

    // Structural zero pattern defect (G rows of blocks 4-6 and null).
    double defect = 0.0;
    if (m4 > 0 && u_off1 > 0)
        defect = std::max(defect, out.Gt.block(off[3], 0, m4, u_off1).lpNorm<Eigen::Infinity>());
    if (m5 > 0 && m - k6 > 0)
        defect = std::max(defect, out.Gt.block(off[4], 0, m5, m - k6).lpNorm<Eigen::Infinity>());
    if (k6 > 0 && m - k6 > 0)
        defect = std::max(defect, out.Gt.block(off[5], 0, k6, m - k6).lpNorm<Eigen::Infinity>());
    if (out.null_dim > 0)
        defect = std::max(defect, out.Gt.bottomRows(out.null_dim).lpNorm<Eigen::Infinity>());
    out.zero_defect = defect;
    return out;
}

RegularizationResult regularize_output_feedback(const LtiPhDae& sys, const Mat* w_choice,
                                                double tol) {
    sys.check_dimensions();
    if (!sys.is_standard_form())
        throw InvalidInput("regularize_output_feedback: requires Q = I, P = 0, no feedthrough");
    const Index m = sys.m();
    Mat w = w_choice ? *w_choice : Mat(Mat::Identity(m, m));
    if (w.rows() != m || w.cols() != m)
        throw InvalidInput("regularize_output_feedback: feedback has wrong size");

    const auto eig = kernels::sym_eig(sym_part(w + w.transpose()), 1.0);
    if (eig.eigenvalues.size() && eig.eigenvalues(0) <= 1e-12 * norm_or_one(w))
        throw InvalidInput("regularize_output_feedback: W + W^T must be positive definite");

    RegularizationResult out;
    out.feedback = w;
    out.closed = LtiPhDae::standard(sys.E, sys.J - sys.G * skew_part(w) * sys.G.transpose(),
                                    sys.R + sys.G * sym_part(w) * sys.G.transpose(), sys.G);
    out.verdict = staircase_dhdae(out.closed.E, out.closed.J, out.closed.R, tol);
    return out;
}

}  // namespace phdae::transform
