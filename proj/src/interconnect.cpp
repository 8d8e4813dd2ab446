#include "phdae/interconnect.hpp"

#include "phdae/kernels.hpp"

namespace phdae::interconnect {

namespace {

void block_diag_into(Mat& dst, const Mat& a, const Mat& b) {
    dst.topLeftCorner(a.rows(), a.cols()) = a;
    dst.bottomRightCorner(b.rows(), b.cols()) = b;
}

}  // namespace

LtiPhDae couple_feedback(const LtiPhDae& a, const LtiPhDae& b, const Mat& f, double tol) {
    if (!a.is_standard_form() || !b.is_standard_form())
        throw InvalidInput("couple_feedback: both systems must have Q = I, P = 0, no feedthrough");
    const Index n1 = a.n(), n2 = b.n(), m1 = a.m(), m2 = b.m();
    const Index n = n1 + n2, mt = m1 + m2;
    if (f.rows() != mt || f.cols() != mt)
        throw InvalidInput("couple_feedback: F must be (m1+m2) square");

    Mat e = Mat::Zero(n, n), j = Mat::Zero(n, n), r = Mat::Zero(n, n), g = Mat::Zero(n, mt);
    block_diag_into(e, a.E, b.E);
    block_diag_into(j, a.J, b.J);
    block_diag_into(r, a.R, b.R);
    g.topLeftCorner(n1, m1) = a.G;
    g.bottomRightCorner(n2, m2) = b.G;

    // pH preservation is this module's contract: refuse any coupling whose
    // symmetric part injects energy, and report the dissipation defect.
    const Mat r_closed = sym_part(r - g * sym_part(f) * g.transpose());
    const auto f_eig = kernels::sym_eig(sym_part(f) + sym_part(f).transpose(), 1.0);
    const double f_max = f_eig.eigenvalues.size() ? f_eig.eigenvalues(f.rows() - 1) : 0.0;
    if (f_max > tol * norm_or_one(f)) {
        const auto eig = kernels::sym_eig(r_closed, 1.0);
        const double mineig = eig.eigenvalues.size() ? eig.eigenvalues(0) : 0.0;
        throw CouplingError(
            "couple_feedback: F_sym not negative semidefinite; closed-loop dissipation "
            "min eig " + std::to_string(mineig),
            mineig);
    }

    return LtiPhDae::standard(e, skew_part(j + g * skew_part(f) * g.transpose()), r_closed, g);
}

LtiPhDae couple_general(const LtiPhDae& a, const LtiPhDae& b, const Mat& m_rel,
                        const Mat& l_rel, double /*tol*/) {
    const Index n1 = a.n(), n2 = b.n(), m1 = a.m(), m2 = b.m();
    const Index l1 = a.ell(), l2 = b.ell();
    const Index mt = m1 + m2;
    if (m_rel.rows() != mt || m_rel.cols() != mt || l_rel.rows() != mt || l_rel.cols() != mt)
        throw InvalidInput("couple_general: M, L must be (m1+m2) square");

    // State (z1, z2, u1, u2, y1, y2), effort blocks additionally carry the
    // zero-effort relation rows, so ell = n + m1 + m2.
    const Index n = n1 + n2 + 2 * mt;
    const Index ell = l1 + l2 + 2 * mt + mt;

    // effort/equation block offsets
    const Index be1 = 0, be2 = l1, bu1 = l1 + l2, bu2 = bu1 + m1, by1 = bu2 + m2,
                by2 = by1 + m1, brel = by2 + m2;
    // state block offsets
    const Index sz1 = 0, sz2 = n1, su1 = n1 + n2, su2 = su1 + m1, sy1 = su2 + m2,
                sy2 = sy1 + m1;

    Mat e = Mat::Zero(ell, n);
    e.block(be1, sz1, l1, n1) = a.E;
    e.block(be2, sz2, l2, n2) = b.E;

    Mat q = Mat::Zero(ell, n);
    q.block(be1, sz1, l1, n1) = a.Q;
    q.block(be2, sz2, l2, n2) = b.Q;
    q.block(bu1, su1, m1, m1) = Mat::Identity(m1, m1);
    q.block(bu2, su2, m2, m2) = Mat::Identity(m2, m2);
    q.block(by1, sy1, m1, m1) = Mat::Identity(m1, m1);
    q.block(by2, sy2, m2, m2) = Mat::Identity(m2, m2);

    Mat j = Mat::Zero(ell, ell);
    auto skew_place = [&](Index r0, Index c0, const Mat& blk) {
        j.block(r0, c0, blk.rows(), blk.cols()) = blk;
        j.block(c0, r0, blk.cols(), blk.rows()) = -blk.transpose();
    };
    j.block(be1, be1, l1, l1) = a.J;
    j.block(be2, be2, l2, l2) = b.J;
    j.block(bu1, bu1, m1, m1) = a.N;
    j.block(bu2, bu2, m2, m2) = b.N;
    skew_place(be1, bu1, a.G);
    skew_place(be2, bu2, b.G);
    skew_place(bu1, by1, Mat(Mat::Identity(m1, m1)));
    skew_place(bu2, by2, Mat(Mat::Identity(m2, m2)));
    skew_place(bu1, brel, Mat(-m_rel.leftCols(m1).transpose()));
    skew_place(bu2, brel, Mat(-m_rel.rightCols(m2).transpose()));
    skew_place(by1, brel, Mat(-l_rel.leftCols(m1).transpose()));
    skew_place(by2, brel, Mat(-l_rel.rightCols(m2).transpose()));

    Mat r = Mat::Zero(ell, ell);
    auto sym_place = [&](Index r0, Index c0, const Mat& blk) {
        r.block(r0, c0, blk.rows(), blk.cols()) = blk;
        r.block(c0, r0, blk.cols(), blk.rows()) = blk.transpose();
    };
    r.block(be1, be1, l1, l1) = a.R;
    r.block(be2, be2, l2, l2) = b.R;
    r.block(bu1, bu1, m1, m1) = a.S;
    r.block(bu2, bu2, m2, m2) = b.S;
    sym_place(be1, bu1, a.P);
    sym_place(be2, bu2, b.P);

    Mat g = Mat::Zero(ell, mt);
    g.block(by1, 0, m1, m1) = Mat::Identity(m1, m1);
    g.block(by2, m1, m2, m2) = Mat::Identity(m2, m2);

    return LtiPhDae::general(e, j, r, q, g, Mat::Zero(ell, mt), Mat::Zero(mt, mt),
                             Mat::Zero(mt, mt));
}

LtiPhDae couple_reduced(const LtiPhDae& a, const LtiPhDae& b, const Mat& m_rel,
                        const Mat& l_rel, double tol) {
    const Index mt = a.m() + b.m();
    if (m_rel.rows() != mt || m_rel.cols() != mt || l_rel.rows() != mt || l_rel.cols() != mt)
        throw InvalidInput("couple_reduced: M, L must be (m1+m2) square");
    Mat f;
    try {
        f = -kernels::solve_dense(m_rel, l_rel);
    } catch (const NumericalError&) {
        throw InvalidInput(
            "couple_reduced: the relation does not resolve to u = F y (M singular); use "
            "couple_general and reduce the extended system instead");
    }
    return couple_feedback(a, b, f, tol);
}

}  // namespace phdae::interconnect
