#include "phdae/analysis.hpp"

#include "phdae/kernels.hpp"
#include "phdae/transform.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace phdae::analysis {

namespace {

Index complex_rank(const CMat& a, double tol) {
    Eigen::JacobiSVD<CMat> svd(a);
    const Vec sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol * sv(0)) ++r;
    return r;
}

}  // namespace

std::string to_string(StabilityVerdict v) {
    switch (v) {
        case StabilityVerdict::asymptotically_stable: return "asymptotically_stable";
        case StabilityVerdict::stable: return "stable";
        case StabilityVerdict::unstable: return "unstable";
        case StabilityVerdict::not_applicable: return "not_applicable";
    }
    return "?";
}

StabilityReport stability_spectrum(const Mat& e, const Mat& j, const Mat& r, double tol) {
    StabilityReport rep;
    const auto dec = transform::staircase_dhdae(e, j, r);
    if (!dec.regular || dec.kronecker_index > 1) {
        rep.verdict = StabilityVerdict::not_applicable;
        rep.reason = !dec.regular ? "pencil singular" : "Kronecker index 2";
        return rep;
    }

    const auto ode = transform::reduce_to_ode(dec);
    const Index nd = ode.E.rows();
    CVec evs;
    if (nd > 0) {
        const Mat sys = kernels::solve_dense(ode.E, ode.J - ode.R);
        evs = kernels::eig_small(sys);
    } else {
        evs = CVec(0);
    }
    CVec finite(nd + ode.steady_dim);
    finite.head(nd) = evs;
    for (Index i = 0; i < ode.steady_dim; ++i) finite(nd + i) = 0.0;
    rep.finite_eigenvalues = finite;

    double max_re = finite.size() ? -std::numeric_limits<double>::infinity() : 0.0;
    double scale = 1.0;
    for (Index i = 0; i < finite.size(); ++i) {
        max_re = std::max(max_re, finite(i).real());
        scale = std::max(scale, std::abs(finite(i)));
    }
    rep.max_real_part = finite.size() ? max_re : 0.0;

    // Semisimplicity of imaginary-axis eigenvalues: cluster (1e-7
    // absolute), then compare the cluster size against the kernel
    // dimension of the pencil at the cluster center.
    const Mat a = j - r;
    const double axis_tol = tol * scale;
    std::vector<std::complex<double>> centers;
    std::vector<Index> alg_mult;
    for (Index i = 0; i < finite.size(); ++i) {
        const auto lam = finite(i);
        if (std::abs(lam.real()) > axis_tol) continue;
        bool found = false;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (std::abs(lam - centers[c]) <= 1e-7) {
                ++alg_mult[c];
                found = true;
                break;
            }
        }
        if (!found) {
            centers.push_back({0.0, lam.imag()});
            alg_mult.push_back(1);
        }
    }
    rep.imaginary_axis_semisimple = true;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const CMat pencil = centers[c] * e.cast<std::complex<double>>() -
                            a.cast<std::complex<double>>();
        const Index geo = e.rows() - complex_rank(pencil, 1e-10);
        if (geo < alg_mult[c]) {
            rep.imaginary_axis_semisimple = false;
            break;
        }
    }

    if (finite.size() == 0) {
        rep.verdict = StabilityVerdict::asymptotically_stable;  // purely algebraic
        rep.reason = "no finite dynamics";
    } else if (rep.max_real_part < -axis_tol) {
        rep.verdict = StabilityVerdict::asymptotically_stable;
    } else if (rep.max_real_part <= axis_tol && rep.imaginary_axis_semisimple) {
        rep.verdict = StabilityVerdict::stable;
    } else {
        rep.verdict = StabilityVerdict::unstable;
    }
    return rep;
}

namespace {

struct HypoChecks {
    Index kalman = -1;
    Index tm = -1;
    bool eigvec_finite = false;
};

Index kalman_index(const Mat& j, const Mat& r, double tol) {
    const Index n = j.rows();
    Mat block = r;
    Mat power = r;
    for (Index m = 0; m <= n; ++m) {
        if (m > 0) {
            power = j * power;
            Mat grown(n, block.cols() + n);
            grown << block, power;
            block = grown;
        }
        if (kernels::rank_of(block, tol) == n) return m;
    }
    return -1;
}

Index tm_index(const Mat& j, const Mat& r, double tol) {
    // T_m = sum J^j R (J^T)^j = K_m K_m^T for K_m = [L, JL, ..., J^m L]
    // with any factor R = L L^T. Definiteness of the Gram matrix is
    // decided through the factor's singular values: squaring T_m's
    // eigenvalues would push genuinely positive ones below the double-
    // precision floor.
    const Index n = j.rows();
    const auto eig = kernels::sym_eig(r, 1.0);
    const double lmax = std::max(eig.eigenvalues(n - 1), 0.0);
    Index rank = 0;
    for (Index i = 0; i < n; ++i)
        if (eig.eigenvalues(i) > 1e-12 * std::max(lmax, 1.0)) ++rank;
    if (rank == 0) return -1;
    Mat l(n, rank);
    for (Index i = 0; i < rank; ++i)
        l.col(i) = eig.eigenvectors.col(n - 1 - i) * std::sqrt(eig.eigenvalues(n - 1 - i));

    Mat block = l;
    Mat power = l;
    for (Index m = 0; m <= n; ++m) {
        if (m > 0) {
            power = j * power;
            Mat grown(n, block.cols() + rank);
            grown << block, power;
            block = grown;
        }
        const auto d = kernels::svd_full_rank(block, tol);
        if (d.rank == n) return m;
    }
    return -1;
}

bool eigvec_condition(const Mat& j, const Mat& r, double tol) {
    const Index n = j.rows();
    const CVec evs = kernels::eig_small(j);
    // dedupe eigenvalues (conjugates checked anyway; harmless)
    std::vector<std::complex<double>> seen;
    for (Index i = 0; i < evs.size(); ++i) {
        bool dup = false;
        for (const auto& s : seen)
            if (std::abs(s - evs(i)) <= 1e-9 * std::max(1.0, std::abs(s))) dup = true;
        if (dup) continue;
        seen.push_back(evs(i));
        CMat stacked(n, n + r.cols());
        stacked << evs(i) * CMat::Identity(n, n) - j.cast<std::complex<double>>(),
            r.cast<std::complex<double>>();
        if (complex_rank(stacked, tol) < n) return false;
    }
    return true;
}

}  // namespace

HypocoercivityResult hypocoercivity_index(const Mat& j, const Mat& r, HypocoercivityMode mode,
                                          double tol) {
    require_square(j, "J");
    require_square(r, "R");
    if (j.rows() != r.rows()) throw InvalidInput("hypocoercivity_index: size mismatch");
    if (skew_defect(j) > 1e-8 * norm_or_one(j))
        throw InvalidInput("hypocoercivity_index: J not skew-symmetric");
    if (sym_defect(r) > 1e-8 * norm_or_one(r))
        throw InvalidInput("hypocoercivity_index: R not symmetric");
    if (tol <= 0.0) tol = 1e-10;

    HypocoercivityResult out;
    out.witness = mode;
    switch (mode) {
        case HypocoercivityMode::kalman_rank: {
            out.index = kalman_index(j, r, tol);
            out.finite = out.index >= 0;
            break;
        }
        case HypocoercivityMode::tm_definiteness: {
            out.index = tm_index(j, r, tol);
            out.finite = out.index >= 0;
            break;
        }
        case HypocoercivityMode::eigenvector_rank: {
            out.finite = eigvec_condition(j, r, tol);
            out.index = -1;  // the condition certifies finiteness only
            break;
        }
        case HypocoercivityMode::cross_check: {
            const Index mk = kalman_index(j, r, tol);
            const Index mt = tm_index(j, r, tol);
            out.index = mk;
            out.finite = mk >= 0;
            out.cross_checks_agree = (mk == mt);
            break;
        }
    }
    return out;
}

StabilityVerdict asymptotic_stability_dae(const Mat& e, const Mat& j, const Mat& r, double tol) {
    const auto dec = transform::staircase_dhdae(e, j, r);
    if (!dec.regular || dec.kronecker_index > 1) return StabilityVerdict::not_applicable;
    const auto ode = transform::reduce_to_ode(dec);
    if (ode.steady_dim > 0) return StabilityVerdict::stable;  // conserved mode: not asymptotic
    if (ode.E.rows() == 0) return StabilityVerdict::asymptotically_stable;

    // symmetrize with E^{-1/2} so the pair stays (skew, PSD)
    const auto eig = kernels::sym_eig(ode.E);
    Vec isq = eig.eigenvalues.array().sqrt().inverse().matrix();
    const Mat einv_half = eig.eigenvectors * isq.asDiagonal() * eig.eigenvectors.transpose();
    const Mat js = skew_part(einv_half * ode.J * einv_half);
    const Mat rs = sym_part(einv_half * ode.R * einv_half);
    const auto hypo = hypocoercivity_index(js, rs, HypocoercivityMode::kalman_rank, tol);
    return hypo.finite ? StabilityVerdict::asymptotically_stable : StabilityVerdict::stable;
}

RankConditionReport rank_conditions(const Mat& e, const Mat& a, const Mat& b, const Mat& c,
                                    double tol) {
    require_square(e, "E");
    require_square(a, "A");
    const Index n = e.rows();
    if (a.rows() != n || b.rows() != n || c.cols() != n)
        throw InvalidInput("rank_conditions: dimension mismatch");
    if (tol <= 0.0) tol = kernels::default_rank_tol(e);

    RankConditionReport rep;

    // impulse conditions from SVD kernel bases
    const Mat s_inf = kernels::kernel_basis(e, tol);
    {
        Mat stacked(n, e.cols() + s_inf.cols() + b.cols());
        stacked << e, a * s_inf, b;
        rep.c2 = kernels::rank_of(stacked, tol) == n;
    }
    const Mat t_inf = kernels::kernel_basis(Mat(e.transpose()), tol);
    {
        Mat stacked(n, n + t_inf.cols() + c.rows());
        stacked << e.transpose(), a.transpose() * t_inf, c.transpose();
        rep.o2 = kernels::rank_of(stacked, tol) == n;
    }

    // Hautus conditions at the finite pencil eigenvalues (rank can only
    // drop there for constant matrices).
    Eigen::GeneralizedEigenSolver<Mat> ges(a, e, false);
    std::vector<std::complex<double>> finite;
    const auto alphas = ges.alphas();
    const auto betas = ges.betas();
    const double scale = std::max(a.norm(), e.norm());
    for (Index i = 0; i < alphas.size(); ++i) {
        if (std::abs(betas(i)) > 1e-10 * std::max(1.0, std::abs(alphas(i)) / scale))
            finite.push_back(alphas(i) / betas(i));
    }

    rep.c1 = rep.o1 = rep.c1_unstable_part = rep.o1_unstable_part = true;
    for (const auto& lam : finite) {
        CMat pc(n, n + b.cols());
        pc << lam * e.cast<std::complex<double>>() - a.cast<std::complex<double>>(),
            b.cast<std::complex<double>>();
        const bool ok_c = complex_rank(pc, 1e-10) == n;
        CMat po(n, n + c.rows());
        po << std::conj(lam) * e.transpose().cast<std::complex<double>>() -
                 a.transpose().cast<std::complex<double>>(),
            c.transpose().cast<std::complex<double>>();
        const bool ok_o = complex_rank(po, 1e-10) == n;
        rep.c1 = rep.c1 && ok_c;
        rep.o1 = rep.o1 && ok_o;
        if (lam.real() >= -1e-10) {
            rep.c1_unstable_part = rep.c1_unstable_part && ok_c;
            rep.o1_unstable_part = rep.o1_unstable_part && ok_o;
        }
    }
    rep.strongly_stabilizable = rep.c2 && rep.c1_unstable_part;
    rep.strongly_detectable = rep.o2 && rep.o1_unstable_part;
    return rep;
}

ClosedLoopResult closed_loop(const LtiPhDae& sys, const Mat& f, double tol) {
    if (f.rows() != sys.m() || f.cols() != sys.m())
        throw InvalidInput("closed_loop: feedback must be m x m");
    const Mat fsym = sym_part(f);
    const auto eig = kernels::sym_eig(-f - f.transpose(), 1.0);
    const bool preserved = eig.eigenvalues.size() == 0 ||
                           eig.eigenvalues(0) >= -tol * norm_or_one(f);

    ClosedLoopResult out;
    out.ph_preserved = preserved;
    if (sys.is_standard_form()) {
        out.closed = LtiPhDae::standard(sys.E, sys.J + sys.G * skew_part(f) * sys.G.transpose(),
                                        sys.R - sys.G * fsym * sys.G.transpose(), sys.G);
        out.behavior_form = false;
        return out;
    }

    // Behavior form with state (z, u, y); the closed loop is a dHDAE (no
    // remaining ports).
    const Index n = sys.n(), ell = sys.ell(), m = sys.m();
    Mat ee = Mat::Zero(ell + 2 * m, n + 2 * m);
    ee.topLeftCorner(ell, n) = sys.E;
    Mat qq = Mat::Zero(ell + 2 * m, n + 2 * m);
    qq.topLeftCorner(ell, n) = sys.Q;
    qq.block(ell, n, m, m) = Mat::Identity(m, m);
    qq.block(ell + m, n + m, m, m) = Mat::Identity(m, m);
    Mat jj = Mat::Zero(ell + 2 * m, ell + 2 * m);
    jj.topLeftCorner(ell, ell) = sys.J;
    jj.block(0, ell, ell, m) = sys.G;
    jj.block(ell, 0, m, ell) = -sys.G.transpose();
    jj.block(ell, ell, m, m) = sys.N;
    jj.block(ell, ell + m, m, m) = Mat::Identity(m, m);
    jj.block(ell + m, ell, m, m) = -Mat::Identity(m, m);
    jj.block(ell + m, ell + m, m, m) = skew_part(f);
    Mat rr = Mat::Zero(ell + 2 * m, ell + 2 * m);
    rr.topLeftCorner(ell, ell) = sys.R;
    rr.block(0, ell, ell, m) = sys.P;
    rr.block(ell, 0, m, ell) = sys.P.transpose();
    rr.block(ell, ell, m, m) = sys.S;
    rr.block(ell + m, ell + m, m, m) = -fsym;
    out.closed = LtiPhDae::general(ee, jj, rr, qq, Mat::Zero(ell + 2 * m, 0),
                                   Mat::Zero(ell + 2 * m, 0), Mat(0, 0), Mat(0, 0));
    out.behavior_form = true;
    return out;
}

OptimalityPencil energy_optimality_pencil(const LtiPhDae& sys, const Mat& m_weight,
                                          double tol) {
    if (!sys.is_standard_form())
        throw InvalidInput("energy_optimality_pencil: requires Q = I, P = 0, no feedthrough");
    if (tol <= 0.0) tol = kernels::default_rank_tol(sys.E);
    const Index n = sys.n(), m = sys.m();
    if (m_weight.rows() != n || m_weight.cols() != n)
        throw InvalidInput("energy_optimality_pencil: terminal weight must be n x n");

    const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R, tol);
    if (!dec.regular || dec.kronecker_index > 1)
        throw InvalidInput("energy_optimality_pencil: pencil must be regular of index <= 1");

    // Full-rank split of E; the terminal weight must live on the range.
    const auto eig = kernels::sym_eig(sym_part(sys.E));
    Index rank_e = 0;
    const double lmax = eig.eigenvalues(n - 1);
    for (Index i = 0; i < n; ++i)
        if (eig.eigenvalues(i) > tol * std::max(lmax, 0.0)) ++rank_e;
    Mat ue(n, n);
    for (Index i = 0; i < n; ++i) ue.col(i) = eig.eigenvectors.col(n - 1 - i);
    const Index n2 = n - rank_e;
    const Mat mt = ue.transpose() * sym_part(m_weight) * ue;
    if (n2 > 0) {
        const double m_off = mt.bottomRows(n2).norm();
        if (m_off > 1e-8 * norm_or_one(m_weight))
            throw InvalidInput(
                "energy_optimality_pencil: terminal weight range not contained in range(E)");
    }

    OptimalityPencil out;
    out.dynamic_dim = rank_e;
    const Mat a = sys.J - sys.R;
    out.E_pencil = Mat::Zero(2 * n + m, 2 * n + m);
    out.E_pencil.block(0, n, n, n) = sys.E;
    out.E_pencil.block(n, 0, n, n) = -sys.E.transpose();
    out.A_pencil = Mat::Zero(2 * n + m, 2 * n + m);
    out.A_pencil.block(0, n, n, n) = a;
    out.A_pencil.block(0, 2 * n, n, m) = sys.G;
    out.A_pencil.block(n, 0, n, n) = a.transpose();
    out.A_pencil.block(n, 2 * n, n, m) = sys.G;
    out.A_pencil.block(2 * n, 0, m, n) = sys.G.transpose();
    out.A_pencil.block(2 * n, n, m, n) = sys.G.transpose();

    const Mat lt = ue.transpose() * a * ue;
    const Mat l22 = lt.bottomRightCorner(n2, n2);
    const Mat gt = ue.transpose() * sys.G;
    const Mat g2 = gt.bottomRows(n2);

    out.W_u = Mat::Zero(2 * n2 + m, 2 * n2 + m);
    out.W_u.block(0, n2, n2, n2) = l22;
    out.W_u.block(0, 2 * n2, n2, m) = g2;
    out.W_u.block(n2, 0, n2, n2) = l22.transpose();
    out.W_u.block(n2, 2 * n2, n2, m) = g2;
    out.W_u.block(2 * n2, 0, m, n2) = g2.transpose();
    out.W_u.block(2 * n2, n2, m, n2) = g2.transpose();

    Mat us = Mat::Zero(2 * n2 + m, 2 * n2 + m);
    const double isq2 = 1.0 / std::sqrt(2.0);
    us.block(0, 0, n2, n2) = isq2 * Mat::Identity(n2, n2);
    us.block(0, n2, n2, n2) = -isq2 * Mat::Identity(n2, n2);
    us.block(n2, 0, n2, n2) = isq2 * Mat::Identity(n2, n2);
    us.block(n2, n2, n2, n2) = isq2 * Mat::Identity(n2, n2);
    us.block(2 * n2, 2 * n2, m, m) = Mat::Identity(m, m);
    out.W_u_rotated = us.transpose() * out.W_u * us;

    out.index_le_one =
        out.W_u.size() == 0 || kernels::rank_of(out.W_u, tol) == out.W_u.rows();
    out.g2_full_column_rank = (n2 == 0) ? false : kernels::rank_of(g2, tol) == m;
    out.singular_control = !out.g2_full_column_rank;
    return out;
}

}  // namespace phdae::analysis
