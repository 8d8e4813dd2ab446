#include "phdae/mor.hpp"

#include "phdae/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <complex>

namespace phdae::mor {

namespace {

using Complex = std::complex<double>;

Mat orthonormal_columns(const Mat& v, double tol = 1e-12) {
    if (v.cols() == 0) return v;
    Eigen::ColPivHouseholderQR<Mat> qr(v);
    qr.setThreshold(tol);
    const Index rank = qr.rank();
    Mat q = qr.householderQ() * Mat::Identity(v.rows(), rank);
    return q;
}

void require_conjugate_closed(const CVec& shifts) {
    for (Index i = 0; i < shifts.size(); ++i) {
        if (std::abs(shifts(i).imag()) < 1e-14) continue;
        bool found = false;
        for (Index j = 0; j < shifts.size(); ++j)
            if (std::abs(shifts(j) - std::conj(shifts(i))) <=
                1e-10 * std::max(1.0, std::abs(shifts(i))))
                found = true;
        if (!found)
            throw InvalidInput("interpolation shifts must be closed under conjugation");
    }
}

/// Shifted solve (sigma E - A)^{-1} rhs on the assembled semi-explicit
/// matrices, real or complex depending on sigma.
CMat shifted_solve(const Mat& e, const Mat& a, const Mat& rhs, Complex sigma) {
    if (std::abs(sigma.imag()) < 1e-14) {
        const Mat m = sigma.real() * e - a;
        return kernels::solve_dense(m, rhs).cast<Complex>();
    }
    const CMat m = sigma * e.cast<Complex>() - a.cast<Complex>();
    return kernels::solve_dense_complex(m, rhs.cast<Complex>());
}

ReducedModel assemble_projection_rom(const SemiExplicitParts& semi, const Mat& v1,
                                     std::string method) {
    const Index r = v1.cols();
    const Index n2 = semi.n2;
    const Index m = semi.m();
    Mat e = Mat::Zero(r + n2, r + n2);
    e.topLeftCorner(r, r) = sym_part(v1.transpose() * semi.E11 * v1);
    Mat j(r + n2, r + n2);
    const Mat j12 = v1.transpose() * semi.J12;
    j << skew_part(v1.transpose() * semi.J11 * v1), j12, -j12.transpose(), semi.J22;
    Mat rr(r + n2, r + n2);
    const Mat r12 = v1.transpose() * semi.R12;
    rr << sym_part(v1.transpose() * semi.R11 * v1), r12, r12.transpose(), semi.R22;
    Mat g(r + n2, m);
    g << v1.transpose() * semi.G1, semi.G2;

    ReducedModel out;
    out.rom = LtiPhDae::standard(e, j, rr, g);
    out.projector = v1;
    out.method = std::move(method);
    out.validation = validate_structure(out.rom);
    return out;
}

}  // namespace

CMat transfer_eval(const LtiPhDae& sys, Complex s) {
    const CMat pencil =
        s * sys.E.cast<Complex>() - (sys.state_matrix()).cast<Complex>();
    const CMat x = kernels::solve_dense_complex(pencil, (sys.G - sys.P).cast<Complex>());
    return ((sys.G + sys.P).transpose() * sys.Q).cast<Complex>() * x +
           (sys.S - sys.N).cast<Complex>();
}

std::vector<CMat> moments(const LtiPhDae& sys, Complex sigma0, Index k) {
    if (!sys.is_standard_form())
        throw InvalidInput("moments: requires Q = I, P = 0, no feedthrough");
    std::vector<CMat> out;
    if (k <= 0) return out;
    const Mat a = sys.J - sys.R;
    const bool real_shift = std::abs(sigma0.imag()) < 1e-14;
    if (real_shift) {
        const Mat m = sigma0.real() * sys.E - a;
        Eigen::PartialPivLU<Mat> lu(m);
        if (!(lu.rcond() > 10.0 * kEps))
            throw NumericalError("moments: shift lies on the pencil spectrum");
        Mat v = lu.solve(sys.G);
        out.push_back((sys.G.transpose() * v).cast<Complex>());
        for (Index i = 1; i < k; ++i) {
            v = lu.solve(Mat(sys.E * v));
            out.push_back((sys.G.transpose() * v).cast<Complex>());
        }
    } else {
        const CMat m = sigma0 * sys.E.cast<Complex>() - a.cast<Complex>();
        Eigen::PartialPivLU<CMat> lu(m);
        if (!(lu.rcond() > 10.0 * kEps))
            throw NumericalError("moments: shift lies on the pencil spectrum");
        CMat v = lu.solve(sys.G.cast<Complex>());
        out.push_back(sys.G.transpose().cast<Complex>() * v);
        for (Index i = 1; i < k; ++i) {
            v = lu.solve(CMat(sys.E.cast<Complex>() * v));
            out.push_back(sys.G.transpose().cast<Complex>() * v);
        }
    }
    return out;
}

ReducedModel mm_rom(const SemiExplicitParts& semi, double sigma0, Index r) {
    const Index n1 = semi.n1, n2 = semi.n2, m = semi.m();
    if (r < 1 || r > n1) throw InvalidInput("mm_rom: need 1 <= r <= n1");

    Mat krylov(n1 + n2, 0);
    if (std::isinf(sigma0)) {
        // Markov-parameter space on the Schur-reduced dynamic part.
        Mat a11 = semi.J11 - semi.R11;
        Mat g1 = semi.G1;
        if (n2 > 0) {
            const Mat a22 = semi.J22 - semi.R22;
            const Mat a12 = semi.J12 - semi.R12;
            const Mat a21 = -(semi.J12 + semi.R12).transpose();
            const Mat x = kernels::solve_dense(a22, Mat(a21));
            const Mat xg = kernels::solve_dense(a22, Mat(semi.G2));
            a11 -= a12 * x;
            g1 -= a12 * xg;
        }
        Eigen::PartialPivLU<Mat> lu_e(semi.E11);
        Mat v = lu_e.solve(g1);
        Mat cols(n1, 0);
        while (cols.cols() < r) {
            Mat grown(n1, cols.cols() + v.cols());
            grown << cols, v;
            cols = grown;
            v = lu_e.solve(Mat(a11 * v));
        }
        krylov = Mat::Zero(n1 + n2, cols.cols());
        krylov.topRows(n1) = cols;
    } else {
        const Mat e = semi.e_full();
        const Mat a = semi.a_full();
        const Mat m_shift = sigma0 * e - a;
        Eigen::PartialPivLU<Mat> lu(m_shift);
        if (!(lu.rcond() > 10.0 * kEps))
            throw NumericalError("mm_rom: shift lies on the pencil spectrum");
        Mat v = lu.solve(semi.g_full());
        Mat cols(n1 + n2, 0);
        while (cols.cols() < r) {
            Mat grown(n1 + n2, cols.cols() + v.cols());
            grown << cols, v;
            cols = grown;
            v = lu.solve(Mat(e * v));
        }
        krylov = cols;
    }

    const Mat vfull = orthonormal_columns(krylov.leftCols(std::min<Index>(r * m, krylov.cols())));
    Mat v1 = orthonormal_columns(vfull.topRows(n1));
    if (v1.cols() > r) v1 = v1.leftCols(r);
    if (v1.cols() == 0) throw NumericalError("mm_rom: Krylov space collapsed (deflation)");

    ReducedModel out = assemble_projection_rom(semi, v1, "mm");
    out.sigma0 = sigma0;
    out.matched_moments = r;

    // re-verify the moment match, relative to the largest moment (single
    // moments can vanish exactly, e.g. a zero DC gain)
    if (!std::isinf(sigma0)) {
        const auto mom_full = moments(semi.as_system(), sigma0, r);
        const auto mom_rom = moments(out.rom, sigma0, r);
        double scale = 0.0;
        for (Index i = 0; i < r; ++i)
            scale = std::max(scale, mom_full[static_cast<std::size_t>(i)].norm());
        scale = std::max(scale, 1e-300);
        double worst = 0.0;
        for (Index i = 0; i < r; ++i)
            worst = std::max(worst, (mom_full[static_cast<std::size_t>(i)] -
                                     mom_rom[static_cast<std::size_t>(i)])
                                            .norm() /
                                        scale);
        out.max_interp_residual = worst;
    }
    return out;
}

ReducedModel ecrm(const SemiExplicitParts& semi, const Mat& v1) {
    if (v1.rows() != semi.n1) throw InvalidInput("ecrm: V1 must have n1 rows");
    if ((v1.transpose() * v1 - Mat::Identity(v1.cols(), v1.cols())).norm() >
        1e-8 * std::sqrt(double(v1.cols())))
        throw InvalidInput("ecrm: V1 must have orthonormal columns");
    return assemble_projection_rom(semi, v1, "ecrm");
}

ReducedModel fcrm(const SemiExplicitParts& semi, const Mat& v1_keep) {
    if (!semi.e11_is_identity)
        throw InvalidInput("fcrm: requires the normalized split (E11 = I)");
    if (v1_keep.rows() != semi.n1) throw InvalidInput("fcrm: V1 must have n1 rows");
    const Index r = v1_keep.cols();
    const Index nt = semi.n1 - r;
    const Index n2 = semi.n2, m = semi.m();
    if (nt == 0) {
        ReducedModel out = assemble_projection_rom(semi, v1_keep, "fcrm");
        out.method = "fcrm";
        return out;
    }
    if (nt % 2 != 0)
        throw NumericalError(
            "fcrm: discarded block has odd dimension; its skew coupling is singular");

    // complement basis of the kept columns
    Eigen::HouseholderQR<Mat> qr(v1_keep);
    const Mat qfull = qr.householderQ();
    const Mat vh = v1_keep;
    const Mat vt = qfull.rightCols(nt);

    const Mat jtilde = skew_part(vt.transpose() * semi.J11 * vt);
    {
        const auto d = kernels::svd_full_rank(jtilde, -1.0, semi.J11.norm());
        if (d.rank < nt)
            throw NumericalError("fcrm: discarded-block skew coupling is singular");
    }
    Eigen::PartialPivLU<Mat> xlu(jtilde);

    // low-rank factorization of the full dissipation block
    const Mat rfull = semi.r_full();
    const auto eig = kernels::sym_eig(rfull);
    const Index n = semi.n();
    Index lr = 0;
    const double lmax = eig.eigenvalues(n - 1);
    for (Index i = 0; i < n; ++i)
        if (eig.eigenvalues(i) > 1e-12 * std::max(lmax, 1.0)) ++lr;
    Mat z(n, lr);
    Mat r1 = Mat::Zero(lr, lr);
    for (Index i = 0; i < lr; ++i) {
        z.col(i) = eig.eigenvectors.col(n - 1 - i);
        r1(i, i) = eig.eigenvalues(n - 1 - i);
    }
    const Mat z1 = z.topRows(semi.n1);
    const Mat z2 = z.bottomRows(n2);
    const Mat zh = vh.transpose() * z1;
    const Mat zt = vt.transpose() * z1;

    const Mat j_ht = vh.transpose() * semi.J11 * vt;  // kept x discarded
    const Mat j_th = vt.transpose() * semi.J11 * vh;
    const Mat jh11 = skew_part(vh.transpose() * semi.J11 * vh);
    const Mat jh12 = vh.transpose() * semi.J12;
    const Mat jt12 = vt.transpose() * semi.J12;
    const Mat gh = vh.transpose() * semi.G1;
    const Mat gt = vt.transpose() * semi.G1;

    auto xs = [&](const Mat& rhs) { return Mat(xlu.solve(rhs)); };

    // eliminate the discarded effort, then close the dissipation port
    Mat jp(r + n2, r + n2);
    jp << jh11 - j_ht * xs(j_th), jh12 - j_ht * xs(jt12),
        -jh12.transpose() + jt12.transpose() * xs(j_th), semi.J22 + jt12.transpose() * xs(jt12);
    Mat zp(r + n2, lr);
    zp << zh - j_ht * xs(zt), z2 + jt12.transpose() * xs(zt);
    Mat gp(r + n2, m);
    gp << gh - j_ht * xs(gt), semi.G2 + jt12.transpose() * xs(gt);

    // y = C_z e + C_d f_d + D_u u and e_d = E_z e + E_d f_d + E_u u after
    // eliminating the discarded effort (solve the second block row for it)
    Mat c_z(m, r + n2);
    c_z << gh.transpose() - gt.transpose() * xs(j_th),
        semi.G2.transpose() - gt.transpose() * xs(jt12);
    const Mat c_d = -gt.transpose() * xs(zt);
    const Mat d_u = -gt.transpose() * xs(gt);

    Mat e_z(lr, r + n2);
    e_z << zh.transpose() - zt.transpose() * xs(j_th),
        z2.transpose() - zt.transpose() * xs(jt12);
    const Mat e_d = -zt.transpose() * xs(zt);
    const Mat e_u = -zt.transpose() * xs(gt);

    // close the dissipation port f_d = -R1 e_d
    const Mat closing = Mat::Identity(lr, lr) + r1 * e_d;
    const Mat f_z = -kernels::solve_dense(closing, Mat(r1 * e_z));
    const Mat f_u = -kernels::solve_dense(closing, Mat(r1 * e_u));

    const Mat a_rom = jp + zp * f_z;
    const Mat b_rom = gp + zp * f_u;
    const Mat c_rom = c_z + c_d * f_z;
    const Mat d_rom = d_u + c_d * f_u;

    Mat e_rom = Mat::Zero(r + n2, r + n2);
    e_rom.topLeftCorner(r, r) = Mat::Identity(r, r);

    ReducedModel out;
    out.rom = LtiPhDae::general(e_rom, skew_part(a_rom), sym_part(-a_rom),
                                Mat::Identity(r + n2, r + n2),
                                0.5 * (c_rom.transpose() + b_rom),
                                0.5 * (c_rom.transpose() - b_rom), sym_part(d_rom),
                                -skew_part(d_rom));
    out.method = "fcrm";
    out.projector = v1_keep;
    out.validation = validate_structure(out.rom);
    return out;
}

BalancingResult balancing_projector(const SemiExplicitParts& semi, Index r) {
    if (!semi.e11_is_identity)
        throw InvalidInput("balancing_projector: requires the normalized split (E11 = I)");
    const Mat a11 = semi.J11 - semi.R11;
    if (kernels::spectral_abscissa(a11) >= 0.0)
        throw InvalidInput("balancing_projector: the dynamic block is not asymptotically stable");

    const Mat gram_p = kernels::lyapunov(a11, semi.G1 * semi.G1.transpose());
    const Mat gram_o = kernels::lyapunov(Mat(a11.transpose()), semi.G1 * semi.G1.transpose());

    auto psd_factor = [](const Mat& x) {
        const auto eig = kernels::sym_eig(x, 1.0);
        const Index n = x.rows();
        const double lmax = std::max(eig.eigenvalues(n - 1), 0.0);
        Index rank = 0;
        for (Index i = 0; i < n; ++i)
            if (eig.eigenvalues(i) > 1e-14 * std::max(lmax, 1.0)) ++rank;
        Mat f(n, rank);
        for (Index i = 0; i < rank; ++i)
            f.col(i) = eig.eigenvectors.col(n - 1 - i) * std::sqrt(eig.eigenvalues(n - 1 - i));
        return f;
    };
    const Mat pfac = psd_factor(gram_p);
    const Mat ofac = psd_factor(gram_o);

    Eigen::BDCSVD<Mat> svd(Mat(pfac.transpose() * ofac), Eigen::ComputeFullU);
    const Vec hankel = svd.singularValues();
    Index rank = 0;
    for (Index i = 0; i < hankel.size(); ++i)
        if (hankel(i) > 1e-14 * std::max(hankel(0), 1.0)) ++rank;

    BalancingResult out;
    out.hankel_values = hankel;
    out.truncated_to_rank = r > rank;
    out.reach_gramian = gram_p;
    const Index keep = std::min(r, rank);

    const Mat pu = pfac * svd.matrixU();
    const Mat q = orthonormal_columns(pu);
    out.v1 = q.leftCols(std::min(keep, q.cols()));
    return out;
}

namespace {

/// Real columns spanning the shifted solves, with the per-column entries
/// of the realified ones-vector (needed by the v2 construction).
struct RealifiedBasis {
    Mat v;       // n x r
    Vec ones_r;  // r
};

RealifiedBasis realified_shift_basis(const SemiExplicitParts& semi, const CVec& shifts) {
    require_conjugate_closed(shifts);
    const Mat e = semi.e_full();
    const Mat a = semi.a_full();
    const Mat g = semi.g_full();
    const Index n = semi.n(), m = semi.m();

    std::vector<Vec> cols;
    std::vector<double> ones;
    std::vector<bool> used(static_cast<std::size_t>(shifts.size()), false);
    for (Index i = 0; i < shifts.size(); ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        const Complex s = shifts(i);
        if (std::abs(s.imag()) < 1e-14) {
            const CMat v = shifted_solve(e, a, g, s);
            for (Index c = 0; c < m; ++c) {
                cols.push_back(v.col(c).real());
                ones.push_back(1.0);
            }
            used[static_cast<std::size_t>(i)] = true;
        } else {
            // find the conjugate partner and emit the realified pair
            for (Index j = i + 1; j < shifts.size(); ++j) {
                if (!used[static_cast<std::size_t>(j)] &&
                    std::abs(shifts(j) - std::conj(s)) <=
                        1e-10 * std::max(1.0, std::abs(s))) {
                    used[static_cast<std::size_t>(j)] = true;
                    break;
                }
            }
            used[static_cast<std::size_t>(i)] = true;
            const CMat v = shifted_solve(e, a, g, s);
            const double rt2 = std::sqrt(2.0);
            for (Index c = 0; c < m; ++c) {
                cols.push_back(rt2 * v.col(c).real());
                ones.push_back(rt2);
                cols.push_back(rt2 * v.col(c).imag());
                ones.push_back(0.0);
            }
        }
    }
    RealifiedBasis out;
    out.v.resize(n, static_cast<Index>(cols.size()));
    out.ones_r.resize(static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.v.col(static_cast<Index>(c)) = cols[c];
        out.ones_r(static_cast<Index>(c)) = ones[c];
    }
    return out;
}

double verify_interpolation(const LtiPhDae& full, const LtiPhDae& rom, const CVec& shifts) {
    double worst = 0.0;
    for (Index i = 0; i < shifts.size(); ++i) {
        const CMat gf = transfer_eval(full, shifts(i));
        const CMat gr = transfer_eval(rom, shifts(i));
        worst = std::max(worst, (gf - gr).norm() / std::max(1e-300, gf.norm()));
    }
    return worst;
}

}  // namespace

ReducedModel interp_v1(const SemiExplicitParts& semi, const CVec& shifts) {
    const auto basis = realified_shift_basis(semi, shifts);
    const Mat vfull = orthonormal_columns(basis.v);
    Mat v1 = orthonormal_columns(vfull.topRows(semi.n1));
    if (v1.cols() == 0) throw NumericalError("interp_v1: projection space collapsed");

    ReducedModel out = assemble_projection_rom(semi, v1, "interp_v1");
    out.shifts = shifts;
    out.max_interp_residual = verify_interpolation(semi.as_system(), out.rom, shifts);
    return out;
}

ReducedModel interp_v2(const SemiExplicitParts& semi, const CVec& shifts) {
    if (semi.m() != 1)
        throw InvalidInput("interp_v2: the ones-vector construction is implemented for m = 1");
    const auto basis = realified_shift_basis(semi, shifts);
    const Mat& v = basis.v;
    const Vec& ones_r = basis.ones_r;
    const Index r = v.cols();
    const Index n1 = semi.n1, n2 = semi.n2;

    Mat dhat(1, 1);
    dhat(0, 0) = 0.0;
    if (n2 > 0) {
        const Mat a22 = semi.J22 - semi.R22;
        dhat = -semi.G2.transpose() * kernels::solve_dense(a22, Mat(semi.G2));
    }

    const Mat g = semi.g_full();
    const Mat a = semi.a_full();
    const Mat v1 = v.topRows(n1);

    // ones-vector feedthrough correction: with these signs the vector e_i
    // satisfies (sigma_i Ehat - Ahat) e_i = Bhat, hence Ghat(sigma_i) =
    // Chat e_i + Dhat = G^T v_i = G(sigma_i) exactly, and Ghat(inf) = Dhat.
    const Mat ehat = sym_part(v1.transpose() * semi.E11 * v1);
    const Mat bhat = v.transpose() * g - ones_r * dhat;
    const Mat chat = g.transpose() * v - dhat * ones_r.transpose();
    const Mat ahat = v.transpose() * a * v + ones_r * dhat * ones_r.transpose();

    ReducedModel out;
    out.rom = LtiPhDae::general(ehat, skew_part(ahat), sym_part(-ahat), Mat::Identity(r, r),
                                0.5 * (chat.transpose() + bhat),
                                0.5 * (chat.transpose() - bhat), sym_part(dhat),
                                -skew_part(dhat));
    out.method = "interp_v2";
    out.shifts = shifts;
    out.validation = validate_structure(out.rom);
    // pH certificate: [R P; P^T S] must be PSD
    {
        Mat w(r + 1, r + 1);
        w << out.rom.R, out.rom.P, out.rom.P.transpose(), out.rom.S;
        const auto eig = kernels::sym_eig(sym_part(w), 1.0);
        out.ph_certified = eig.eigenvalues(0) >= -1e-10 * norm_or_one(w);
    }
    out.max_interp_residual = verify_interpolation(semi.as_system(), out.rom, shifts);
    return out;
}

namespace {

CVec rom_poles(const ReducedModel& rom_model, Index r) {
    const auto pr = proper_part(rom_model.rom);
    CVec poles = kernels::eig_small(pr.A);
    if (poles.size() > r) poles.conservativeResize(r);
    return poles;
}

bool shift_compare(const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

}  // namespace

IrkaResult irka(const SemiExplicitParts& semi, Index r, const IrkaConfig& cfg) {
    if (r < 1 || r > semi.n1) throw InvalidInput("irka: need 1 <= r <= n1");

    CVec shifts;
    if (cfg.initial_shifts.size() > 0) {
        if (cfg.initial_shifts.size() != r)
            throw InvalidInput("irka: initial shift count must equal r");
        shifts = cfg.initial_shifts;
    } else {
        shifts.resize(r);
        for (Index i = 0; i < r; ++i) {
            const double t = r == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(r - 1);
            shifts(i) = std::pow(10.0, -2.0 + 4.0 * t);
        }
    }

    IrkaResult out;
    double best_movement = std::numeric_limits<double>::infinity();
    CVec best_shifts = shifts;
    for (Index sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        out.rom = interp_v1(semi, shifts);
        CVec poles = rom_poles(out.rom, r);

        CVec next(poles.size());
        for (Index i = 0; i < poles.size(); ++i) {
            Complex s = -poles(i);
            if (s.real() < 0.0) s = Complex(-s.real(), s.imag());
            if (std::abs(s) < 1e-12) s = Complex(1e-12, s.imag());
            next(i) = s;
        }
        if (next.size() < r) {
            // pole extraction lost dimensions (deflation); pad by reuse
            CVec padded(r);
            for (Index i = 0; i < r; ++i) padded(i) = next(i % next.size());
            next = padded;
        }

        std::vector<Complex> a(shifts.data(), shifts.data() + r);
        std::vector<Complex> b(next.data(), next.data() + r);
        std::sort(a.begin(), a.end(), shift_compare);
        std::sort(b.begin(), b.end(), shift_compare);
        double movement = 0.0;
        for (Index i = 0; i < r; ++i)
            movement = std::max(movement, std::abs(a[static_cast<std::size_t>(i)] -
                                                   b[static_cast<std::size_t>(i)]) /
                                              std::max(1e-12, std::abs(a[static_cast<std::size_t>(i)])));
        out.movement_history.push_back(movement);
        if (movement < best_movement) {
            best_movement = movement;
            best_shifts = shifts;  // the set that produced this ROM
        }
        for (Index i = 0; i < r; ++i) shifts(i) = b[static_cast<std::size_t>(i)];
        if (movement < cfg.shift_tol) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) {
        // fixed point not resolved (often a small limit cycle): hand back
        // the most stationary iterate seen
        shifts = best_shifts;
        out.rom = interp_v1(semi, shifts);
        out.rom.method = "irka";
    }
    out.final_shifts = shifts;
    out.rom.method = "irka";
    return out;
}

namespace {

/// Newton iteration for the positive-real Riccati equation
///   A^T X + X A + (C^T - X B) Rw^{-1} (C - B^T X) = 0,  Rw = eps I,
/// started from the exact certificate X0 (C = B^T X0): the first step is
/// well defined and every closed loop stays Hurwitz, so the iteration
/// walks down to the minimal (stabilizing) solution.
Mat pr_riccati_min(const Mat& a, const Mat& b, const Mat& c, const Mat& x0, double eps) {
    const Index m = b.cols();
    const Mat rw_inv = Mat::Identity(m, m) / eps;
    auto residual = [&](const Mat& x) {
        const Mat defect = c.transpose() - x * b;
        return Mat(a.transpose() * x + x * a + defect * rw_inv * defect.transpose());
    };

    Mat x = sym_part(x0);
    double res = residual(x).norm();
    const double res_scale = std::max(1.0, (c.transpose() * rw_inv * c).norm());
    for (int it = 0; it < 400; ++it) {
        const Mat gain = rw_inv * (c - b.transpose() * x);
        const Mat a_cl = a - b * gain;
        const Mat rhs = c.transpose() * rw_inv * c - x * b * rw_inv * b.transpose() * x;
        Mat x_next;
        try {
            x_next = kernels::lyapunov(Mat(a_cl.transpose()), sym_part(rhs));
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("modified_hamiltonian: Riccati Newton step failed: ") +
                                 e.what());
        }
        const double change = (x_next - x).norm();
        x = sym_part(x_next);
        res = residual(x).norm();
        if (change <= 1e-13 * norm_or_one(x) && res <= 1e-6 * res_scale) break;
    }
    if (res > 1e-5 * res_scale)
        throw NumericalError("modified_hamiltonian: Riccati iteration stalled (residual " +
                             std::to_string(res) + ")");
    return x;
}

/// Newton iteration on the exact Lur'e system
///   F1(X, L) = A^T X + X A + L L^T = 0,   F2(X) = X B - C^T = 0,
/// in the unknowns (vech X, vec L); square when the spectral factor has
/// m columns. Falls back to the initial guess if the polish stalls.
Mat lure_polish(const Mat& a, const Mat& b, const Mat& c, const Mat& x_init, double eps) {
    const Index n = a.rows();
    const Index m = b.cols();
    const Index nx = n * (n + 1) / 2;
    const Index nl = n * m;

    // index map for vech (i <= j)
    std::vector<std::pair<Index, Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(nx));
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i <= j; ++i) pairs.push_back({i, j});

    auto vech = [&](const Mat& s) {
        Vec v(nx);
        for (Index k = 0; k < nx; ++k) v(k) = s(pairs[static_cast<std::size_t>(k)].first,
                                               pairs[static_cast<std::size_t>(k)].second);
        return v;
    };
    auto unvech = [&](const Vec& v) {
        Mat s(n, n);
        for (Index k = 0; k < nx; ++k) {
            const auto [i, j] = pairs[static_cast<std::size_t>(k)];
            s(i, j) = v(k);
            s(j, i) = v(k);
        }
        return s;
    };

    Mat x = sym_part(x_init);
    Mat l = (c.transpose() - x * b) / std::sqrt(eps);

    const double scale = std::max({a.norm() * x.norm(), c.norm(), 1.0});
    double best_res = std::numeric_limits<double>::infinity();
    Mat best_x = x;
    for (int it = 0; it < 12; ++it) {
        const Mat f1 = a.transpose() * x + x * a + l * l.transpose();
        const Mat f2 = x * b - c.transpose();
        const double res = std::sqrt(f1.squaredNorm() + f2.squaredNorm());
        if (res < best_res) {
            best_res = res;
            best_x = x;
        }
        if (res <= 1e-13 * scale) break;

        // Jacobian: rows = vech(F1) then vec(F2); cols = vech(X) then vec(L)
        Mat jac = Mat::Zero(nx + n * m, nx + nl);
        for (Index k = 0; k < nx; ++k) {
            const auto [i, j] = pairs[static_cast<std::size_t>(k)];
            Mat eij = Mat::Zero(n, n);
            eij(i, j) = 1.0;
            eij(j, i) = 1.0;
            const Mat da = a.transpose() * eij + eij * a;
            jac.block(0, k, nx, 1) = vech(da);
            const Mat db = eij * b;
            for (Index r = 0; r < n; ++r)
                for (Index cc = 0; cc < m; ++cc) jac(nx + r * m + cc, k) = db(r, cc);
        }
        for (Index col = 0; col < nl; ++col) {
            const Index r = col / m;
            const Index cc = col % m;
            Mat dl = Mat::Zero(n, n);
            // d/dL of L L^T in direction e_r e_cc^T
            dl.row(r) += l.col(cc).transpose();
            dl.col(r) += l.col(cc);
            jac.block(0, nx + col, nx, 1) = vech(dl);
        }
        Vec rhs(nx + n * m);
        rhs.head(nx) = -vech(f1);
        for (Index r = 0; r < n; ++r)
            for (Index cc = 0; cc < m; ++cc) rhs(nx + r * m + cc) = -f2(r, cc);

        const Vec step = jac.colPivHouseholderQr().solve(rhs);
        x = sym_part(x + unvech(step.head(nx)));
        for (Index col = 0; col < nl; ++col) l(col / m, col % m) += step(nx + col);
    }
    if (best_res > 1e-8 * scale)
        // the polish could not close the gap; the regularized certificate
        // is still valid, just less accurate
        return sym_part(x_init);
    return best_x;
}

}  // namespace

ModifiedHamiltonianResult modified_hamiltonian(const SemiExplicitParts& semi, double eps,
                                               bool polish) {
    const Index n1 = semi.n1;
    if (n1 == 0) throw InvalidInput("modified_hamiltonian: empty dynamic block");
    if (eps <= 0.0) throw InvalidInput("modified_hamiltonian: eps must be positive");

    // co-energy coordinates: w = E11 z1, A = (J11-R11) E11^{-1}, B = G1,
    // C = B^T E11^{-1}; X0 = E11^{-1} is an exact KYP certificate.
    const Mat e11 = semi.e11_is_identity ? Mat(Mat::Identity(n1, n1)) : semi.E11;
    Eigen::LLT<Mat> ellt(sym_part(e11));
    if (ellt.info() != Eigen::Success)
        throw InvalidInput("modified_hamiltonian: E11 must be positive definite");
    const Mat e11_inv = ellt.solve(Mat::Identity(n1, n1));
    const Mat a = (semi.J11 - semi.R11) * e11_inv;
    const Mat b = semi.G1;
    const Mat c = b.transpose() * e11_inv;
    if (kernels::spectral_abscissa(a) >= 0.0)
        throw InvalidInput(
            "modified_hamiltonian: dynamic block not asymptotically stable (run balancing "
            "truncation first)");

    Mat x = pr_riccati_min(a, b, c, e11_inv, eps);
    if (polish) {
        // Polish the regularized solution into an exact Lur'e certificate:
        // Newton on A^T X + X A + L L^T = 0, X B = C^T with the spectral
        // factor L0 = (C^T - X B)/sqrt(eps) from the eps-solve. This
        // removes the O(sqrt(eps)) input-output perturbation entirely and
        // is robust to transmission zeros on the imaginary axis (where a
        // plain eps -> 0 limit is ill-conditioned).
        x = lure_polish(a, b, c, x, eps);
    }

    // minimal solution must be positive definite
    {
        const auto eig = kernels::sym_eig(x, 1.0);
        if (eig.eigenvalues(0) <= 0.0)
            throw NumericalError("modified_hamiltonian: minimal storage certificate not PD");
    }

    Eigen::LLT<Mat> xllt(x);
    const Mat x_inv = xllt.solve(Mat::Identity(n1, n1));
    const Mat mnew = a * x_inv;
    const Mat r11_new = sym_part(-mnew);
    // refuse when the combined dissipation block loses semidefiniteness
    {
        // PSD holds exactly at a Lur'e solution; the slack absorbs the
        // roundoff of an unpolished regularized certificate
        Mat rcomb(n1 + semi.n2, n1 + semi.n2);
        rcomb << r11_new, semi.R12, semi.R12.transpose(), semi.R22;
        const auto eig = kernels::sym_eig(sym_part(rcomb), 1.0);
        if (eig.eigenvalues(0) < -1e-6 * norm_or_one(rcomb))
            throw NumericalError(
                "modified_hamiltonian: reformulated dissipation block not PSD (min eig " +
                std::to_string(eig.eigenvalues(0)) + ")");
    }

    ModifiedHamiltonianResult out;
    out.parts = semi;
    out.parts.E11 = sym_part(x_inv);
    out.parts.e11_is_identity = false;
    out.parts.J11 = skew_part(mnew);
    out.parts.R11 = r11_new;
    out.x11 = x;
    {
        const Mat defect = c.transpose() - x * b;
        out.are_residual =
            (a.transpose() * x + x * a + defect * defect.transpose() / eps).norm();
        out.storage_defect = defect.norm();
    }
    out.epsilon = eps;
    return out;
}

namespace {

/// True when E is exactly [[I, 0], [0, 0]] with a leading identity block
/// of size k (the shape produced by the normalized semi-explicit split).
bool leading_identity_e(const Mat& e, Index* k_out) {
    const Index n = e.rows();
    Index k = 0;
    while (k < n && e(k, k) == 1.0) ++k;
    Mat probe = Mat::Zero(n, n);
    probe.topLeftCorner(k, k).setIdentity();
    if ((e - probe).norm() != 0.0) return false;
    *k_out = k;
    return true;
}

}  // namespace

ProperRealization proper_part(const LtiPhDae& sys, double tol) {
    ProperRealization out;
    if (sys.is_standard_form()) {
        Index k = 0;
        if (sys.ell() == sys.n() && leading_identity_e(sys.E, &k)) {
            // already in normalized semi-explicit coordinates: keep them,
            // so externally supplied Gramians stay consistent
            const Index n2 = sys.n() - k;
            const Mat a11 = (sys.J - sys.R).topLeftCorner(k, k);
            if (n2 == 0) {
                out.A = a11;
                out.B = sys.G;
                out.C = sys.G.transpose();
                out.D = Mat::Zero(sys.m(), sys.m());
                return out;
            }
            const Mat a12 = (sys.J - sys.R).topRightCorner(k, n2);
            const Mat a21 = (sys.J - sys.R).bottomLeftCorner(n2, k);
            const Mat a22 = (sys.J - sys.R).bottomRightCorner(n2, n2);
            const Mat g1 = sys.G.topRows(k);
            const Mat g2 = sys.G.bottomRows(n2);
            const Mat x21 = kernels::solve_dense(a22, a21);
            const Mat xg = kernels::solve_dense(a22, g2);
            out.A = a11 - a12 * x21;
            out.B = g1 - a12 * xg;
            out.C = g1.transpose() - g2.transpose() * x21;
            out.D = -g2.transpose() * xg;
            return out;
        }
        const auto semi = transform::semi_explicit_split(sys, /*normalize=*/false, tol);
        const Mat a11 = semi.J11 - semi.R11;
        if (semi.n2 == 0) {
            Eigen::PartialPivLU<Mat> lu(semi.E11);
            out.A = lu.solve(a11);
            out.B = lu.solve(semi.G1);
            out.C = semi.G1.transpose();
            out.D = Mat::Zero(sys.m(), sys.m());
        } else {
            const Mat a12 = semi.J12 - semi.R12;
            const Mat a21 = -(semi.J12 + semi.R12).transpose();
            const Mat a22 = semi.J22 - semi.R22;
            const Mat x21 = kernels::solve_dense(a22, Mat(a21));
            const Mat xg = kernels::solve_dense(a22, Mat(semi.G2));
            Eigen::PartialPivLU<Mat> lu(semi.E11);
            out.A = lu.solve(Mat(a11 - a12 * x21));
            out.B = lu.solve(Mat(semi.G1 - a12 * xg));
            out.C = semi.G1.transpose() - semi.G2.transpose() * x21;
            out.D = -semi.G2.transpose() * xg;
        }
        return out;
    }
    // general coefficients: require an invertible E
    if (sys.ell() != sys.n())
        throw InvalidInput("proper_part: non-square general systems unsupported");
    Eigen::PartialPivLU<Mat> lu(sys.E);
    if (!(lu.rcond() > 1e3 * kEps))
        throw InvalidInput("proper_part: general-form system needs invertible E");
    out.A = lu.solve(sys.state_matrix());
    out.B = lu.solve(Mat(sys.G - sys.P));
    out.C = (sys.G + sys.P).transpose() * sys.Q;
    out.D = sys.S - sys.N;
    return out;
}

namespace {

/// Sylvester solve A1 X + X A2^T + M = 0 with small A2, through the
/// complex eigendecomposition of A2^T (conjugate pairs deduplicated).
Mat sylvester_small_side(const Mat& a1, const Mat& a2, const Mat& m_rhs) {
    const Index n = a1.rows();
    const Index r = a2.rows();
    Eigen::EigenSolver<Mat> es(a2.transpose());
    if (es.info() != Eigen::Success)
        throw NumericalError("sylvester: eigen decomposition of the small factor failed");
    const CVec lam = es.eigenvalues();
    const CMat w = es.eigenvectors();

    CMat y(n, r);
    std::vector<bool> done(static_cast<std::size_t>(r), false);
    const CMat rhs_w = (-m_rhs).cast<Complex>() * w;
    for (Index j = 0; j < r; ++j) {
        if (done[static_cast<std::size_t>(j)]) continue;
        const CMat pencil = a1.cast<Complex>() + lam(j) * CMat::Identity(n, n);
        y.col(j) = kernels::solve_dense_complex(pencil, CMat(rhs_w.col(j)));
        done[static_cast<std::size_t>(j)] = true;
        if (std::abs(lam(j).imag()) > 1e-14) {
            for (Index k = j + 1; k < r; ++k) {
                if (!done[static_cast<std::size_t>(k)] &&
                    std::abs(lam(k) - std::conj(lam(j))) <=
                        1e-8 * std::max(1.0, std::abs(lam(j))) &&
                    (w.col(k) - w.col(j).conjugate()).norm() <= 1e-8 * w.col(j).norm()) {
                    y.col(k) = y.col(j).conjugate();
                    done[static_cast<std::size_t>(k)] = true;
                    break;
                }
            }
        }
    }
    const CMat x = y * w.inverse();
    return x.real();
}

void require_strictly_proper(const ProperRealization& pr, const char* where) {
    const double scale = std::max({pr.C.norm() * pr.B.norm(), pr.D.norm(), 1.0});
    if (pr.D.norm() > 1e-8 * scale)
        throw InvalidInput(std::string(where) +
                           ": system has a nonzero polynomial part; H2 norm infinite");
}

}  // namespace

H2Cache make_h2_cache(const LtiPhDae& sys) {
    H2Cache cache;
    cache.sys = proper_part(sys);
    require_strictly_proper(cache.sys, "make_h2_cache");
    if (kernels::spectral_abscissa(cache.sys.A) >= 0.0)
        throw InvalidInput("make_h2_cache: proper part unstable");
    cache.gram = kernels::lyapunov(cache.sys.A, cache.sys.B * cache.sys.B.transpose());
    cache.norm = std::sqrt(std::max(0.0, (cache.sys.C * cache.gram * cache.sys.C.transpose()).trace()));
    return cache;
}

H2Cache make_h2_cache(const LtiPhDae& sys, const Mat& gram) {
    H2Cache cache;
    cache.sys = proper_part(sys);
    require_strictly_proper(cache.sys, "make_h2_cache");
    const Mat resid = cache.sys.A * gram + gram * cache.sys.A.transpose() +
                      cache.sys.B * cache.sys.B.transpose();
    if (resid.norm() > 1e-6 * std::max(1.0, gram.norm() * cache.sys.A.norm()))
        throw InvalidInput(
            "make_h2_cache: supplied Gramian does not solve the Lyapunov equation of the "
            "proper part (coordinate mismatch?)");
    cache.gram = gram;
    cache.norm = std::sqrt(std::max(0.0, (cache.sys.C * cache.gram * cache.sys.C.transpose()).trace()));
    return cache;
}

double h2_norm(const LtiPhDae& sys) {
    return make_h2_cache(sys).norm;
}

double h2_error(const H2Cache& cache, const LtiPhDae& rom) {
    const auto pr = proper_part(rom);

    // polynomial parts must agree; compared both algebraically and via
    // large-|s| probes of the realizations
    const double dscale = std::max({cache.norm, pr.D.norm(), cache.sys.D.norm(), 1e-12});
    if ((pr.D - cache.sys.D).norm() > 1e-6 * dscale)
        return std::numeric_limits<double>::infinity();
    for (const double s : {1e8, 1e10}) {
        auto probe = [&](const ProperRealization& p) {
            const CMat pen = Complex(s, 0.0) * CMat::Identity(p.A.rows(), p.A.rows()) -
                             p.A.cast<Complex>();
            return CMat(p.C.cast<Complex>() *
                            kernels::solve_dense_complex(pen, p.B.cast<Complex>()) +
                        p.D.cast<Complex>());
        };
        if ((probe(cache.sys) - probe(pr)).norm() > 1e-4 * dscale)
            return std::numeric_limits<double>::infinity();
    }

    if (kernels::spectral_abscissa(pr.A) >= 0.0)
        throw NumericalError("h2_error: reduced model unstable");

    const Mat p22 = kernels::lyapunov(pr.A, pr.B * pr.B.transpose());
    const Mat p12 = sylvester_small_side(cache.sys.A, pr.A,
                                         cache.sys.B * pr.B.transpose());
    const double t11 = (cache.sys.C * cache.gram * cache.sys.C.transpose()).trace();
    const double t12 = (cache.sys.C * p12 * pr.C.transpose()).trace();
    const double t22 = (pr.C * p22 * pr.C.transpose()).trace();
    return std::sqrt(std::max(0.0, t11 - 2.0 * t12 + t22));
}

double h2_error(const LtiPhDae& sys, const LtiPhDae& rom) {
    return h2_error(make_h2_cache(sys), rom);
}

}  // namespace phdae::mor
