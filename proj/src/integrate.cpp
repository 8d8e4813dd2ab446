#include "phdae/integrate.hpp"

#include "phdae/io.hpp"
#include "phdae/kernels.hpp"
#include "phdae/solve.hpp"
#include "phdae/transform.hpp"

#include <Eigen/QR>

#include <cmath>

namespace phdae::integrate {

namespace {

/// Gauss-Legendre nodes on [0, 1] by Golub-Welsch: eigenvalues of the
/// Jacobi matrix of the Legendre recurrence, shifted from [-1, 1].
Vec gauss_nodes(Index s) {
    Mat jac = Mat::Zero(s, s);
    for (Index k = 1; k < s; ++k) {
        const double b = static_cast<double>(k) /
                         std::sqrt(4.0 * static_cast<double>(k) * static_cast<double>(k) - 1.0);
        jac(k, k - 1) = b;
        jac(k - 1, k) = b;
    }
    const auto eig = kernels::sym_eig(jac);
    Vec nodes(s);
    for (Index i = 0; i < s; ++i) nodes(i) = 0.5 * (eig.eigenvalues(i) + 1.0);
    return nodes;
}

/// Coefficients of the j-th Lagrange polynomial for the given nodes.
Vec lagrange_coeffs(const Vec& nodes, Index j) {
    Vec c = Vec::Zero(nodes.size());
    c(0) = 1.0;
    Index deg = 0;
    for (Index k = 0; k < nodes.size(); ++k) {
        if (k == j) continue;
        // multiply by (t - nodes(k)) / (nodes(j) - nodes(k))
        const double denom = nodes(j) - nodes(k);
        Vec next = Vec::Zero(nodes.size());
        for (Index i = 0; i <= deg; ++i) {
            next(i + 1) += c(i) / denom;
            next(i) -= nodes(k) * c(i) / denom;
        }
        c = next;
        ++deg;
    }
    return c;
}

double poly_integral(const Vec& coeffs, double x) {
    double acc = 0.0;
    double xp = x;
    for (Index i = 0; i < coeffs.size(); ++i) {
        acc += coeffs(i) * xp / static_cast<double>(i + 1);
        xp *= x;
    }
    return acc;
}

}  // namespace

CollocationTableau gauss_tableau(Index s) {
    if (s < 1 || s > 5)
        throw InvalidInput("gauss_tableau: stage count must be in 1..5, got " +
                           std::to_string(s));
    CollocationTableau tab;
    tab.s = s;
    tab.gamma = gauss_nodes(s);
    tab.alpha.resize(s, s);
    tab.beta.resize(s);
    for (Index j = 0; j < s; ++j) {
        const Vec c = lagrange_coeffs(tab.gamma, j);
        tab.beta(j) = poly_integral(c, 1.0);
        for (Index i = 0; i < s; ++i) tab.alpha(i, j) = poly_integral(c, tab.gamma(i));
    }
    return tab;
}

InputFunction zero_input(Index m) {
    return [m](double) { return Vec::Zero(m); };
}

namespace {

/// Factorization of the stage system, reusable across fixed-size steps.
/// For the one-stage method on standard-form systems the matrix is
/// E + tau*alpha*(R - J), so the structured H+S solver applies; larger
/// stage counts and general coefficients go through a dense LU, and
/// non-square consistent systems (extended interconnections) through a
/// least-squares solve with a residual guard.
struct StageSolver {
    Index n = 0, ell = 0, s = 0;
    enum class Kind { structured, dense, least_squares } kind = Kind::dense;
    solve::HsStaircase staircase;
    Eigen::PartialPivLU<Mat> lu;
    Eigen::ColPivHouseholderQR<Mat> qr;
    Mat system;  // kept for the least-squares residual check

    StageSolver(const LtiPhDae& sys, double tau, const CollocationTableau& tab) {
        n = sys.n();
        ell = sys.ell();
        s = tab.s;
        const Mat a = sys.state_matrix();
        Mat big = Mat::Zero(s * ell, s * n);
        for (Index i = 0; i < s; ++i) {
            big.block(i * ell, i * n, ell, n) = sys.E;
            for (Index j = 0; j < s; ++j)
                big.block(i * ell, j * n, ell, n) -= tau * tab.alpha(i, j) * a;
        }
        if (ell != n) {
            kind = Kind::least_squares;
            system = big;
            qr.compute(big);
            return;
        }
        if (s == 1 && sys.is_standard_form()) {
            kind = Kind::structured;
            try {
                staircase = solve::hs_staircase(big);
                return;
            } catch (const InvalidInput&) {
                // roundoff-indefinite symmetric part: fall back to LU
                kind = Kind::dense;
            }
        }
        lu.compute(big);
        if (!(lu.rcond() > 10.0 * kEps))
            throw NumericalError(
                "collocation: singular stage matrix (step size resonates with the pencil)");
    }

    Vec solve(const Vec& rhs) const {
        switch (kind) {
            case Kind::structured: return staircase_solve(staircase, rhs);
            case Kind::dense: return lu.solve(rhs);
            case Kind::least_squares: break;
        }
        const Vec x = qr.solve(rhs);
        const double resid = (system * x - rhs).norm();
        if (resid > 1e-8 * std::max(1.0, rhs.norm()))
            throw NumericalError(
                "collocation: non-square stage system inconsistent (residual " +
                std::to_string(resid) + ")");
        return x;
    }
};

StepResult step_with(const LtiPhDae& sys, const StageSolver& solver, const Vec& z0,
                     const std::vector<Vec>& u_stages, double tau,
                     const CollocationTableau& tab) {
    const Index n = sys.n(), ell = sys.ell(), m = sys.m(), s = tab.s;
    if (static_cast<Index>(u_stages.size()) != s)
        throw InvalidInput("collocation_step: need one input sample per stage");

    const Mat a = sys.state_matrix();
    const Mat bu = sys.G - sys.P;
    Vec rhs(s * ell);
    for (Index i = 0; i < s; ++i) rhs.segment(i * ell, ell) = a * z0 + bu * u_stages[i];

    const Vec dz_all = solver.solve(rhs);

    StepResult out;
    out.stages.z.resize(s);
    out.stages.dz.resize(s);
    out.stages.u = u_stages;
    out.stages.y.resize(s);
    const Mat w_inner = sym_part(sys.dissipation_matrix());
    Vec z_end = z0;
    for (Index i = 0; i < s; ++i) {
        Vec zi = z0;
        for (Index j = 0; j < s; ++j) zi += tau * tab.alpha(i, j) * dz_all.segment(j * n, n);
        out.stages.z[i] = zi;
        out.stages.dz[i] = dz_all.segment(i * n, n);
        out.stages.y[i] =
            (sys.G + sys.P).transpose() * sys.Q * zi + (sys.S - sys.N) * u_stages[i];
        Vec arg(n + m);
        arg << zi, u_stages[i];
        out.stages.dissipation += -tau * tab.beta(i) * arg.dot(w_inner * arg);
        out.stages.supply += tau * tab.beta(i) * out.stages.y[i].dot(u_stages[i]);
        z_end += tau * tab.beta(i) * dz_all.segment(i * n, n);
    }
    out.z_end = z_end;
    return out;
}

}  // namespace

StepResult collocation_step(const LtiPhDae& sys, const Vec& z0,
                            const std::vector<Vec>& u_stages, double tau,
                            const CollocationTableau& tab) {
    if (z0.size() != sys.n()) throw InvalidInput("collocation_step: state dimension mismatch");
    StageSolver solver(sys, tau, tab);
    return step_with(sys, solver, z0, u_stages, tau, tab);
}

Vec consistent_init(const LtiPhDae& sys, const Vec& z_guess, const Vec& u0_in, double tol) {
    if (!sys.is_standard_form())
        throw InvalidInput("consistent_init: requires Q = I, P = 0, no feedthrough");
    if (z_guess.size() != sys.n()) throw InvalidInput("consistent_init: guess dimension mismatch");
    Vec u0 = u0_in.size() ? u0_in : Vec(Vec::Zero(sys.m()));
    if (u0.size() != sys.m()) throw InvalidInput("consistent_init: input dimension mismatch");

    const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
    if (!dec.regular) throw InvalidInput("consistent_init: singular pencil");
    const Index n1 = dec.n1, n2 = dec.n2, n3 = dec.n3;
    const auto off = dec.offsets();

    const Mat gt = dec.Z.transpose() * sys.G;
    const Vec zg = dec.Z.transpose() * z_guess;
    const Mat g1 = gt.middleRows(off[0], n1);
    const Mat g2 = gt.middleRows(off[1], n2);
    const Mat g3 = gt.middleRows(off[2], n3);
    const Mat g4 = gt.middleRows(off[3], dec.n4);

    // Explicit constraints: row 4 pins z1, row 3 couples z3 to z2.
    Vec z1 = Vec::Zero(n1);
    Mat t3 = Mat::Zero(n3, n2);
    Vec c3 = Vec::Zero(n3);
    if (n1 > 0) {
        const Mat j41 = dec.ablock(4, 1);
        z1 = -kernels::solve_dense(j41, Mat(g4 * u0));
    }
    if (n3 > 0) {
        const Mat a33 = dec.ablock(3, 3);
        t3 = -kernels::solve_dense(a33, dec.ablock(3, 2));
        c3 = -kernels::solve_dense(a33, Mat(g3 * u0));
    }

    // Hidden index-2 constraint: row 1 determines z4 through z2' taken
    // from row 2 (u treated as constant, so z1' = 0).
    Mat t4 = Mat::Zero(n1, n2);
    Vec c4 = Vec::Zero(n1);
    if (n1 > 0) {
        const Mat e22 = dec.eblock(2, 2);
        const Mat a_eff = dec.ablock(2, 2) + dec.ablock(2, 3) * t3;
        const Mat dz2_lin = kernels::solve_dense(e22, a_eff);
        const Vec dz2_const =
            kernels::solve_dense(e22, Mat(dec.ablock(2, 1) * z1 + dec.ablock(2, 3) * c3 +
                                          g2 * u0));
        const Mat j14 = dec.ablock(1, 4);
        const Mat lhs_lin = dec.eblock(1, 2) * dz2_lin - dec.ablock(1, 2) -
                            dec.ablock(1, 3) * t3;
        const Vec lhs_const = dec.eblock(1, 2) * dz2_const - dec.ablock(1, 1) * z1 -
                              dec.ablock(1, 3) * c3 - g1 * u0;
        t4 = kernels::solve_dense(j14, lhs_lin);
        c4 = kernels::solve_dense(j14, lhs_const);
    }

    // Least-squares choice of the free z2 minimizing the correction.
    const Vec z2g = zg.segment(off[1], n2);
    const Vec z3g = zg.segment(off[2], n3);
    const Vec z4g = zg.segment(off[3], dec.n4);
    Mat ls(n2 + n3 + n1, n2);
    ls << Mat::Identity(n2, n2), t3, t4;
    Vec rhs(n2 + n3 + n1);
    rhs << z2g, z3g - c3, z4g - c4;
    const Vec z2 = ls.colPivHouseholderQr().solve(rhs);

    Vec zc(sys.n());
    zc << z1, z2, t3 * z2 + c3, t4 * z2 + c4;
    const Vec z0 = dec.Z * zc;

    // Verify the explicit algebraic rows.
    const Mat a_full = sys.J - sys.R;
    const Vec resid_full = a_full * z0 + sys.G * u0;
    const Vec rt = dec.Z.transpose() * resid_full;
    double resid = 0.0;
    if (n3 > 0) resid = std::max(resid, rt.segment(off[2], n3).norm());
    if (n1 > 0) resid = std::max(resid, rt.segment(off[3], dec.n4).norm());
    const double scale = std::max({z0.norm(), u0.norm(), 1.0});
    if (resid > tol * scale * 100.0)
        throw NumericalError("consistent_init: constraint residual " + std::to_string(resid) +
                             " remains after projection");
    return z0;
}

Trajectory simulate(const LtiPhDae& sys, const Vec& z0, const InputFunction& u, double t0,
                    double t_f, double tau, Index stages) {
    if (tau <= 0.0 || t_f <= t0) throw InvalidInput("simulate: need t_f > t0 and tau > 0");
    if (z0.size() != sys.n()) throw InvalidInput("simulate: state dimension mismatch");
    if (sys.ell() == sys.n() && sys.has_identity_q()) {
        // refuse direct index-2 stepping; hidden constraints drift
        if (sym_defect(sys.E) <= 1e-8 * norm_or_one(sys.E)) {
            const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
            if (!dec.regular)
                throw InvalidInput("simulate: singular pencil");
            if (dec.kronecker_index > 1)
                throw InvalidInput(
                    "simulate: Kronecker index 2; apply reduce_to_ode (or consistent_init-based "
                    "reformulation) before time stepping");
        }
    }

    const auto tab = gauss_tableau(stages);
    const StageSolver solver(sys, tau, tab);

    Trajectory traj;
    const auto n_steps = static_cast<std::size_t>(std::ceil((t_f - t0) / tau - 1e-12));
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);

    auto output_at = [&](const Vec& z, const Vec& uu) {
        return Vec((sys.G + sys.P).transpose() * sys.Q * z + (sys.S - sys.N) * uu);
    };

    double t = t0;
    Vec z = z0;
    traj.times.push_back(t);
    traj.states.push_back(z);
    traj.inputs.push_back(u(t));
    traj.outputs.push_back(output_at(z, traj.inputs.back()));
    traj.hamiltonian.push_back(hamiltonian(sys, z));

    for (std::size_t k = 0; k < n_steps; ++k) {
        std::vector<Vec> u_stages(static_cast<std::size_t>(tab.s));
        for (Index i = 0; i < tab.s; ++i) u_stages[static_cast<std::size_t>(i)] = u(t + tau * tab.gamma(i));
        StepResult step;
        try {
            step = step_with(sys, solver, z, u_stages, tau, tab);
        } catch (const NumericalError& err) {
            throw NumericalError(std::string(err.what()) + " at t = " + std::to_string(t));
        }
        t += tau;
        z = step.z_end;
        traj.times.push_back(t);
        traj.states.push_back(z);
        traj.inputs.push_back(u(t));
        traj.outputs.push_back(output_at(z, traj.inputs.back()));
        traj.hamiltonian.push_back(hamiltonian(sys, z));
        traj.dissipation_per_step.push_back(step.stages.dissipation);
        traj.supply_per_step.push_back(step.stages.supply);
    }
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    if (traj.states.empty()) throw InvalidInput("write_trajectory_csv: empty trajectory");
    const Index n = traj.states.front().size();
    const Index m = traj.inputs.front().size();
    std::vector<std::string> header{"t"};
    for (Index i = 1; i <= n; ++i) header.push_back("z_" + std::to_string(i));
    for (Index i = 1; i <= m; ++i) header.push_back("u_" + std::to_string(i));
    for (Index i = 1; i <= m; ++i) header.push_back("y_" + std::to_string(i));
    header.insert(header.end(), {"H", "diss_step", "supply_step"});

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        for (Index i = 0; i < n; ++i) row.push_back(traj.states[k](i));
        for (Index i = 0; i < m; ++i) row.push_back(traj.inputs[k](i));
        for (Index i = 0; i < m; ++i) row.push_back(traj.outputs[k](i));
        row.push_back(traj.hamiltonian[k]);
        row.push_back(k == 0 ? 0.0 : traj.dissipation_per_step[k - 1]);
        row.push_back(k == 0 ? 0.0 : traj.supply_per_step[k - 1]);
        rows.push_back(std::move(row));
    }
    io::write_csv(path, header, rows);
}

}  // namespace phdae::integrate
