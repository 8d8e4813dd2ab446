#include "phdae/core.hpp"

#include "phdae/integrate.hpp"
#include "phdae/kernels.hpp"

#include <cmath>
#include <sstream>

namespace phdae {

LtiPhDae LtiPhDae::standard(Mat e, Mat j, Mat r, Mat g) {
    LtiPhDae sys;
    const Index nn = e.cols();
    const Index ll = e.rows();
    const Index mm = g.cols();
    sys.E = std::move(e);
    sys.J = std::move(j);
    sys.R = std::move(r);
    sys.G = std::move(g);
    sys.Q = Mat::Identity(ll, nn);
    sys.P = Mat::Zero(ll, mm);
    sys.S = Mat::Zero(mm, mm);
    sys.N = Mat::Zero(mm, mm);
    sys.check_dimensions();
    return sys;
}

LtiPhDae LtiPhDae::general(Mat e, Mat j, Mat r, Mat q, Mat g, Mat p, Mat s, Mat nn) {
    LtiPhDae sys;
    sys.E = std::move(e);
    sys.J = std::move(j);
    sys.R = std::move(r);
    sys.Q = std::move(q);
    sys.G = std::move(g);
    sys.P = std::move(p);
    sys.S = std::move(s);
    sys.N = std::move(nn);
    sys.check_dimensions();
    return sys;
}

void LtiPhDae::check_dimensions() const {
    const Index nn = n(), ll = ell(), mm = m();
    auto expect = [](const Mat& a, Index r, Index c, const char* name) {
        if (a.rows() != r || a.cols() != c)
            throw InvalidInput(std::string("LtiPhDae: ") + name + " has shape " +
                               std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                               ", expected " + std::to_string(r) + "x" + std::to_string(c));
    };
    expect(J, ll, ll, "J");
    expect(R, ll, ll, "R");
    expect(Q, ll, nn, "Q");
    expect(G, ll, mm, "G");
    expect(P, ll, mm, "P");
    expect(S, mm, mm, "S");
    expect(N, mm, mm, "N");
    require_finite(E, "E");
    require_finite(J, "J");
    require_finite(R, "R");
    require_finite(Q, "Q");
    require_finite(G, "G");
    require_finite(P, "P");
    require_finite(S, "S");
    require_finite(N, "N");
}

Mat LtiPhDae::structure_matrix() const {
    const Index ll = ell(), mm = m();
    Mat gamma(ll + mm, ll + mm);
    gamma << J, G, -G.transpose(), N;
    return gamma;
}

Mat LtiPhDae::dissipation_matrix() const {
    const Index ll = ell(), mm = m();
    Mat w_inner(ll + mm, ll + mm);
    w_inner << R, P, P.transpose(), S;
    Mat q_ext = Mat::Zero(ll + mm, n() + mm);
    q_ext.topLeftCorner(ll, n()) = Q;
    q_ext.bottomRightCorner(mm, mm) = Mat::Identity(mm, mm);
    return q_ext.transpose() * w_inner * q_ext;
}

bool LtiPhDae::has_identity_q(double tol) const {
    if (ell() != n()) return false;
    return (Q - Mat::Identity(n(), n())).norm() <= tol * std::sqrt(double(n()));
}

bool LtiPhDae::has_feedthrough(double tol) const {
    const double scale = std::max({S.norm(), N.norm(), 1.0});
    return (S - N).norm() > tol * scale;
}

bool LtiPhDae::is_standard_form(double tol) const {
    return has_identity_q(tol) && !has_feedthrough(tol) &&
           P.norm() <= tol * norm_or_one(G);
}

ValidationReport validate_structure(const LtiPhDae& sys, double tol) {
    sys.check_dimensions();
    ValidationReport rep;
    const Mat gamma = sys.structure_matrix();
    const Mat w = sys.dissipation_matrix();
    const Mat qte = sys.Q.transpose() * sys.E;

    rep.skew_defect = skew_defect(gamma);
    rep.symmetry_defect = sym_defect(qte);

    const auto eig = kernels::sym_eig(sym_part(w), /*sym_tol=*/1.0);
    rep.dissipation_min_eig = eig.eigenvalues.size() ? eig.eigenvalues(0) : 0.0;

    std::ostringstream why;
    bool ok = true;
    if (rep.skew_defect > tol * norm_or_one(gamma)) {
        ok = false;
        why << "Gamma not skew-symmetric (defect " << rep.skew_defect << "); ";
    }
    const double w_asym = sym_defect(w);
    if (w_asym > tol * norm_or_one(w)) {
        ok = false;
        why << "W not symmetric (defect " << w_asym << "); ";
    }
    if (rep.dissipation_min_eig < -tol * norm_or_one(w)) {
        ok = false;
        why << "W indefinite (min eig " << rep.dissipation_min_eig << "); ";
    }
    if (rep.symmetry_defect > tol * norm_or_one(qte)) {
        ok = false;
        why << "Q^T E not symmetric (defect " << rep.symmetry_defect << "); ";
    }
    rep.pass = ok;
    rep.reasons = why.str();
    return rep;
}

void require_valid(const LtiPhDae& sys, const char* where, double tol) {
    const auto rep = validate_structure(sys, tol);
    if (!rep.pass)
        throw InvalidInput(std::string(where) + ": system fails pH validation: " + rep.reasons);
}

double hamiltonian(const LtiPhDae& sys, const Vec& z) {
    if (z.size() != sys.n()) throw InvalidInput("hamiltonian: state dimension mismatch");
    const Mat h = sym_part(sys.Q.transpose() * sys.E);
    return 0.5 * z.dot(h * z);
}

double power_balance_residual(const LtiPhDae& sys, const PortSample& s) {
    if (s.z.size() != sys.n() || s.dz.size() != sys.n() || s.u.size() != sys.m() ||
        s.y.size() != sys.m())
        throw InvalidInput("power_balance_residual: sample dimensions mismatch");
    const Vec eta = sys.Q * s.z;
    const double dh = eta.dot(sys.E * s.dz);
    Vec w_arg(sys.n() + sys.m());
    w_arg << s.z, s.u;
    const Mat w = sym_part(sys.dissipation_matrix());
    const double rhs = -w_arg.dot(w * w_arg) + s.y.dot(s.u);
    return std::abs(dh - rhs);
}

DissipationCheck dissipation_check(const LtiPhDae& sys, const Trajectory& traj, double tol) {
    if (traj.states.empty()) throw InvalidInput("dissipation_check: empty trajectory");
    if (traj.states.front().size() != sys.n())
        throw InvalidInput("dissipation_check: trajectory/system dimension mismatch");
    DissipationCheck out;
    out.lhs = hamiltonian(sys, traj.states.back()) - hamiltonian(sys, traj.states.front());
    out.rhs = 0.0;
    for (double s : traj.supply_per_step) out.rhs += s;
    const double scale = std::max({std::abs(out.lhs), std::abs(out.rhs), 1.0});
    out.holds = out.lhs <= out.rhs + tol * scale;
    return out;
}

}  // namespace phdae
