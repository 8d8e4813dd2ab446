#include "phdae/models.hpp"

#include "phdae/kernels.hpp"

#include <cmath>

namespace phdae::models {

LtiPhDae rlc_model(const CircuitGraph& graph) {
    const Index nv = graph.Ac.rows();
    auto check_rows = [&](const Mat& a, const char* name) {
        if (a.rows() != nv) throw InvalidInput(std::string("rlc_model: ") + name + " row mismatch");
    };
    check_rows(graph.Ar, "Ar");
    check_rows(graph.Al, "Al");
    check_rows(graph.Av, "Av");
    check_rows(graph.Ai, "Ai");
    const Index nl = graph.Al.cols();
    const Index nsrc_v = graph.Av.cols();
    const Index nsrc_i = graph.Ai.cols();

    {
        Mat full(nv, graph.Ar.cols() + graph.Ac.cols() + nl + nsrc_v + nsrc_i);
        full << graph.Ar, graph.Ac, graph.Al, graph.Av, graph.Ai;
        if (kernels::rank_of(full) < nv)
            throw InvalidInput("rlc_model: disconnected graph (incidence rank deficient)");
    }

    const Index n = nv + nl + nsrc_v;
    const Index m = nsrc_i + nsrc_v;

    Mat e = Mat::Zero(n, n);
    e.topLeftCorner(nv, nv) = graph.Ac * graph.cap * graph.Ac.transpose();
    e.block(nv, nv, nl, nl) = graph.ind;

    Mat j = Mat::Zero(n, n);
    j.block(0, nv, nv, nl) = -graph.Al;
    j.block(nv, 0, nl, nv) = graph.Al.transpose();
    j.block(0, nv + nl, nv, nsrc_v) = -graph.Av;
    j.block(nv + nl, 0, nsrc_v, nv) = graph.Av.transpose();

    Mat r = Mat::Zero(n, n);
    const Mat rinv = kernels::solve_dense(graph.res, Mat::Identity(graph.res.rows(), graph.res.rows()));
    r.topLeftCorner(nv, nv) = graph.Ar * rinv * graph.Ar.transpose();

    Mat g = Mat::Zero(n, m);
    g.topLeftCorner(nv, nsrc_i) = graph.Ai;
    g.block(nv + nl, nsrc_i, nsrc_v, nsrc_v) = -Mat::Identity(nsrc_v, nsrc_v);

    return LtiPhDae::standard(sym_part(e), j, sym_part(r), g);
}

CircuitGraph random_rlc_graph(Index nodes, std::uint64_t seed) {
    if (nodes < 2) throw InvalidInput("random_rlc_graph: need at least 2 nodes");
    Rng rng(seed);
    const Index nv = nodes - 1;  // ground removed

    struct Edge {
        Index from, to;  // -1 = ground
        int cls;         // 0 = R, 1 = C, 2 = L, 3 = Vsrc, 4 = Isrc
        double value;
    };
    std::vector<Edge> edges;
    // spanning tree over all nodes including ground (node -1 = index 0 here)
    for (Index v = 1; v < nodes; ++v) {
        const Index u = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(v));
        edges.push_back({u - 1, v - 1, static_cast<int>(rng.next_u64() % 3),
                         rng.uniform(0.5, 2.0)});
    }
    // extra chords
    const Index extra = nodes;
    for (Index k = 0; k < extra; ++k) {
        const Index u = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(nodes));
        Index v = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(nodes));
        if (u == v) v = (v + 1) % nodes;
        edges.push_back({u - 1, v - 1, static_cast<int>(rng.next_u64() % 3),
                         rng.uniform(0.5, 2.0)});
    }
    // guarantee storage and both source classes
    edges.push_back({-1, nv - 1, 1, rng.uniform(0.5, 2.0)});
    edges.push_back({-1, 0, 2, rng.uniform(0.5, 2.0)});
    edges.push_back({-1, nv / 2, 4, 1.0});
    edges.push_back({-1, nv - 1, 3, 1.0});

    std::vector<Edge> by_class[5];
    for (const auto& ed : edges) by_class[ed.cls].push_back(ed);

    auto incidence = [&](const std::vector<Edge>& es) {
        Mat a = Mat::Zero(nv, static_cast<Index>(es.size()));
        for (std::size_t c = 0; c < es.size(); ++c) {
            if (es[c].from >= 0) a(es[c].from, static_cast<Index>(c)) = 1.0;
            if (es[c].to >= 0) a(es[c].to, static_cast<Index>(c)) = -1.0;
        }
        return a;
    };
    auto values = [&](const std::vector<Edge>& es) {
        Vec v(static_cast<Index>(es.size()));
        for (std::size_t c = 0; c < es.size(); ++c) v(static_cast<Index>(c)) = es[c].value;
        return Mat(v.asDiagonal());
    };

    CircuitGraph g;
    g.Ar = incidence(by_class[0]);
    g.Ac = incidence(by_class[1]);
    g.Al = incidence(by_class[2]);
    g.Av = incidence(by_class[3]);
    g.Ai = incidence(by_class[4]);
    g.res = values(by_class[0]);
    g.cap = values(by_class[1]);
    g.ind = values(by_class[2]);
    return g;
}

LtiPhDae power_network_model(const PowerNetworkParams& p) {
    if (p.L <= 0 || p.C1 <= 0 || p.C2 <= 0 || p.R_L <= 0 || p.R_G <= 0 || p.R_R <= 0)
        throw InvalidInput("power_network_model: all parameters must be positive");
    Mat e = Vec((Vec(5) << p.L, p.C1, p.C2, 0.0, 0.0).finished()).asDiagonal();
    Mat j(5, 5);
    j << 0, -1, 1, 0, 0,
         1, 0, 0, -1, 0,
        -1, 0, 0, 0, -1,
         0, 1, 0, 0, 0,
         0, 0, 1, 0, 0;
    Mat r = Vec((Vec(5) << p.R_L, 0.0, 0.0, p.R_G, p.R_R).finished()).asDiagonal();
    Mat g = Mat::Zero(5, 1);
    g(3, 0) = 1.0;
    return LtiPhDae::standard(e, j, r, g);
}

PowerEquilibrium power_network_equilibrium(const PowerNetworkParams& p, double power) {
    if (power < 0) throw InvalidInput("power_network_equilibrium: power must be nonnegative");
    PowerEquilibrium eq;
    const double i_r = -std::sqrt(power / p.R_R);
    eq.z.resize(5);
    eq.z << -i_r, (p.R_R + p.R_L) * i_r, p.R_R * i_r, -i_r, i_r;
    eq.e_g = -(p.R_R + p.R_L + p.R_G) * i_r;
    return eq;
}

Vec power_network_example_initial_value(const PowerNetworkParams& p) {
    const double scale = std::sqrt(10.0 / p.R_R);
    Vec z(5);
    z << 1.0, -p.R_R - p.R_L, -p.R_R, -(p.R_R - p.R_L) / p.R_R, -1.0;
    return scale * z;
}

namespace {

Mat chain_matrix(Index g, double interior, double ground, double ground_1, double ground_g) {
    Mat k = Mat::Zero(g, g);
    for (Index i = 0; i < g - 1; ++i) {
        k(i, i) += interior;
        k(i + 1, i + 1) += interior;
        k(i, i + 1) -= interior;
        k(i + 1, i) -= interior;
    }
    for (Index i = 0; i < g; ++i) {
        double kg = ground;
        if (i == 0) kg = ground_1;
        if (i == g - 1) kg = ground_g;
        k(i, i) += kg;
    }
    return k;
}

}  // namespace

LtiPhDae msd_model(const MsdParams& p) {
    if (p.g < 3) throw InvalidInput("msd_model: need at least 3 masses");
    const Index g = p.g;
    const Mat k = chain_matrix(g, p.k, p.kappa, p.kappa_1, p.kappa_g);
    const Mat d = chain_matrix(g, p.d, p.delta, p.delta_1, p.delta_g);
    const Mat mmat = p.mass * Mat::Identity(g, g);
    Mat c = Mat::Zero(1, g);
    c(0, 0) = 1.0;
    c(0, g - 1) = -1.0;

    const Index n = 2 * g + 1;
    Mat e = Mat::Zero(n, n);
    e.topLeftCorner(g, g) = k;
    e.block(g, g, g, g) = mmat;

    Mat j = Mat::Zero(n, n);
    j.block(0, g, g, g) = k;
    j.block(g, 0, g, g) = -k;
    j.block(g, 2 * g, g, 1) = -c.transpose();
    j.block(2 * g, g, 1, g) = c;

    Mat r = Mat::Zero(n, n);
    r.block(g, g, g, g) = d;

    Mat gmat = Mat::Zero(n, 1);
    gmat(g, 0) = 1.0;  // force on the first mass
    return LtiPhDae::standard(e, j, r, gmat);
}

LtiPhDae msd_uode(const MsdParams& p) {
    if (p.g < 3) throw InvalidInput("msd_uode: need at least 3 masses");
    const Index g = p.g;
    const Mat k = chain_matrix(g, p.k, p.kappa, p.kappa_1, p.kappa_g);
    const Mat d = chain_matrix(g, p.d, p.delta, p.delta_1, p.delta_g);

    // Orthonormal basis of ker C for C = [1, 0, ..., 0, -1]: Householder
    // complement of the unit vector along C^T.
    Vec ct = Vec::Zero(g);
    ct(0) = 1.0;
    ct(g - 1) = -1.0;
    Eigen::HouseholderQR<Mat> qr(ct);
    const Mat qfull = qr.householderQ();
    const Mat v2 = qfull.rightCols(g - 1);

    const Mat kr = sym_part(v2.transpose() * k * v2);
    const Mat dr = sym_part(v2.transpose() * d * v2);
    const Mat mr = p.mass * Mat::Identity(g - 1, g - 1);
    Vec e1 = Vec::Zero(g);
    e1(0) = 1.0;
    const Mat gr = v2.transpose() * e1;

    const Index nr2 = 2 * (g - 1);
    Mat e = Mat::Zero(nr2, nr2);
    e.topLeftCorner(g - 1, g - 1) = kr;
    e.bottomRightCorner(g - 1, g - 1) = mr;
    Mat j = Mat::Zero(nr2, nr2);
    j.topRightCorner(g - 1, g - 1) = kr;
    j.bottomLeftCorner(g - 1, g - 1) = -kr;
    Mat r = Mat::Zero(nr2, nr2);
    r.bottomRightCorner(g - 1, g - 1) = dr;
    Mat gmat = Mat::Zero(nr2, 1);
    gmat.bottomRows(g - 1) = gr;
    return LtiPhDae::standard(e, j, r, gmat);
}

LtiPhDae gas_like_model(Index n1, Index n2, Index n3, std::uint64_t seed) {
    if (n1 < 1 || n2 < 1 || n3 < 0) throw InvalidInput("gas_like_model: bad dimensions");
    if (n3 > n2)
        throw InvalidInput("gas_like_model: need n3 <= n2 for a full-row-rank J32");
    Rng rng(seed);
    const Mat m1 = rng.spd(n1);
    const Mat m2 = rng.spd(n2);
    const Mat r22 = rng.spd(n2);
    const Mat j12 = rng.matrix(n1, n2);
    const Mat j32 = rng.matrix(n3, n2);
    if (n3 > 0 && kernels::rank_of(j32) < n3)
        throw NumericalError("gas_like_model: generated J32 rank deficient (reseed)");
    if (n2 <= n1 + n3) {
        Mat stack(n1 + n3, n2);
        stack << j12, j32;
        if (kernels::rank_of(stack) < n2)
            throw NumericalError("gas_like_model: generated [J12; J32] column-rank deficient");
    }

    const Index n = n1 + n2 + n3;
    Mat e = Mat::Zero(n, n);
    e.topLeftCorner(n1, n1) = m1;
    e.block(n1, n1, n2, n2) = m2;
    Mat j = Mat::Zero(n, n);
    j.block(0, n1, n1, n2) = -j12;
    j.block(n1, 0, n2, n1) = j12.transpose();
    j.block(n1, n1 + n2, n2, n3) = j32.transpose();
    j.block(n1 + n2, n1, n3, n2) = -j32;
    Mat r = Mat::Zero(n, n);
    r.block(n1, n1, n2, n2) = r22;
    Mat g = Mat::Zero(n, 1);
    g.block(n1, 0, n2, 1) = rng.vector(n2);
    return LtiPhDae::standard(e, j, r, g);
}

HsBench hs_bench(Index n, double tau, DampingProfile profile, std::uint64_t seed) {
    if (n < 2) throw InvalidInput("hs_bench: need n >= 2");
    Rng rng(seed);
    HsBench out;
    out.E = rng.spd(n);
    switch (profile) {
        case DampingProfile::full: out.R = rng.spd(n); break;
        case DampingProfile::rank_deficient: out.R = rng.psd(n, std::max<Index>(1, n / 2)); break;
        case DampingProfile::tridiagonal: {
            Mat r = Mat::Zero(n, n);
            for (Index i = 0; i < n; ++i) r(i, i) = rng.uniform(1.0, 2.0);
            for (Index i = 0; i + 1 < n; ++i) {
                const double off = rng.uniform(-0.4, 0.4);
                r(i, i + 1) = off;
                r(i + 1, i) = off;
            }
            out.R = r;
            break;
        }
    }
    out.J = rng.skew(n);
    out.H = sym_part(out.E + tau * out.R);
    out.S = -tau * out.J;
    out.A = out.H + out.S;
    return out;
}

}  // namespace phdae::models
