#include "phdae/models.hpp"

#include "phdae/analysis.hpp"
#include "phdae/integrate.hpp"
#include "phdae/kernels.hpp"
#include "phdae/mor.hpp"
#include "phdae/solve.hpp"
#include "phdae/transform.hpp"

#include <doctest.h>

#include <cmath>

using namespace phdae;
using namespace phdae::models;

TEST_CASE("power_network_model") {
    SUBCASE("default constants give a validated index-1 system") {
        const auto sys = power_network_model();
        CHECK(validate_structure(sys).pass);
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
        CHECK(dec.kronecker_index == 1);
    }
    SUBCASE("equilibrium formulas for target power") {
        PowerNetworkParams p;
        const auto eq = power_network_equilibrium(p, 10.0);
        CHECK(eq.e_g == doctest::Approx(9.1 * std::sqrt(10.0 / 3.0)));
        // the steady state satisfies the state equation with u = e_g
        const auto sys = power_network_model(p);
        Vec u(1);
        u << eq.e_g;
        const Vec resid = (sys.J - sys.R) * eq.z + sys.G * u;
        CHECK(resid.norm() <= 1e-12 * eq.z.norm());
    }
    SUBCASE("free system decays to zero") {
        const auto sys = power_network_model();
        const Vec z0 =
            integrate::consistent_init(sys, power_network_example_initial_value());
        const auto traj =
            integrate::simulate(sys, z0, integrate::zero_input(1), 0.0, 8.0, 0.02);
        CHECK(traj.states.back().norm() < 0.05 * z0.norm());
        for (std::size_t k = 1; k < traj.hamiltonian.size(); ++k)
            CHECK(traj.hamiltonian[k] <= traj.hamiltonian[k - 1] + 1e-12 * traj.hamiltonian[0]);
    }
    SUBCASE("nonpositive parameters rejected") {
        PowerNetworkParams p;
        p.C1 = 0.0;
        CHECK_THROWS_AS(power_network_model(p), InvalidInput);
    }
}

TEST_CASE("msd_model") {
    SUBCASE("dimensions and index") {
        MsdParams p;
        p.g = 5;
        const auto sys = msd_model(p);
        CHECK(sys.n() == 11);
        CHECK(validate_structure(sys).pass);
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
        CHECK(dec.kronecker_index == 2);
        CHECK(dec.n1 == 1);  // constraint rank 1
    }
    SUBCASE("g = 1000 has 2001 states and 1998 dynamic dimensions") {
        MsdParams p;  // table parameters
        const auto sys = msd_model(p);
        CHECK(sys.n() == 2001);
        const auto uode = msd_uode(p);
        CHECK(uode.n() == 1998);
    }
    SUBCASE("uODE is strictly stable and matches the full transfer function") {
        MsdParams p;
        p.g = 12;
        const auto sys = msd_model(p);
        const auto uode = msd_uode(p);
        CHECK(validate_structure(uode).pass);
        CHECK(kernels::spectral_abscissa(
                  kernels::solve_dense(uode.E, uode.J - uode.R)) < 0.0);
        for (int i = 0; i < 5; ++i) {
            const std::complex<double> s(0.3 + 0.2 * i, 0.7 * i);
            const CMat gf = mor::transfer_eval(sys, s);
            const CMat gr = mor::transfer_eval(uode, s);
            CHECK((gf - gr).norm() <= 1e-9 * std::max(1.0, gf.norm()));
        }
    }
    SUBCASE("g < 3 rejected") {
        MsdParams p;
        p.g = 2;
        CHECK_THROWS_AS(msd_model(p), InvalidInput);
    }
}

TEST_CASE("gas_like_model") {
    SUBCASE("no multiplier block gives index 0") {
        const auto sys = gas_like_model(3, 3, 0, 11);
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
        CHECK(dec.kronecker_index <= 1);
    }
    SUBCASE("(3,4,2) is index 2 with n1 = n4 = 2") {
        const auto sys = gas_like_model(3, 4, 2, 12345);
        CHECK(validate_structure(sys).pass);
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
        CHECK(dec.kronecker_index == 2);
        CHECK(dec.n1 == 2);
        CHECK(dec.n4 == 2);
    }
    SUBCASE("validation passes for 20 random seeds") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto sys = gas_like_model(2 + seed % 3, 3 + seed % 4,
                                            static_cast<Index>(seed % 3), seed);
            CHECK(validate_structure(sys).pass);
        }
    }
    SUBCASE("infeasible dimensions rejected") {
        CHECK_THROWS_AS(gas_like_model(2, 2, 3, 1), InvalidInput);
    }
}

TEST_CASE("rlc_model") {
    SUBCASE("single capacitor with a current source") {
        CircuitGraph g;
        g.Ac = Mat::Ones(1, 1);
        g.Ar = Mat(1, 0);
        g.Al = Mat(1, 0);
        g.Av = Mat(1, 0);
        g.Ai = Mat::Ones(1, 1);
        g.cap = 2.0 * Mat::Identity(1, 1);
        g.res = Mat(0, 0);
        g.ind = Mat(0, 0);
        const auto sys = rlc_model(g);
        CHECK(sys.n() == 1);
        CHECK(sys.E(0, 0) == doctest::Approx(2.0));
        Vec z(1);
        z << 3.0;
        CHECK(hamiltonian(sys, z) == doctest::Approx(0.5 * 2.0 * 9.0));
    }
    SUBCASE("pure resistive loop is purely algebraic") {
        CircuitGraph g;
        g.Ar = Mat::Ones(1, 2);
        g.Ar(0, 1) = -1.0;
        g.Ac = Mat(1, 0);
        g.Al = Mat(1, 0);
        g.Av = Mat(1, 0);
        g.Ai = Mat::Ones(1, 1);
        g.res = Mat::Identity(2, 2);
        g.cap = Mat(0, 0);
        g.ind = Mat(0, 0);
        const auto sys = rlc_model(g);
        CHECK(sys.E.norm() == 0.0);
        CHECK(validate_structure(sys).pass);
    }
    SUBCASE("random 10-node circuits validate and have index <= 2") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto graph = random_rlc_graph(10, seed);
            const auto sys = rlc_model(graph);
            CHECK(validate_structure(sys).pass);
            const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
            CHECK(dec.regular);
            CHECK(dec.kronecker_index <= 2);
        }
    }
}

TEST_CASE("hs_bench") {
    SUBCASE("tau = 0 returns the SPD E part") {
        const auto bench = hs_bench(10, 0.0, DampingProfile::full, 3);
        CHECK((bench.A - bench.E).norm() == 0.0);
        CHECK(bench.S.norm() == 0.0);
    }
    SUBCASE("symmetric part certified PSD for all profiles") {
        for (int prof = 0; prof < 3; ++prof) {
            const auto bench =
                hs_bench(40, 1e-3, static_cast<DampingProfile>(prof), 100 + prof);
            const auto eig = kernels::sym_eig(bench.H);
            CHECK(eig.eigenvalues(0) > 0.0);
            CHECK(skew_defect(bench.S) == 0.0);
        }
    }
    SUBCASE("widlund converges on a n=500 full-profile instance") {
        const auto bench = hs_bench(500, 1e-3, DampingProfile::full, 2024);
        Rng rng(601);
        const Vec b = rng.vector(500);
        const auto res = solve::widlund_solve(bench.H, bench.S, b, 1e-9);
        CHECK(res.log.termination == "converged");
        CHECK(res.log.iterations <= 500);
        CHECK(((bench.H + bench.S) * res.x - b).norm() <= 1e-8 * b.norm());
    }
}
