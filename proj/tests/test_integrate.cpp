#include "phdae/integrate.hpp"

#include "phdae/kernels.hpp"
#include "phdae/models.hpp"
#include "phdae/transform.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace phdae;
using namespace phdae::integrate;

TEST_CASE("gauss_tableau") {
    SUBCASE("implicit midpoint") {
        const auto tab = gauss_tableau(1);
        CHECK(tab.gamma(0) == doctest::Approx(0.5));
        CHECK(tab.beta(0) == doctest::Approx(1.0));
        CHECK(tab.alpha(0, 0) == doctest::Approx(0.5));
    }
    SUBCASE("two stages") {
        const auto tab = gauss_tableau(2);
        const double off = std::sqrt(3.0) / 6.0;
        CHECK(tab.gamma(0) == doctest::Approx(0.5 - off));
        CHECK(tab.gamma(1) == doctest::Approx(0.5 + off));
        CHECK(tab.beta(0) == doctest::Approx(0.5));
        CHECK(tab.beta(1) == doctest::Approx(0.5));
    }
    SUBCASE("weights sum to one for every s") {
        for (Index s = 1; s <= 5; ++s) {
            const auto tab = gauss_tableau(s);
            CHECK(tab.beta.sum() == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    SUBCASE("unsupported stage counts rejected") {
        CHECK_THROWS_AS(gauss_tableau(0), InvalidInput);
        CHECK_THROWS_AS(gauss_tableau(6), InvalidInput);
    }
}

TEST_CASE("collocation_step") {
    SUBCASE("scalar decay with the midpoint rule") {
        const auto sys = LtiPhDae::standard(Mat::Identity(1, 1), Mat::Zero(1, 1),
                                            Mat::Identity(1, 1), Mat::Zero(1, 1));
        Vec z0(1);
        z0 << 1.0;
        const auto tab = gauss_tableau(1);
        const auto step =
            collocation_step(sys, z0, {Vec::Zero(0)}, 0.1, tab);
        CHECK(step.z_end(0) == doctest::Approx(0.95 / 1.05).epsilon(1e-14));
    }
    SUBCASE("conservative system preserves H per step") {
        Rng rng(401);
        const Mat j = rng.skew(4);
        const auto sys =
            LtiPhDae::standard(rng.spd(4), j, Mat::Zero(4, 4), Mat::Zero(4, 0));
        const Vec z0 = rng.vector(4);
        for (Index s = 1; s <= 3; ++s) {
            const auto tab = gauss_tableau(s);
            std::vector<Vec> us(static_cast<std::size_t>(s), Vec::Zero(0));
            const auto step = collocation_step(sys, z0, us, 0.05, tab);
            CHECK(hamiltonian(sys, step.z_end) ==
                  doctest::Approx(hamiltonian(sys, z0)).epsilon(1e-12));
        }
    }
    SUBCASE("index-1 constraints satisfied at every stage") {
        const auto sys = models::power_network_model();
        const Vec z0 = consistent_init(sys, models::power_network_example_initial_value());
        const auto tab = gauss_tableau(2);
        std::vector<Vec> us(2, Vec::Zero(1));
        const auto step = collocation_step(sys, z0, us, 0.01, tab);
        // algebraic rows (4 and 5) of E z' = (J-R) z + G u hold at stages
        const Mat a = sys.J - sys.R;
        for (const auto& zi : step.stages.z) {
            const Vec res = a * zi;
            CHECK(std::abs(res(3)) <= 1e-10 * zi.norm());
            CHECK(std::abs(res(4)) <= 1e-10 * zi.norm());
        }
    }
    SUBCASE("discrete power balance identity is exact for Gauss stages") {
        Rng rng(409);
        for (int trial = 0; trial < 20; ++trial) {
            const auto sys = phdae::testing::random_standard_phdae(rng, 5, 2);
            const Vec z0 = rng.vector(5);
            const Index s = 1 + static_cast<Index>(rng.next_u64() % 3);
            const auto tab = gauss_tableau(s);
            std::vector<Vec> us;
            for (Index i = 0; i < s; ++i) us.push_back(rng.vector(2));
            const auto step = collocation_step(sys, z0, us, 0.07, tab);
            const double dh = hamiltonian(sys, step.z_end) - hamiltonian(sys, z0);
            const double ledger = step.stages.dissipation + step.stages.supply;
            const double scale = std::max({std::abs(dh), std::abs(ledger), 1.0});
            CHECK(dh == doctest::Approx(ledger).epsilon(1e-11).scale(scale));
        }
    }
}

TEST_CASE("consistent_init") {
    SUBCASE("index-0 system returns the guess") {
        Rng rng(419);
        const auto sys = phdae::testing::random_standard_phdae(rng, 4, 1);
        const Vec guess = rng.vector(4);
        CHECK((consistent_init(sys, guess) - guess).norm() < 1e-12);
    }
    SUBCASE("published power-network initial value: z4 is inconsistent as printed") {
        const auto sys = models::power_network_model();
        const Vec printed = models::power_network_example_initial_value();
        const Vec fixed = consistent_init(sys, printed);
        // the printed vector does not satisfy the generator branch row;
        // the minimal-norm projection onto the algebraic rows repairs it
        const Mat a = sys.J - sys.R;
        CHECK(std::abs((a * printed)(3)) > 1e-3);
        CHECK(std::abs((a * fixed)(3)) < 1e-10);
        CHECK(std::abs((a * fixed)(4)) < 1e-10);
        // independent oracle: orthogonal projection onto {M z = 0} for the
        // two algebraic rows (index 1, so there are no hidden constraints)
        const Mat m_alg = a.bottomRows(2);
        const Mat mmt = m_alg * m_alg.transpose();
        const Vec oracle =
            printed - m_alg.transpose() *
                          kernels::solve_dense(mmt, Mat(m_alg * printed));
        CHECK((fixed - oracle).norm() <= 1e-10 * oracle.norm());
    }
    SUBCASE("MSD guess projected onto Cq = 0, Cv = 0") {
        models::MsdParams p;
        p.g = 4;
        const auto sys = models::msd_model(p);
        Rng rng(421);
        const Vec guess = rng.vector(sys.n());
        const Vec z0 = consistent_init(sys, guess);
        Mat c = Mat::Zero(1, 4);
        c(0, 0) = 1.0;
        c(0, 3) = -1.0;
        const Vec q = z0.head(4);
        const Vec v = z0.segment(4, 4);
        CHECK(std::abs((c * v)(0)) < 1e-9 * std::max(1.0, v.norm()));
        // hidden constraint: the lambda row of the dynamics must be
        // consistent, i.e. the v-equation admits Cv' = 0
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R);
        const Vec zt = dec.Z.transpose() * z0;
        CHECK(zt.head(dec.n1).norm() < 1e-9 * std::max(1.0, z0.norm()));
        (void)q;
    }
}

TEST_CASE("simulate") {
    SUBCASE("zero initial state stays zero") {
        const auto sys = models::power_network_model();
        const auto traj = simulate(sys, Vec::Zero(5), zero_input(1), 0.0, 0.5, 0.01);
        for (const auto& z : traj.states) CHECK(z.norm() == 0.0);
    }
    SUBCASE("power network: Hamiltonian decreases monotonically") {
        const auto sys = models::power_network_model();
        const Vec z0 = consistent_init(sys, models::power_network_example_initial_value());
        const auto traj = simulate(sys, z0, zero_input(1), 0.0, 1.0, 0.01);
        REQUIRE(traj.states.size() == 101);
        for (std::size_t k = 1; k < traj.hamiltonian.size(); ++k)
            CHECK(traj.hamiltonian[k] <= traj.hamiltonian[k - 1] + 1e-10 * traj.hamiltonian[0]);
        const auto check = dissipation_check(sys, traj);
        CHECK(check.holds);
        CHECK(check.rhs == doctest::Approx(0.0).scale(1.0));
    }
    SUBCASE("conservative system keeps H constant over 100 steps") {
        Rng rng(431);
        const Mat j = rng.skew(5);
        const auto sys = LtiPhDae::standard(rng.spd(5), j, Mat::Zero(5, 5), Mat::Zero(5, 0));
        const Vec z0 = rng.vector(5);
        const auto traj = simulate(sys, z0, zero_input(0), 0.0, 1.0, 0.01, 2);
        const double h0 = traj.hamiltonian.front();
        for (double h : traj.hamiltonian) CHECK(std::abs(h - h0) <= 1e-12 * std::max(1.0, h0));
    }
    SUBCASE("index-2 stepping refused") {
        const auto sys = models::gas_like_model(2, 4, 2, 5);
        CHECK_THROWS_AS(simulate(sys, Vec::Zero(8), zero_input(1), 0.0, 0.1, 0.01),
                        InvalidInput);
    }
    SUBCASE("convergence order 2s for s = 1, 2") {
        // closed-form problem: E z' = (J - R) z, solution via diagonalization
        Mat j(2, 2);
        j << 0, -1, 1, 0;
        const Mat r = Vec((Vec(2) << 0.2, 0.1).finished()).asDiagonal();
        const auto sys = LtiPhDae::standard(Mat::Identity(2, 2), j, r, Mat::Zero(2, 0));
        Vec z0(2);
        z0 << 1.0, 0.5;
        const Mat a = j - r;
        // dense matrix exponential by scaling and squaring on the series
        auto expm = [](Mat m) {
            int squarings = 0;
            while (m.norm() > 0.25) {
                m *= 0.5;
                ++squarings;
            }
            Mat result = Mat::Identity(m.rows(), m.cols());
            Mat term = result;
            for (int k = 1; k <= 20; ++k) {
                term = term * m / double(k);
                result += term;
            }
            for (int i = 0; i < squarings; ++i) result = result * result;
            return result;
        };
        const Vec z_exact = expm(a * 1.0) * z0;
        for (Index s = 1; s <= 2; ++s) {
            std::vector<double> errs;
            for (double tau : {0.2, 0.1, 0.05, 0.025}) {
                const auto traj = simulate(sys, z0, zero_input(0), 0.0, 1.0, tau, s);
                errs.push_back((traj.states.back() - z_exact).norm());
            }
            // observed order from successive halvings
            for (std::size_t i = 1; i < errs.size(); ++i) {
                const double order = std::log2(errs[i - 1] / errs[i]);
                CHECK(order == doctest::Approx(2.0 * double(s)).epsilon(0.1));
            }
        }
    }
}
