#include "phdae/kernels.hpp"
#include "phdae/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace phdae;
namespace k = phdae::kernels;

TEST_CASE("svd_full_rank basics") {
    SUBCASE("zero matrix has rank 0") {
        const auto dec = k::svd_full_rank(Mat::Zero(3, 4));
        CHECK(dec.rank == 0);
    }
    SUBCASE("diag(5, 0)") {
        Mat a = Mat::Zero(2, 2);
        a(0, 0) = 5.0;
        const auto dec = k::svd_full_rank(a);
        CHECK(dec.rank == 1);
        CHECK(dec.singular_values(0) == doctest::Approx(5.0));
        CHECK((dec.left_factor.transpose() * dec.left_factor - Mat::Identity(2, 2)).norm() < 1e-14);
    }
    SUBCASE("constructed rank 2") {
        Rng rng(7);
        const Mat q1 = rng.orthogonal(8);
        const Mat q2 = rng.orthogonal(8);
        const Mat a = q1.col(0) * q2.col(0).transpose() + 2.0 * q1.col(1) * q2.col(1).transpose();
        const auto dec = k::svd_full_rank(a);
        CHECK(dec.rank == 2);
    }
    SUBCASE("reconstruction") {
        Rng rng(11);
        const Mat a = rng.matrix(6, 4);
        const auto dec = k::svd_full_rank(a);
        Mat sigma = Mat::Zero(6, 4);
        for (Index i = 0; i < dec.singular_values.size(); ++i)
            sigma(i, i) = dec.singular_values(i);
        const Mat rec = dec.left_factor * sigma * dec.right_factor.transpose();
        CHECK((rec - a).norm() <= 1e-12 * a.norm());
    }
    SUBCASE("non-finite entries rejected") {
        Mat a = Mat::Zero(2, 2);
        a(0, 0) = std::nan("");
        CHECK_THROWS_AS(k::svd_full_rank(a), InvalidInput);
    }
}

TEST_CASE("sym_eig") {
    SUBCASE("diagonal") {
        Mat a = Vec((Vec(2) << 3.0, 1.0).finished()).asDiagonal();
        const auto e = k::sym_eig(a);
        CHECK(e.eigenvalues(0) == doctest::Approx(1.0));
        CHECK(e.eigenvalues(1) == doctest::Approx(3.0));
    }
    SUBCASE("2x2 by characteristic polynomial") {
        Mat a(2, 2);
        a << 2, 1, 1, 2;
        const auto e = k::sym_eig(a);
        CHECK(e.eigenvalues(0) == doctest::Approx(1.0));
        CHECK(e.eigenvalues(1) == doctest::Approx(3.0));
    }
    SUBCASE("identity") {
        const auto e = k::sym_eig(Mat::Identity(4, 4));
        for (Index i = 0; i < 4; ++i) CHECK(e.eigenvalues(i) == doctest::Approx(1.0));
    }
    SUBCASE("reconstruction and orthogonality") {
        Rng rng(3);
        const Mat a = rng.psd(7, 7);
        const auto e = k::sym_eig(a);
        const Mat rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
        CHECK((rec - a).norm() <= 1e-12 * a.norm());
        CHECK((e.eigenvectors.transpose() * e.eigenvectors - Mat::Identity(7, 7)).norm() < 1e-13);
    }
    SUBCASE("asymmetric rejected") {
        Mat a(2, 2);
        a << 0, 1, 0, 0;
        CHECK_THROWS_AS(k::sym_eig(a), InvalidInput);
    }
}

TEST_CASE("eig_small") {
    SUBCASE("rotation generator") {
        Mat a(2, 2);
        a << 0, -1, 1, 0;
        const auto ev = k::eig_small(a);
        double imax = 0;
        for (Index i = 0; i < 2; ++i) {
            CHECK(std::abs(ev(i).real()) < 1e-12);
            imax = std::max(imax, std::abs(ev(i).imag()));
        }
        CHECK(imax == doctest::Approx(1.0));
    }
    SUBCASE("double eigenvalue -1") {
        Mat a(2, 2);
        a << -2, -1, 1, 0;
        const auto ev = k::eig_small(a);
        for (Index i = 0; i < 2; ++i) {
            CHECK(ev(i).real() == doctest::Approx(-1.0).epsilon(1e-6));
            CHECK(std::abs(ev(i).imag()) < 1e-6);
        }
    }
    SUBCASE("diagonal") {
        Vec d(4);
        d << -3, 0.5, 2, 7;
        const auto ev = k::eig_small(Mat(d.asDiagonal()));
        Vec re(4);
        for (Index i = 0; i < 4; ++i) re(i) = ev(i).real();
        std::sort(re.data(), re.data() + 4);
        for (Index i = 0; i < 4; ++i) CHECK(re(i) == doctest::Approx(d(i)));
    }
    SUBCASE("skew-symmetric spectrum is imaginary") {
        Rng rng(5);
        const Mat a = rng.skew(9);
        const auto ev = k::eig_small(a);
        for (Index i = 0; i < ev.size(); ++i)
            CHECK(std::abs(ev(i).real()) <= 1e-10 * std::max(1.0, a.norm()));
    }
}

TEST_CASE("cholesky") {
    SUBCASE("diagonal") {
        Mat a = Vec((Vec(2) << 4.0, 9.0).finished()).asDiagonal();
        const Mat l = k::cholesky(a);
        CHECK(l(0, 0) == doctest::Approx(2.0));
        CHECK(l(1, 1) == doctest::Approx(3.0));
    }
    SUBCASE("hand elimination") {
        Mat a(2, 2);
        a << 2, 1, 1, 2;
        const Mat l = k::cholesky(a);
        CHECK(l(0, 0) == doctest::Approx(std::sqrt(2.0)));
        CHECK(l(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
        CHECK(l(1, 1) == doctest::Approx(std::sqrt(1.5)));
        CHECK((l * l.transpose() - a).norm() < 1e-14);
    }
    SUBCASE("indefinite rejected") {
        Mat a(2, 2);
        a << 1, 2, 2, 1;
        CHECK_THROWS_AS(k::cholesky(a), NumericalError);
    }
}

TEST_CASE("solve_dense") {
    SUBCASE("identity") {
        Rng rng(2);
        const Mat b = rng.matrix(4, 2);
        CHECK((k::solve_dense(Mat::Identity(4, 4), b) - b).norm() < 1e-14);
    }
    SUBCASE("diagonal") {
        Mat a = Vec((Vec(2) << 2.0, 4.0).finished()).asDiagonal();
        Vec b(2);
        b << 2, 4;
        const Mat x = k::solve_dense(a, b);
        CHECK(x(0, 0) == doctest::Approx(1.0));
        CHECK(x(1, 0) == doctest::Approx(1.0));
    }
    SUBCASE("recovers constructed solution") {
        Rng rng(17);
        const Mat a = rng.spd(10);  // well conditioned
        const Mat xs = rng.matrix(10, 3);
        const Mat x = k::solve_dense(a, a * xs);
        CHECK((x - xs).norm() <= 1e-10 * xs.norm());
    }
    SUBCASE("singular rejected") {
        Mat a = Mat::Zero(3, 3);
        a(0, 0) = 1.0;
        CHECK_THROWS_AS(k::solve_dense(a, Mat::Identity(3, 3)), NumericalError);
    }
}

TEST_CASE("lyapunov") {
    SUBCASE("scalar") {
        Mat a(1, 1), q(1, 1);
        a << -1;
        q << 2;
        const Mat x = k::lyapunov(a, q);
        CHECK(x(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("-I with Q = I") {
        const Mat x = k::lyapunov(-Mat::Identity(2, 2), Mat::Identity(2, 2));
        CHECK((x - 0.5 * Mat::Identity(2, 2)).norm() < 1e-10);
    }
    SUBCASE("unstable rejected") {
        Mat a(1, 1), q(1, 1);
        a << 1;
        q << 1;
        CHECK_THROWS_AS(k::lyapunov(a, q), NumericalError);
    }
    SUBCASE("residual on random stable systems") {
        Rng rng(23);
        for (int trial = 0; trial < 5; ++trial) {
            const Index n = 5 + 3 * trial;
            const Mat a = rng.skew(n) - rng.spd(n);
            const Mat q = rng.psd(n, n);
            const Mat x = k::lyapunov(a, q);
            CHECK((a * x + x * a.transpose() + q).norm() <= 1e-8 * q.norm());
        }
    }
}

TEST_CASE("care") {
    SUBCASE("scalar integrator") {
        Mat a(1, 1), b(1, 1), q(1, 1), r(1, 1);
        a << 0;
        b << 1;
        q << 1;
        r << 1;
        const Mat x = k::care(a, b, q, r);
        CHECK(x(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("zero cost with stable A") {
        Mat a(2, 2);
        a << -1, 0.3, -0.3, -2;
        const Mat x = k::care(a, Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Identity(2, 2));
        CHECK(x.norm() < 1e-9);
    }
    SUBCASE("unstable scalar, stabilizing root") {
        Mat a(1, 1), b(1, 1), q(1, 1), r(1, 1);
        a << 1;
        b << 1;
        q << 0;
        r << 1;
        const Mat x = k::care(a, b, q, r);
        CHECK(x(0, 0) == doctest::Approx(2.0));
    }
    SUBCASE("random: residual and closed-loop stability") {
        Rng rng(31);
        for (int trial = 0; trial < 3; ++trial) {
            const Index n = 4 + trial;
            const Mat a = rng.matrix(n, n);
            const Mat b = rng.matrix(n, 2);
            const Mat q = rng.psd(n, n);
            const Mat r = rng.spd(2);
            const Mat x = k::care(a, b, q, r);
            const Mat rinv_btx = k::solve_dense(r, Mat(b.transpose() * x));
            const Mat resid = a.transpose() * x + x * a - x * b * rinv_btx + q;
            CHECK(resid.norm() <= 1e-7 * std::max({q.norm(), x.norm() * a.norm(), 1.0}));
            CHECK(k::spectral_abscissa(a - b * rinv_btx) < 0.0);
        }
    }
}
