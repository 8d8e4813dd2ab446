#pragma once

#include "phdae/matrix.hpp"

#include <cmath>
#include <cstdint>

namespace phdae {

/// Deterministic 64-bit generator (splitmix64 core). Used everywhere
/// randomness appears so that model builders, benchmarks and tests are
/// reproducible from a single documented seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Mat matrix(Index rows, Index cols) {
        Mat a(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) a(i, j) = normal();
        return a;
    }

    Vec vector(Index n) {
        Vec v(n);
        for (Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    Mat skew(Index n) {
        Mat a = matrix(n, n);
        return 0.5 * (a - a.transpose());
    }

    /// Random symmetric positive semidefinite matrix of the given rank
    /// (exactly symmetric, not just to roundoff).
    Mat psd(Index n, Index rank) {
        if (rank <= 0) return Mat::Zero(n, n);
        Mat f = matrix(n, rank);
        Mat a = f * f.transpose() / static_cast<double>(rank);
        return 0.5 * (a + a.transpose());
    }

    /// Random symmetric positive definite matrix, eigenvalues bounded away
    /// from zero.
    Mat spd(Index n) {
        Mat a = psd(n, n + 2);
        return a + 0.1 * Mat::Identity(n, n);
    }

    /// Random orthogonal matrix (QR of a Gaussian matrix).
    Mat orthogonal(Index n) {
        Eigen::HouseholderQR<Mat> qr(matrix(n, n));
        Mat q = qr.householderQ();
        return q;
    }

private:
    std::uint64_t state_;
};

}  // namespace phdae
