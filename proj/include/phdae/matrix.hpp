#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace phdae {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Raised when an input violates an operation's contract.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical method cannot deliver its contract
/// (singular matrix, non-convergence, failed structural check).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Mat& a) { return a.allFinite(); }

inline void require_finite(const Mat& a, const char* name) {
    if (!a.allFinite()) throw InvalidInput(std::string(name) + " contains non-finite entries");
}

inline void require_square(const Mat& a, const char* name) {
    if (a.rows() != a.cols())
        throw InvalidInput(std::string(name) + " must be square, got " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline Mat sym_part(const Mat& a) { return 0.5 * (a + a.transpose()); }
inline Mat skew_part(const Mat& a) { return 0.5 * (a - a.transpose()); }

/// Frobenius norm with a floor, for use in relative tolerances of
/// possibly-zero matrices.
inline double norm_or_one(const Mat& a) {
    const double n = a.norm();
    return n > 0.0 ? n : 1.0;
}

inline double sym_defect(const Mat& a) { return (a - a.transpose()).norm(); }
inline double skew_defect(const Mat& a) { return (a + a.transpose()).norm(); }

}  // namespace phdae
