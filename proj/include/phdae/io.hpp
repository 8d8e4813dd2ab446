#pragma once

#include "phdae/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace phdae::io {

/// Matrix Market exchange format, dense "array" and sparse "coordinate"
/// flavours, real general/symmetric/skew-symmetric qualifiers.
Mat read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(const Mat& a, const std::filesystem::path& path);

/// JSON envelope {n, ell, m, matrices: {E,J,R,Q,G,P,S,N}} where each
/// matrix is an inline array-of-rows or a path to a .mtx file relative
/// to the envelope location. Values round-trip at 17 significant digits.
LtiPhDae load_envelope(const std::filesystem::path& path);

struct EnvelopeOptions {
    bool matrices_as_mtx = false;  ///< write .mtx side files instead of inline rows
};
void save_envelope(const LtiPhDae& sys, const std::filesystem::path& path,
                   const EnvelopeOptions& opt = {});

/// Shortest-round-trip decimal with at most 17 significant digits.
std::string format_double(double v);

/// CSV with a header row; every numeric cell via format_double.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace phdae::io
