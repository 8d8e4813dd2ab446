#pragma once

#include "phdae/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace phdae::transform {

/// Orthogonal staircase condensed form of a dHDAE triple (E, J, R):
///
///   Z^T E Z, Z^T (J-R) Z block-partitioned with sizes (n1, n2, n3, n4, n5),
///   n1 = n4, [E11 E12; E21 E22] SPD, J33 - R33 and J41 = -J14^T nonsingular.
///
/// Index and regularity verdicts are read off the block sizes.
struct StaircaseDecomposition {
    Mat Z;                   ///< n x n orthogonal
    Mat Et, Jt, Rt;          ///< Z^T E Z, Z^T J Z, Z^T R Z
    Index n1 = 0, n2 = 0, n3 = 0, n4 = 0, n5 = 0;

    bool regular = false;          ///< n5 == 0
    bool unique_solutions = false; ///< same as regular for dHDAEs
    int kronecker_index = -1;      ///< 0, 1 or 2; -1 when singular

    /// sigma_rank / sigma_{rank+1} at each of the three rank decisions
    /// (E, J22-R22, J31); inf when the cut was clean or unused.
    std::array<double, 3> rank_gaps{};
    /// Largest magnitude found in a block the theory says is zero.
    double zero_defect = 0.0;

    std::array<Index, 5> sizes() const { return {n1, n2, n3, n4, n5}; }
    std::array<Index, 5> offsets() const;
    Mat eblock(int i, int j) const;
    Mat ablock(int i, int j) const;  ///< block of Jt - Rt
    Mat jblock(int i, int j) const;
    Mat rblock(int i, int j) const;
    std::string index_label() const;
};

StaircaseDecomposition staircase_dhdae(const Mat& e, const Mat& j, const Mat& r,
                                       double tol = -1.0);

/// Result of removing the Q factor (sec. "removing Q"): when Q has full
/// column rank the whole system is rewritten with Q = I; a rank-deficient
/// Q splits off a subsystem that carries the Hamiltonian while the
/// remaining z2 dynamics have no pH structure and are reported separately.
struct QRemoval {
    LtiPhDae system;          ///< structured part, Q = I
    bool split_performed = false;
    Index removed_dim = 0;    ///< dimension of the separated z2 part
    Mat state_map;            ///< n x n1: original z = state_map * z1 (+ z2 part)
};

QRemoval remove_q(const LtiPhDae& sys, double tol = -1.0);

/// State-extension that removes the feedthrough D = S - N (and P),
/// preserving the input-output map and the Hamiltonian.
struct FeedthroughRemoval {
    LtiPhDae system;             ///< extended system, no feedthrough, no P
    Index extension_dim = 0;     ///< rank of D
    double d1_condition = 0.0;   ///< condition number of the inverted block
    bool ill_conditioned = false;
};

FeedthroughRemoval remove_feedthrough(const LtiPhDae& sys, double tol = -1.0,
                                      double cond_warn = 1e12);

/// Semi-explicit split of an index <= 1 system with Q = I, P = 0, D = 0:
///
///   [E11 0; 0 0] [z1'; z2'] = [J11-R11, J12-R12; -(J12+R12)^T, J22-R22]
///                             [z1; z2] + [G1; G2] u
///
/// with E11 SPD (or identity after normalization) and J22 - R22
/// nonsingular.
struct SemiExplicitParts {
    Mat V0;  ///< n x n congruence, V0^T E V0 = diag(E11, 0) (orthogonal
             ///< unless E11 was normalized to I)
    Index n1 = 0, n2 = 0;
    bool e11_is_identity = false;
    Mat E11, J11, J12, J22, R11, R12, R22, G1, G2;

    Index n() const { return n1 + n2; }
    Index m() const { return G1.cols(); }
    Mat e_full() const;
    Mat j_full() const;
    Mat r_full() const;
    Mat a_full() const { return j_full() - r_full(); }
    Mat g_full() const;
    LtiPhDae as_system() const;
};

SemiExplicitParts semi_explicit_split(const LtiPhDae& sys, bool normalize_e11,
                                      double tol = -1.0);

/// Underlying implicit pHODE of a regular staircase form: the E22-block
/// dynamics after eliminating z1 = z3 = z4 = 0, with conserved
/// common-kernel directions of the resulting (J, R) pair split off so
/// that the returned E is SPD and the pair drives genuine dynamics.
struct ReducedOde {
    Mat E;  ///< SPD, dynamic dimension
    Mat J;  ///< skew
    Mat R;  ///< PSD
    Mat G;  ///< input map; 0 x 0 when reduced without inputs

    Index steady_dim = 0;   ///< deflated conserved directions
    Mat steady_modes;       ///< staircase-z2 coordinates, one column each
    Mat dynamic_basis;      ///< z2 = dynamic_basis * zeta (+ steady part)
    Mat z3_coupling;        ///< z3 = z3_coupling * z2 on consistent states
    Mat Z;                  ///< staircase transform of the source system

    LtiPhDae as_system() const;
};

ReducedOde reduce_to_ode(const StaircaseDecomposition& dec);
/// Variant keeping the port matrices; requires the inputs not to load the
/// purely algebraic rows (staircase blocks 3 and 4), which holds for all
/// built-in models.
ReducedOde reduce_to_ode(const StaircaseDecomposition& dec, const Mat& g,
                         double tol = -1.0);

/// Condensed form for pHDAEs (Q = I, P = 0, no feedthrough): orthogonal
/// state transform V and input transform U exposing six state blocks and
/// three input blocks; E22, J33-R33, J15, G42, G63 invertible.
struct CondensedPhDae {
    Mat V;  ///< n x n orthogonal
    Mat U;  ///< m x m orthogonal
    std::array<Index, 6> block_sizes{};
    std::array<Index, 3> input_sizes{};
    Index null_dim = 0;  ///< removed common-kernel part (trailing state block)
    Mat Et, Jt, Rt, Gt;  ///< V^T E V, V^T J V, V^T R V, V^T G U

    struct Certificate {
        std::string block;
        double min_singular_value = 0.0;
        double scale = 0.0;
        bool invertible = false;
        bool marginal = false;  ///< tolerance-marginal decision
    };
    std::vector<Certificate> certificates;
    double zero_defect = 0.0;

    std::array<Index, 7> offsets() const;  ///< offsets of the 6 blocks + null block
};

CondensedPhDae condensed_phdae(const LtiPhDae& sys, double tol = -1.0);

/// Output feedback u = -W y + w with W + W^T > 0; the closed loop
/// (E, J - G W_skew G^T, R + G W_sym G^T, G) of a system in the reduced
/// condensed form is regular of index <= 1.
struct RegularizationResult {
    LtiPhDae closed;
    Mat feedback;
    StaircaseDecomposition verdict;
};

RegularizationResult regularize_output_feedback(const LtiPhDae& sys,
                                                const Mat* w_choice = nullptr,
                                                double tol = -1.0);

}  // namespace phdae::transform
