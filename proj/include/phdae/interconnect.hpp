#pragma once

#include "phdae/core.hpp"

namespace phdae::interconnect {

/// Raised when a feedback coupling would break the pH structure; carries
/// the dissipation defect for diagnosis.
class CouplingError : public NumericalError {
public:
    CouplingError(const std::string& what, double defect_)
        : NumericalError(what), defect(defect_) {}
    double defect;
};

/// Output-feedback coupling u = F y + w of two standard-form systems
/// stacked block-diagonally: (E, J + G F_skew G^T, R - G F_sym G^T, G).
/// Refuses couplings whose combined dissipation R - G F_sym G^T is not
/// PSD.
LtiPhDae couple_feedback(const LtiPhDae& a, const LtiPhDae& b, const Mat& f,
                         double tol = 1e-10);

/// General power-conserving interconnection M u + L y = 0: the extended
/// construction with new states (u1, u2, y1, y2) and the relation rows
/// appended; always structurally a pHDAE, with ell = n + m1 + m2.
LtiPhDae couple_general(const LtiPhDae& a, const LtiPhDae& b, const Mat& m_rel,
                        const Mat& l_rel, double tol = 1e-10);

/// Convenience pipeline: the extended coupling raises the index, so when
/// the relation resolves to an output feedback u = -M^{-1} L y the small
/// feedback form is built instead (behavior-equivalent with the port
/// states eliminated). Throws when M is singular or the resolved
/// feedback injects energy.
LtiPhDae couple_reduced(const LtiPhDae& a, const LtiPhDae& b, const Mat& m_rel,
                        const Mat& l_rel, double tol = 1e-10);

}  // namespace phdae::interconnect
