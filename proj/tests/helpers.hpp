#pragma once

#include "phdae/core.hpp"
#include "phdae/rng.hpp"

namespace phdae::testing {

/// Random standard-form pHDAE (Q = I, P = 0, no feedthrough) with PSD E
/// of the requested rank (full rank by default) and PSD R of random rank.
inline LtiPhDae random_standard_phdae(Rng& rng, Index n, Index m, Index e_rank = -1,
                                      Index r_rank = -2) {
    if (e_rank < 0) e_rank = n;
    if (r_rank == -2) r_rank = 1 + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n));
    const Mat e = rng.psd(n, e_rank) + (e_rank >= n ? 0.05 : 0.0) * Mat::Identity(n, n);
    const Mat j = rng.skew(n);
    const Mat r = rng.psd(n, std::max<Index>(r_rank, 0));
    const Mat g = rng.matrix(n, m);
    return LtiPhDae::standard(e, j, r, g);
}

/// Random fully general valid pHDAE: invertible Q, dissipation matrix
/// assembled PSD by construction.
inline LtiPhDae random_general_phdae(Rng& rng, Index n, Index m) {
    const Mat q = rng.spd(n) + rng.skew(n);  // generic invertible
    const Mat qinv = q.inverse();
    const Mat w = rng.psd(n + m, n + m);
    const Mat w11 = w.topLeftCorner(n, n);
    const Mat w12 = w.topRightCorner(n, m);
    const Mat w22 = w.bottomRightCorner(m, m);
    const Mat r = qinv.transpose() * w11 * qinv;
    const Mat p = qinv.transpose() * w12;
    const Mat s = 0.5 * (w22 + w22.transpose());
    const Mat nn = rng.skew(m);
    const Mat j = rng.skew(n);
    const Mat e = qinv.transpose() * rng.psd(n, n);  // Q^T E symmetric PSD
    const Mat g = rng.matrix(n, m);
    return LtiPhDae::general(e, j, r, q, g, p, s, nn);
}

}  // namespace phdae::testing
