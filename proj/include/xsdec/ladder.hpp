#pragma once

#include <cmath>
#include <vector>

#include "xsdec/errors.hpp"

namespace xsdec {

// Geometric inverse-temperature ladder. b[0] = 0 (prior replica); for l >= 2
// (1-based) b_l = anchor * xi^(l - L + 2), so the anchor value sits exactly at
// rung L-2 and the two hottest-precision rungs extend past it by xi and xi^2.
struct ReplicaLadder {
    int L = 0;
    double xi = 0.0;
    double b_anchor = 0.0;
    std::vector<double> b;

    int anchor_index() const { return L - 3; } // 0-based index of rung L-2
};

inline ReplicaLadder build_ladder(int L, double xi, double b_anchor) {
    if (L < 3) throw config_error("build_ladder: need at least 3 replicas");
    if (!(xi > 1.0)) throw config_error("build_ladder: xi must exceed 1");
    if (!(b_anchor > 0.0)) throw config_error("build_ladder: anchor must be positive");
    ReplicaLadder ladder{L, xi, b_anchor, {}};
    ladder.b.resize(L);
    ladder.b[0] = 0.0;
    for (int l = 2; l <= L; ++l) {
        ladder.b[l - 1] = b_anchor * std::pow(xi, static_cast<double>(l - L + 2));
    }
    return ladder;
}

// Ladders used throughout: the published proposed/conventional settings and a
// coarser one for desk-scale runs.
inline ReplicaLadder proposed_ladder() { return build_ladder(92, 1.18, 3000.0); }
inline ReplicaLadder conventional_ladder() { return build_ladder(120, 1.132, 3000.0); }
inline ReplicaLadder desk_ladder() { return build_ladder(56, 1.30, 3000.0); }

} // namespace xsdec
