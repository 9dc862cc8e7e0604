#pragma once

// Direct linear solve for tabular policy evaluation; the oracle for fixed
// points of the backup when every pair is in-distribution.

#include "pars/tabular_oracle.hpp"

namespace pars::oracle {

/// (I - gamma M) q = r over flattened (s, a) with M[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
inline Vector direct_policy_evaluation(const TabularMdp& m) {
    const int n = m.n_states * m.n_actions;
    auto idx = [&](int s, int a) { return s * m.n_actions + a; };
    Matrix A = Matrix::Identity(n, n);
    Vector b(n);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            b[idx(s, a)] = m.r(s, a);
            for (int s2 = 0; s2 < m.n_states; ++s2)
                for (int a2 = 0; a2 < m.n_actions; ++a2)
                    A(idx(s, a), idx(s2, a2)) -= m.gamma * m.P[static_cast<std::size_t>(a)](s, s2) * m.pi(s2, a2);
        }
    return A.partialPivLu().solve(b);
}

}  // namespace pars::oracle
