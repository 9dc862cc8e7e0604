#pragma once

// Hull membership as LP feasibility: q in conv(P) iff some lambda >= 0 has
// P lambda = q and sum lambda = 1. Decided by phase-one simplex (Bland's rule).

#include <cmath>
#include <vector>

#include "pars/nn_core.hpp"

namespace pars::oracle {

inline bool lp_in_hull(const Matrix& pts, const Vector& q, double tol = 1e-9) {
    const Eigen::Index d = pts.rows(), m = pts.cols();
    const Eigen::Index rows = d + 1;
    const Eigen::Index cols = m + rows;  // lambda then artificials
    Matrix t = Matrix::Zero(rows + 1, cols + 1);  // last column is rhs, last row the objective
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double rhs = r < d ? q[r] : 1.0;
        const double sign = rhs < 0 ? -1.0 : 1.0;
        for (Eigen::Index c = 0; c < m; ++c) t(r, c) = sign * (r < d ? pts(r, c) : 1.0);
        t(r, m + r) = 1.0;
        t(r, cols) = sign * rhs;
    }
    // objective: minimize sum of artificials, expressed in non-basic terms
    for (Eigen::Index r = 0; r < rows; ++r) t.row(rows) -= t.row(r);
    for (Eigen::Index r = 0; r < rows; ++r) t(rows, m + r) = 0.0;
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) basis[static_cast<std::size_t>(r)] = m + r;
    for (int iter = 0; iter < 10000; ++iter) {
        Eigen::Index enter = -1;
        for (Eigen::Index c = 0; c < cols; ++c)
            if (t(rows, c) < -1e-12) {
                enter = c;
                break;
            }
        if (enter < 0) break;
        Eigen::Index leave = -1;
        double best = 0.0;
        for (Eigen::Index r = 0; r < rows; ++r)
            if (t(r, enter) > 1e-12) {
                const double ratio = t(r, cols) / t(r, enter);
                if (leave < 0 || ratio < best - 1e-15
                    || (std::abs(ratio - best) <= 1e-15 && basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)])) {
                    leave = r;
                    best = ratio;
                }
            }
        if (leave < 0) break;
        t.row(leave) /= t(leave, enter);
        for (Eigen::Index r = 0; r <= rows; ++r)
            if (r != leave) t.row(r) -= t(r, enter) * t.row(leave);
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    return -t(rows, cols) <= tol;
}

}  // namespace pars::oracle
