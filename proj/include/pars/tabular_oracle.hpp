#pragma once

// Finite MDPs on which the three-case backup (standard on data support, kNN
// average inside the support hull, Q_min outside) can be applied exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <tuple>
#include <vector>

#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"
#include "pars/text_io.hpp"

namespace pars {

using QTable = Matrix;  // n_states x n_actions

struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Matrix> P;  // P[a](s, s') = P(s' | s, a)
    Matrix r;               // n_states x n_actions
    Matrix pi;              // evaluation policy, pi(s, a)
    double gamma = 0.9;

    /// Action a sits at -1 + 2a / (n_actions - 1) on the line.
    double embedding(int a) const { return n_actions > 1 ? -1.0 + 2.0 * a / (n_actions - 1) : 0.0; }

    double r_min() const { return r.minCoeff(); }
    double q_min() const { return r_min() / (1.0 - gamma); }

    void validate() const {
        if (n_states < 1 || n_actions < 1) throw InvalidArgument("mdp: need at least one state and action");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("mdp: gamma must lie in [0, 1)");
        if (static_cast<int>(P.size()) != n_actions || r.rows() != n_states || r.cols() != n_actions
            || pi.rows() != n_states || pi.cols() != n_actions)
            throw ShapeError("mdp: tensor shapes disagree with state/action counts");
        if (!r.allFinite()) throw InvalidArgument("mdp: rewards must be finite");
        for (const auto& pa : P) {
            if (pa.rows() != n_states || pa.cols() != n_states) throw ShapeError("mdp: transition matrix shape");
            if ((pa.array() < 0.0).any() || ((pa.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
                throw InvalidArgument("mdp: transition rows must be distributions");
        }
        if ((pi.array() < 0.0).any() || ((pi.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
            throw InvalidArgument("mdp: policy rows must be distributions");
    }
};

enum class PairLabel { ID, OodIn, OodOut };

struct TabularLabels {
    std::vector<std::vector<PairLabel>> label;  // [s][a]

    PairLabel at(int s, int a) const { return label[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]; }
    long count(PairLabel l) const {
        long n = 0;
        for (const auto& row : label) n += std::count(row.begin(), row.end(), l);
        return n;
    }
};

/// Labels from a support mask: supported pairs are ID; the rest are OOD-in
/// when their embedding lies within the state's [min, max] supported
/// embedding, else OOD-out.
inline TabularLabels labels_from_support(const TabularMdp& m, const std::vector<std::vector<bool>>& support) {
    TabularLabels out;
    for (int s = 0; s < m.n_states; ++s) {
        const auto& row = support[static_cast<std::size_t>(s)];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int a = 0; a < m.n_actions; ++a)
            if (row[static_cast<std::size_t>(a)]) {
                lo = std::min(lo, m.embedding(a));
                hi = std::max(hi, m.embedding(a));
            }
        std::vector<PairLabel> labels;
        for (int a = 0; a < m.n_actions; ++a) {
            const double e = m.embedding(a);
            labels.push_back(row[static_cast<std::size_t>(a)] ? PairLabel::ID
                             : (e >= lo && e <= hi)         ? PairLabel::OodIn
                                                            : PairLabel::OodOut);
        }
        out.label.push_back(std::move(labels));
    }
    return out;
}

inline Matrix random_stochastic_rows(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = -std::log(1.0 - rng.uniform());  // Dirichlet(1) via exponentials
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

struct RandomMdp {
    TabularMdp mdp;
    std::vector<std::vector<bool>> support;
    TabularLabels labels;
};

/// Random transitions, rewards in [0, 1], a random evaluation policy and a
/// per-state support with every action kept with probability support_density
/// (at least one per state).
inline RandomMdp build_random_mdp(int n_states, int n_actions, double support_density, std::uint64_t seed,
                                  double gamma = 0.9) {
    if (n_states < 2 || n_actions < 2) throw InvalidArgument("build_random_mdp: need >= 2 states and actions");
    if (!(support_density > 0.0 && support_density <= 1.0))
        throw InvalidArgument("build_random_mdp: support_density must lie in (0, 1]");
    Rng rng(derive_seed(seed, "mdp"));
    RandomMdp out;
    TabularMdp& m = out.mdp;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    for (int a = 0; a < n_actions; ++a) m.P.push_back(random_stochastic_rows(n_states, n_states, rng));
    m.r = Matrix::NullaryExpr(n_states, n_actions, [&] { return rng.uniform(); });
    m.pi = random_stochastic_rows(n_states, n_actions, rng);
    for (int s = 0; s < n_states; ++s) {
        std::vector<bool> row(static_cast<std::size_t>(n_actions));
        bool any = false;
        for (int a = 0; a < n_actions; ++a) {
            row[static_cast<std::size_t>(a)] = support_density >= 1.0 || rng.uniform() < support_density;
            any = any || row[static_cast<std::size_t>(a)];
        }
        if (!any) row[static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(n_actions)))] = true;
        out.support.push_back(std::move(row));
    }
    m.validate();
    out.labels = labels_from_support(m, out.support);
    return out;
}

/// Standard policy-evaluation backup r + gamma * P V with V(s') = sum pi Q.
inline QTable policy_backup(const TabularMdp& m, const QTable& q) {
    const Vector v = (m.pi.cwiseProduct(q)).rowwise().sum();
    QTable out(m.n_states, m.n_actions);
    for (int a = 0; a < m.n_actions; ++a) out.col(a) = m.r.col(a) + m.gamma * (m.P[static_cast<std::size_t>(a)] * v);
    return out;
}

/// The k ID pairs nearest to (s, a) under |ds| + |d embedding|; ties go to
/// the lower (state, action) index.
inline std::vector<std::pair<int, int>> nearest_id_pairs(const TabularMdp& m, const TabularLabels& l, int s, int a,
                                                         int k) {
    std::vector<std::tuple<double, int, int>> cand;
    for (int s2 = 0; s2 < m.n_states; ++s2)
        for (int a2 = 0; a2 < m.n_actions; ++a2)
            if (l.at(s2, a2) == PairLabel::ID)
                cand.emplace_back(std::abs(s - s2) + std::abs(m.embedding(a) - m.embedding(a2)), s2, a2);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(std::get<1>(cand[i]), std::get<2>(cand[i]));
    return out;
}

/// Precomputed neighbor lists so repeated applications skip the scan.
struct TParsOperator {
    const TabularMdp* mdp;
    const TabularLabels* labels;
    std::vector<std::vector<std::vector<std::pair<int, int>>>> neighbors;  // [s][a], OOD-in only

    TParsOperator(const TabularMdp& m, const TabularLabels& l, int k) : mdp(&m), labels(&l) {
        if (k < 1) throw InvalidArgument("apply_t_pars: k must be >= 1");
        if (l.count(PairLabel::ID) == 0) throw InvalidArgument("apply_t_pars: no ID pairs");
        neighbors.resize(static_cast<std::size_t>(m.n_states));
        for (int s = 0; s < m.n_states; ++s) {
            neighbors[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(m.n_actions));
            for (int a = 0; a < m.n_actions; ++a)
                if (l.at(s, a) == PairLabel::OodIn)
                    neighbors[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = nearest_id_pairs(m, l, s, a, k);
        }
    }

    QTable operator()(const QTable& q) const {
        const TabularMdp& m = *mdp;
        const QTable t = policy_backup(m, q);
        const double q_min = m.q_min();
        QTable out(m.n_states, m.n_actions);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                switch (labels->at(s, a)) {
                    case PairLabel::ID: out(s, a) = t(s, a); break;
                    case PairLabel::OodIn: {
                        const auto& nb = neighbors[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                        double sum = 0.0;
                        for (const auto& [s2, a2] : nb) sum += t(s2, a2);
                        out(s, a) = sum / static_cast<double>(nb.size());
                        break;
                    }
                    case PairLabel::OodOut: out(s, a) = q_min; break;
                }
            }
        return out;
    }
};

inline QTable apply_t_pars(const QTable& q, const TabularMdp& m, const TabularLabels& l, int k = 3) {
    return TParsOperator(m, l, k)(q);
}

inline double sup_norm(const QTable& q) { return q.cwiseAbs().maxCoeff(); }

/// Largest ||T Q1 - T Q2|| / ||Q1 - Q2|| (sup norm) over random pairs; pairs
/// with Q1 == Q2 are skipped. Returns 0 when every pair was skipped.
inline double verify_contraction(const TabularMdp& m, const TabularLabels& l, int k, int trials, std::uint64_t seed) {
    if (trials < 1) throw InvalidArgument("verify_contraction: trials must be >= 1");
    const TParsOperator t(m, l, k);
    Rng rng(derive_seed(seed, "pairs"));
    const double scale = std::max(1.0, std::abs(m.q_min()));
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
        const QTable q1 = QTable::NullaryExpr(m.n_states, m.n_actions, [&] { return rng.uniform(-scale, scale); });
        const QTable q2 = QTable::NullaryExpr(m.n_states, m.n_actions, [&] { return rng.uniform(-scale, scale); });
        const double den = sup_norm(q1 - q2);
        if (den == 0.0) continue;
        worst = std::max(worst, sup_norm(t(q1) - t(q2)) / den);
    }
    return worst;
}

struct FixedPointResult {
    QTable q;
    int iterations = 0;              // t with ||Q_{t+1} - Q_t|| < tol first
    std::vector<double> residuals;   // residuals[t] = ||Q_{t+1} - Q_t||
};

/// Iterates from Q_0 = 0; returns Q_{t+1} for the first t whose residual
/// drops below tol.
inline FixedPointResult fixed_point_iterate(const TabularMdp& m, const TabularLabels& l, int k, double tol,
                                            int max_iterations = 100000) {
    if (!(tol > 0.0)) throw InvalidArgument("fixed_point_iterate: tol must be positive");
    const TParsOperator t(m, l, k);
    FixedPointResult res;
    QTable q = QTable::Zero(m.n_states, m.n_actions);
    for (int it = 0; it < max_iterations; ++it) {
        QTable next = t(q);
        const double r = sup_norm(next - q);
        res.residuals.push_back(r);
        q = std::move(next);
        if (r < tol) {
            res.iterations = it;
            res.q = std::move(q);
            return res;
        }
    }
    throw DivergenceError("fixed_point_iterate: no convergence within the iteration limit");
}

/// Upper bound on iterations implied by the contraction modulus.
inline int iteration_bound(double gamma, double first_residual, double tol) {
    if (first_residual < tol) return 0;
    if (gamma == 0.0) return 1;
    return static_cast<int>(std::ceil(std::log(tol * (1.0 - gamma) / first_residual) / std::log(gamma))) + 1;
}

struct CertificationRow {
    std::uint64_t seed = 0;
    double gamma = 0.0;
    double max_ratio = 0.0;
    int iterations = 0;
    double final_residual = 0.0;
};

inline void write_certification_csv(std::ostream& os, const std::vector<CertificationRow>& rows) {
    os << "instance_seed,gamma,max_ratio,iterations,final_residual\n";
    for (const auto& r : rows)
        os << r.seed << ',' << format_real(r.gamma) << ',' << format_real(r.max_ratio) << ',' << r.iterations << ','
           << format_real(r.final_residual) << '\n';
}

}  // namespace pars
