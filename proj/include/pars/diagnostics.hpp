#pragma once

// Measurement instruments: dormant units, normalized NTK maps, offline SARSA
// with a max-Q probe, and hull-based OOD labels for small action sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

#include "pars/data_store.hpp"
#include "pars/dormant.hpp"
#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"
#include "pars/text_io.hpp"

namespace pars {

// ---------------------------------------------------------------------------
// NTK

struct NtkMap {
    Vector ref;
    Matrix grid;                // dim x n query points
    Vector values;              // NaN where undefined
    std::vector<bool> defined;  // false when a gradient vanishes

    double mean_defined() const {
        double sum = 0.0;
        long n = 0;
        for (Eigen::Index k = 0; k < values.size(); ++k)
            if (defined[static_cast<std::size_t>(k)]) {
                sum += values[k];
                ++n;
            }
        return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
};

/// Flattened d f(x) / d theta for a scalar-output network.
inline Vector param_gradient(const MlpParams& p, const Vector& x) {
    if (p.spec.output_dim != 1) throw ShapeError("param_gradient: network must have scalar output");
    return flatten(mlp_grad(p, Matrix(x), Matrix::Ones(1, 1)));
}

/// <g_a, g_b> / (|g_a| |g_b|), undefined when either gradient vanishes.
inline std::optional<double> normalized_kernel(const Vector& g_a, const Vector& g_b) {
    const double k_aa = g_a.squaredNorm(), k_bb = g_b.squaredNorm();
    if (!(k_aa > 0.0) || !(k_bb > 0.0)) return std::nullopt;
    return std::clamp(g_a.dot(g_b) / std::sqrt(k_aa * k_bb), -1.0, 1.0);
}

/// K(ref, x) / sqrt(K(ref, ref) K(x, x)) with K the empirical tangent kernel.
inline NtkMap ntk_similarity(const MlpParams& p, const Vector& ref, const Matrix& grid) {
    if (p.spec.output_dim != 1) throw ShapeError("ntk_similarity: network must have scalar output");
    if (ref.size() != p.spec.input_dim || grid.rows() != p.spec.input_dim)
        throw ShapeError("ntk_similarity: point dimension differs from network input");
    NtkMap m;
    m.ref = ref;
    m.grid = grid;
    m.values.resize(grid.cols());
    m.defined.assign(static_cast<std::size_t>(grid.cols()), false);
    const Vector g_ref = param_gradient(p, ref);
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
        const auto v = normalized_kernel(g_ref, param_gradient(p, grid.col(c)));
        m.values[c] = v.value_or(std::numeric_limits<double>::quiet_NaN());
        m.defined[static_cast<std::size_t>(c)] = v.has_value();
    }
    return m;
}

/// n x n grid over [lo, hi]^2, row-major from (lo, lo), as columns.
inline Matrix square_grid(double lo, double hi, int n) {
    if (n < 2) throw InvalidArgument("square_grid: need at least 2 points per side");
    Matrix g(2, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            g(0, i * n + j) = lo + (hi - lo) * j / (n - 1);
            g(1, i * n + j) = lo + (hi - lo) * i / (n - 1);
        }
    return g;
}

inline void write_ntk_csv(std::ostream& os, const NtkMap& m) {
    for (Eigen::Index d = 0; d < m.grid.rows(); ++d) os << 'x' << d << ',';
    os << "similarity,defined\n";
    for (Eigen::Index c = 0; c < m.grid.cols(); ++c) {
        for (Eigen::Index d = 0; d < m.grid.rows(); ++d) os << format_real(m.grid(d, c)) << ',';
        os << format_real(m.values[c]) << ',' << (m.defined[static_cast<std::size_t>(c)] ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Offline SARSA

struct SarsaOptions {
    double gamma = 0.99;
    double lr = 3e-4;
    double tau = 5e-3;
    int batch_size = 256;
};

/// One TD sample with its successor action taken from the next record.
struct SarsaSample {
    std::size_t index;
    Vector a_next;  // empty for terminal records
};

/// Pairs every usable record with its successor action. Terminal records need
/// none; truncated records have no successor and are skipped. A record that is
/// neither and whose successor state differs from the next record's state
/// breaks episode continuity.
inline std::vector<SarsaSample> sarsa_samples(const TransitionDataset& ds) {
    std::vector<SarsaSample> out;
    const auto& ts = ds.transitions;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i].done) {
            out.push_back({i, Vector()});
        } else if (!ts[i].truncated) {
            if (i + 1 >= ts.size() || ts[i + 1].s != ts[i].s_next)
                throw InvalidArgument("train_sarsa_q: record " + std::to_string(i)
                                      + " has no successor record (episode continuity broken)");
            out.push_back({i, ts[i + 1].a});
        }
    }
    if (out.empty()) throw InvalidArgument("train_sarsa_q: no usable transitions");
    return out;
}

/// Q(s, a) fit by TD on dataset tuples (s, a, r, s', a') with a Polyak target.
inline MlpParams train_sarsa_q(const TransitionDataset& ds, const MlpSpec& spec, int steps, std::uint64_t seed,
                               const SarsaOptions& opt = {}) {
    spec.validate();
    if (spec.input_dim != ds.state_dim + ds.action_dim || spec.output_dim != 1)
        throw ShapeError("train_sarsa_q: critic must map (s, a) to a scalar");
    if (steps < 0) throw InvalidArgument("train_sarsa_q: steps must be >= 0");
    const std::vector<SarsaSample> samples = sarsa_samples(ds);
    MlpParams q = mlp_init(spec, derive_seed(seed, "init"));
    MlpParams q_target = q;
    AdamState adam = AdamState::for_params(q, opt.lr);
    Rng rng(derive_seed(seed, "sampling"));
    const auto n = static_cast<Eigen::Index>(opt.batch_size);
    const auto sd = ds.state_dim, ad = ds.action_dim;
    Matrix x(sd + ad, n), x_next(sd + ad, n);
    Vector r(n), cont(n);
    for (int step = 0; step < steps; ++step) {
        for (Eigen::Index c = 0; c < n; ++c) {
            const SarsaSample& smp = samples[static_cast<std::size_t>(rng.index(samples.size()))];
            const Transition& t = ds.transitions[smp.index];
            x.col(c) << t.s, t.a;
            r[c] = t.r;
            if (smp.a_next.size()) {
                x_next.col(c) << t.s_next, smp.a_next;
                cont[c] = 1.0;
            } else {
                x_next.col(c) << t.s_next, t.a;
                cont[c] = 0.0;
            }
        }
        const Vector y = r + opt.gamma * cont.cwiseProduct(forward_batch(q_target, x_next).row(0).transpose());
        const ForwardTrace tr = forward_batch_traced(q, x);
        const Matrix g = 2.0 * (tr.output.row(0) - y.transpose());
        adam_update(q, mlp_backward(q, tr, g).params, adam);
        soft_update_inplace(q_target, q, opt.tau);
    }
    return q;
}

// ---------------------------------------------------------------------------
// Max-Q probe

/// Values Q(s, a) (1 x n) and action gradients dQ/da (action_dim x n).
using QWithActionGrad = std::function<std::pair<RowVector, Matrix>(const Matrix& states, const Matrix& actions)>;

inline QWithActionGrad critic_as_q(const MlpParams& critic) {
    return [&critic](const Matrix& s, const Matrix& a) {
        Matrix x(s.rows() + a.rows(), s.cols());
        x << s, a;
        const ForwardTrace t = forward_batch_traced(critic, x);
        const Gradients g = mlp_backward(critic, t, Matrix::Ones(1, s.cols()));
        return std::make_pair(RowVector(t.output.row(0)), Matrix(g.inputs.bottomRows(a.rows())));
    };
}

struct MaxQOptions {
    std::vector<int> hidden_dims{64, 64};
    int steps = 2000;
    int batch_size = 256;
    double lr = 1e-3;
    double final_lr_fraction = 0.05;  // linear decay keeps the final iterates from jittering
};

struct MaxQReport {
    double mean_data_norm = 0.0;   // normalized by the box's maximum norm
    double mean_max_q_norm = 0.0;  // same normalization
    Matrix actions;                // action_dim x n, one per probed state
};

/// Trains a state -> action network (tanh onto the box) to maximize a frozen
/// Q, then reports normalized mean action norms over `states`.
inline MaxQReport max_q_probe(const QWithActionGrad& q, const Matrix& states, const Matrix& data_actions,
                              const Vector& low, const Vector& high, std::uint64_t seed, const MaxQOptions& opt = {}) {
    if (states.cols() == 0) throw InvalidArgument("max_q_probe: no states");
    const auto ad = low.size();
    MlpSpec spec;
    spec.input_dim = static_cast<int>(states.rows());
    spec.hidden_dims = opt.hidden_dims;
    spec.output_dim = static_cast<int>(ad);
    MlpParams pi = mlp_init(spec, derive_seed(seed, "init"));
    AdamState adam = AdamState::for_params(pi, opt.lr);
    Rng rng(derive_seed(seed, "sampling"));
    const Vector mid = (high + low) * 0.5, half = (high - low) * 0.5;
    auto squash = [&](const Matrix& raw) -> Matrix {
        return (half.asDiagonal() * raw.array().tanh().matrix()).colwise() + mid;
    };
    const auto n = std::min<Eigen::Index>(opt.batch_size, states.cols());
    Matrix s(states.rows(), n);
    for (int step = 0; step < opt.steps; ++step) {
        for (Eigen::Index c = 0; c < n; ++c) s.col(c) = states.col(static_cast<Eigen::Index>(rng.index(states.cols())));
        const ForwardTrace t = forward_batch_traced(pi, s);
        const auto [val, dq] = q(s, squash(t.output));
        (void)val;
        const Matrix dsq = half.asDiagonal() * (1.0 - t.output.array().tanh().square()).matrix();
        const double frac = opt.steps > 1 ? static_cast<double>(step) / (opt.steps - 1) : 0.0;
        adam.lr = opt.lr * (1.0 - (1.0 - opt.final_lr_fraction) * frac);
        adam_update(pi, mlp_backward(pi, t, -dq.cwiseProduct(dsq)).params, adam);
    }
    MaxQReport rep;
    rep.actions = squash(forward_batch(pi, states));
    const double max_norm = max_box_norm(low, high);
    rep.mean_max_q_norm = rep.actions.colwise().norm().mean() / max_norm;
    rep.mean_data_norm = data_actions.cols() ? data_actions.colwise().norm().mean() / max_norm : 0.0;
    return rep;
}

inline MaxQReport max_q_probe(const MlpParams& critic, const TransitionDataset& ds, std::uint64_t seed,
                              const MaxQOptions& opt = {}) {
    if (ds.transitions.empty()) throw InvalidArgument("max_q_probe: empty dataset");
    const Batch b = to_batch(ds.transitions);
    return max_q_probe(critic_as_q(critic), b.s, b.a, ds.feasible_low, ds.feasible_high, seed, opt);
}

// ---------------------------------------------------------------------------
// OOD regions for a state's action set

enum class RegionLabel { ID, OodIn, OodOut };

inline std::string_view to_string(RegionLabel l) {
    switch (l) {
        case RegionLabel::ID: return "ID";
        case RegionLabel::OodIn: return "OOD-in";
        case RegionLabel::OodOut: return "OOD-out";
    }
    return "?";
}

inline double default_eps_id(const Vector& low, const Vector& high) { return 0.01 * (high - low).norm(); }

namespace detail {

inline constexpr double kHullTol = 1e-12;

using P2 = std::array<double, 2>;

inline double cross(const P2& o, const P2& a, const P2& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
inline std::vector<P2> hull_2d(std::vector<P2> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<P2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
        while (k >= lo && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

inline bool on_segment_2d(const P2& a, const P2& b, const P2& q, double scale) {
    const double tol = kHullTol * scale;
    if (std::abs(cross(a, b, q)) > tol * std::max(1.0, std::hypot(b[0] - a[0], b[1] - a[1]))) return false;
    return q[0] >= std::min(a[0], b[0]) - tol && q[0] <= std::max(a[0], b[0]) + tol
           && q[1] >= std::min(a[1], b[1]) - tol && q[1] <= std::max(a[1], b[1]) + tol;
}

inline bool in_hull_2d(const std::vector<P2>& h, const P2& q, double scale) {
    if (h.empty()) return false;
    if (h.size() == 1) return std::hypot(q[0] - h[0][0], q[1] - h[0][1]) <= kHullTol * scale;
    if (h.size() == 2) return on_segment_2d(h[0], h[1], q, scale);
    for (std::size_t i = 0; i < h.size(); ++i)
        if (cross(h[i], h[(i + 1) % h.size()], q) < -kHullTol * scale * scale) return false;
    return true;
}

/// Carathéodory: q is in the hull of a 3-D set iff it lies in a simplex
/// spanned by at most four of its points. Exhaustive over simplices.
inline bool in_hull_3d(const Matrix& pts, const Vector& q, double scale) {
    const Eigen::Index m = pts.cols();
    const double tol = 1e-10;
    auto close = [&](const Vector& v) { return (v - q).norm() <= kHullTol * scale; };
    for (Eigen::Index i = 0; i < m; ++i)
        if (close(pts.col(i))) return true;
    // barycentric solve in the span of the edge vectors from pts(i)
    auto in_simplex = [&](std::initializer_list<Eigen::Index> idx) {
        const Eigen::Index base = *idx.begin();
        Matrix e(3, static_cast<Eigen::Index>(idx.size()) - 1);
        Eigen::Index c = 0;
        for (auto it = idx.begin() + 1; it != idx.end(); ++it) e.col(c++) = pts.col(*it) - pts.col(base);
        const Vector rhs = q - pts.col(base);
        const Vector w = e.colPivHouseholderQr().solve(rhs);
        if ((e * w - rhs).norm() > 1e-9 * scale) return false;
        return (w.array() >= -tol).all() && w.sum() <= 1.0 + tol;
    };
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) {
            if (in_simplex({i, j})) return true;
            for (Eigen::Index k = j + 1; k < m; ++k) {
                if (in_simplex({i, j, k})) return true;
                for (Eigen::Index l = k + 1; l < m; ++l)
                    if (in_simplex({i, j, k, l})) return true;
            }
        }
    return false;
}

}  // namespace detail

/// ID when within eps_id of a set point, else OOD-in when inside the convex
/// hull of the set (boundary included), else OOD-out.
inline std::vector<RegionLabel> classify_ood(const Matrix& action_set, const Matrix& queries, double eps_id) {
    const Eigen::Index dim = action_set.rows();
    if (dim > 3) throw UnsupportedDimension("classify_ood: exact hulls are available for dimension <= 3 only");
    if (dim < 1 || queries.rows() != dim) throw ShapeError("classify_ood: query and set dimensions differ");
    if (action_set.cols() == 0) throw InvalidArgument("classify_ood: empty action set");
    if (!(eps_id >= 0.0)) throw InvalidArgument("classify_ood: eps_id must be non-negative");
    const double scale = std::max(1.0, action_set.cwiseAbs().maxCoeff());
    std::vector<detail::P2> hull;
    if (dim == 2) {
        std::vector<detail::P2> pts;
        for (Eigen::Index c = 0; c < action_set.cols(); ++c) pts.push_back({action_set(0, c), action_set(1, c)});
        hull = detail::hull_2d(std::move(pts));
    }
    std::vector<RegionLabel> out;
    out.reserve(static_cast<std::size_t>(queries.cols()));
    for (Eigen::Index c = 0; c < queries.cols(); ++c) {
        const Vector q = queries.col(c);
        if ((action_set.colwise() - q).colwise().norm().minCoeff() <= eps_id) {
            out.push_back(RegionLabel::ID);
            continue;
        }
        bool inside = false;
        if (dim == 1) {
            inside = q[0] >= action_set.minCoeff() && q[0] <= action_set.maxCoeff();
        } else if (dim == 2) {
            inside = detail::in_hull_2d(hull, {q[0], q[1]}, scale);
        } else {
            inside = detail::in_hull_3d(action_set, q, scale);
        }
        out.push_back(inside ? RegionLabel::OodIn : RegionLabel::OodOut);
    }
    return out;
}

}  // namespace pars
