#pragma once

// Toy regression studies: fit y = c * distance-to-center on one or two discs
// and look at what the network predicts away from the data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"
#include "pars/text_io.hpp"

namespace pars {

enum class ConeKind { Cone, TwoCone };

inline std::string_view to_string(ConeKind k) { return k == ConeKind::Cone ? "cone" : "two_cone"; }

struct RegressionTask {
    ConeKind kind = ConeKind::Cone;
    double c_reward = 1.0;
    double radius = 0.5;        // disc radius for the single cone
    double two_cone_radius = 0.3;
    double two_cone_offset = 0.45;  // disc centers at (+-offset, 0)
    int samples = 2048;
    double grid_extent = 1.0;   // predictions inspected on [-extent, extent]^2

    // network
    std::vector<int> hidden_dims{256, 256};
    bool use_ln = false;
    Activation activation = Activation::ReLU;

    // optimization
    int batch_size = 256;
    double lr = 3e-4;

    // penalty on far-away points, the regression analog of pinning Q at Q_min
    bool use_pa = false;
    double pa_weight = 0.1;
    double pa_multiplier = 5.0;  // penalized points lie in [-2m, -m) U [m, 2m) per axis
    double pa_target = 0.0;

    void validate() const {
        if (!(c_reward > 0.0)) throw InvalidArgument("regression task: c_reward must be positive");
        if (!(radius > 0.0) || !(two_cone_radius > 0.0)) throw InvalidArgument("regression task: radius must be positive");
        if (two_cone_offset <= two_cone_radius) throw InvalidArgument("regression task: two-cone discs must be disjoint");
        if (samples < 1 || batch_size < 1) throw InvalidArgument("regression task: samples and batch_size must be >= 1");
        if (!(grid_extent > 0.0)) throw InvalidArgument("regression task: grid_extent must be positive");
        if (!(pa_multiplier >= 1.0)) throw InvalidArgument("regression task: pa_multiplier must be >= 1");
        if (pa_weight < 0.0) throw InvalidArgument("regression task: pa_weight must be non-negative");
    }

    MlpSpec spec() const {
        MlpSpec s;
        s.input_dim = 2;
        s.hidden_dims = hidden_dims;
        s.output_dim = 1;
        s.activation = activation;
        s.use_ln = use_ln;
        return s;
    }

    /// Disc centers with their radius.
    std::vector<std::pair<Vector, double>> discs() const {
        if (kind == ConeKind::Cone) return {{Vector::Zero(2), radius}};
        Vector l(2), r(2);
        l << -two_cone_offset, 0.0;
        r << two_cone_offset, 0.0;
        return {{l, two_cone_radius}, {r, two_cone_radius}};
    }
};

struct LabeledPoints {
    Matrix x;  // 2 x n
    Vector y;
};

/// c * distance to the center of the disc containing x; NaN outside every disc.
inline double cone_target(const RegressionTask& t, const Vector& x) {
    for (const auto& [center, r] : t.discs()) {
        const double d = (x - center).norm();
        if (d <= r) return t.c_reward * d;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline LabeledPoints make_cone_points(const RegressionTask& t, std::uint64_t seed) {
    t.validate();
    Rng rng(derive_seed(seed, "points"));
    const auto discs = t.discs();
    LabeledPoints out{Matrix(2, t.samples), Vector(t.samples)};
    for (int k = 0; k < t.samples; ++k) {
        const auto& [center, r] = discs[static_cast<std::size_t>(k) % discs.size()];
        Vector p(2);
        do {
            p << rng.uniform(-r, r), rng.uniform(-r, r);
        } while (p.squaredNorm() > r * r);
        out.x.col(k) = center + p;
        out.y[k] = t.c_reward * p.norm();
    }
    return out;
}

inline LabeledPoints make_cone_dataset(RegressionTask t, std::uint64_t seed) {
    t.kind = ConeKind::Cone;
    return make_cone_points(t, seed);
}

inline LabeledPoints make_two_cone_dataset(RegressionTask t, std::uint64_t seed) {
    t.kind = ConeKind::TwoCone;
    return make_cone_points(t, seed);
}

/// MSE fit with Adam on minibatches; with use_pa, adds pa_weight * mean
/// (f(x_far) - pa_target)^2 over fresh far points every step.
inline MlpParams fit_regressor(const RegressionTask& t, const LabeledPoints& data, int steps, std::uint64_t seed) {
    t.validate();
    if (steps < 0) throw InvalidArgument("fit_regressor: steps must be >= 0");
    MlpParams p = mlp_init(t.spec(), derive_seed(seed, "init"));
    AdamState adam = AdamState::for_params(p, t.lr);
    Rng batch_rng(derive_seed(seed, "sampling"));
    Rng far_rng(derive_seed(seed, "infeasible"));
    const Eigen::Index b = t.batch_size;
    const Eigen::Index cols = t.use_pa ? 2 * b : b;
    const double limit = 1e3 * t.c_reward * std::max(1.0, data.y.cwiseAbs().maxCoeff() / t.c_reward);
    Matrix x(2, cols);
    Vector y(b);
    for (int step = 0; step < steps; ++step) {
        for (Eigen::Index c = 0; c < b; ++c) {
            const auto i = static_cast<Eigen::Index>(batch_rng.index(static_cast<std::uint64_t>(data.x.cols())));
            x.col(c) = data.x.col(i);
            y[c] = data.y[i];
        }
        if (t.use_pa)
            for (Eigen::Index c = b; c < cols; ++c)
                for (Eigen::Index d = 0; d < 2; ++d) {
                    const double u = far_rng.uniform(-1.0, 1.0);
                    x(d, c) = u < 0.0 ? (u - 1.0) * t.pa_multiplier : (u + 1.0) * t.pa_multiplier;
                }
        const ForwardTrace tr = forward_batch_traced(p, x);
        const double ratio = static_cast<double>(cols) / static_cast<double>(b);
        Matrix g(1, cols);
        g.leftCols(b) = 2.0 * ratio * (tr.output.leftCols(b) - y.transpose());
        if (t.use_pa) g.rightCols(b) = 2.0 * ratio * t.pa_weight * (tr.output.rightCols(b).array() - t.pa_target);
        if (!(tr.output.cwiseAbs().mean() <= limit)) throw DivergenceError("fit_regressor: predictions diverged");
        adam_update(p, mlp_backward(p, tr, g).params, adam);
    }
    return p;
}

inline MlpParams fit_regressor(const RegressionTask& t, int steps, std::uint64_t seed) {
    return fit_regressor(t, make_cone_points(t, seed), steps, seed);
}

inline double training_mse(const MlpParams& p, const LabeledPoints& data) {
    return (forward_batch(p, data.x).row(0).transpose() - data.y).squaredNorm() / static_cast<double>(data.y.size());
}

enum class Region { ID, OodIn, OodOut };

/// Inside a disc -> ID; between the two discs of a two-cone task (inside the
/// hull of their union) -> OOD-in; else OOD-out.
inline Region region_of(const RegressionTask& t, const Vector& x) {
    const auto discs = t.discs();
    for (const auto& [center, r] : discs)
        if ((x - center).norm() <= r) return Region::ID;
    if (discs.size() == 2 && std::abs(x[0]) <= t.two_cone_offset && std::abs(x[1]) <= t.two_cone_radius)
        return Region::OodIn;
    return Region::OodOut;
}

struct RegionStats {
    double id_max = 0.0, id_mean = 0.0;
    double ood_out_max = 0.0, ood_out_mean = 0.0;
    double ood_in_mean = 0.0;
    long id_count = 0, ood_in_count = 0, ood_out_count = 0;
};

/// res x res grid over [-extent, extent]^2, row-major from the low corner.
inline Matrix region_grid(const RegressionTask& t, int res) {
    if (res < 2) throw InvalidArgument("region grid: resolution must be >= 2");
    Matrix g(2, res * res);
    const double e = t.grid_extent;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            g(0, i * res + j) = -e + 2.0 * e * j / (res - 1);
            g(1, i * res + j) = -e + 2.0 * e * i / (res - 1);
        }
    return g;
}

/// Grid statistics of predictions divided by c_reward.
inline RegionStats region_stats(const MlpParams& p, const RegressionTask& t, int res) {
    const Matrix g = region_grid(t, res);
    const RowVector pred = forward_batch(p, g).row(0) / t.c_reward;
    RegionStats s;
    s.id_max = s.ood_out_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
        switch (region_of(t, g.col(c))) {
            case Region::ID:
                s.id_max = std::max(s.id_max, pred[c]);
                s.id_mean += pred[c];
                ++s.id_count;
                break;
            case Region::OodIn:
                s.ood_in_mean += pred[c];
                ++s.ood_in_count;
                break;
            case Region::OodOut:
                s.ood_out_max = std::max(s.ood_out_max, pred[c]);
                s.ood_out_mean += pred[c];
                ++s.ood_out_count;
                break;
        }
    }
    auto finish = [](double& mean, double& mx, long n) {
        if (n) {
            mean /= static_cast<double>(n);
        } else {
            mx = 0.0;
        }
    };
    finish(s.id_mean, s.id_max, s.id_count);
    finish(s.ood_out_mean, s.ood_out_max, s.ood_out_count);
    if (s.ood_in_count) s.ood_in_mean /= static_cast<double>(s.ood_in_count);
    return s;
}

/// One fit per activation on the same data and seed.
inline std::map<Activation, RegionStats> activation_sweep(const RegressionTask& t,
                                                         const std::vector<Activation>& activations, int steps,
                                                         std::uint64_t seed, int res = 41) {
    const LabeledPoints data = make_cone_points(t, seed);
    std::map<Activation, RegionStats> out;
    for (Activation a : activations) {
        RegressionTask ta = t;
        ta.activation = a;
        out[a] = region_stats(fit_regressor(ta, data, steps, seed), ta, res);
    }
    return out;
}

inline void write_region_stats_csv(std::ostream& os, const RegionStats& s) {
    os << "metric,value\n"
       << "id_max," << format_real(s.id_max) << "\nid_mean," << format_real(s.id_mean) << "\nood_out_max,"
       << format_real(s.ood_out_max) << "\nood_out_mean," << format_real(s.ood_out_mean) << "\nood_in_mean,"
       << format_real(s.ood_in_mean) << "\nid_count," << s.id_count << "\nood_in_count," << s.ood_in_count
       << "\nood_out_count," << s.ood_out_count << '\n';
}

/// x0,x1,prediction,region with predictions divided by c_reward.
inline void write_prediction_grid_csv(std::ostream& os, const MlpParams& p, const RegressionTask& t, int res) {
    const Matrix g = region_grid(t, res);
    const RowVector pred = forward_batch(p, g).row(0) / t.c_reward;
    os << "x0,x1,prediction,region\n";
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
        const Region r = region_of(t, g.col(c));
        os << format_real(g(0, c)) << ',' << format_real(g(1, c)) << ',' << format_real(pred[c]) << ','
           << (r == Region::ID ? "ID" : r == Region::OodIn ? "OOD-in" : "OOD-out") << '\n';
    }
}

}  // namespace pars
