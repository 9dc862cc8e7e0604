#pragma once

// Central finite differences over flattened network parameters; used as the
// independent oracle for analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>

#include "pars/nn_core.hpp"

namespace pars::oracle {

/// Numerical gradient of `objective(params)` with respect to every parameter.
inline Vector numeric_param_grad(const MlpParams& p, const std::function<double(const MlpParams&)>& objective,
                                 double step = 1e-5) {
    Vector flat = flatten(p);
    Vector grad(flat.size());
    MlpParams work = p;
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
        const double saved = flat[k];
        flat[k] = saved + step;
        unflatten(flat, work);
        const double up = objective(work);
        flat[k] = saved - step;
        unflatten(flat, work);
        const double down = objective(work);
        flat[k] = saved;
        grad[k] = (up - down) / (2.0 * step);
    }
    return grad;
}

/// max_k |a_k - n_k| / max(|a_k|, |n_k|, floor). The floor keeps entries that
/// are zero up to truncation noise from dominating the ratio.
inline double max_relative_error(const Vector& analytic, const Vector& numeric, double floor = 1e-4) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < analytic.size(); ++k) {
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
        worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
    }
    return worst;
}

/// Random small architecture: 1-3 hidden layers of 1-8 units.
inline MlpSpec random_small_spec(Rng& rng, Activation act, bool ln) {
    MlpSpec s;
    s.input_dim = 1 + static_cast<int>(rng.index(4));
    s.output_dim = 1 + static_cast<int>(rng.index(2));
    s.hidden_dims.clear();
    const int depth = 1 + static_cast<int>(rng.index(3));
    for (int d = 0; d < depth; ++d) s.hidden_dims.push_back(2 + static_cast<int>(rng.index(7)));
    s.activation = act;
    s.use_ln = ln;
    return s;
}

/// Perturbs LN affine parameters away from identity so their gradients are
/// exercised at a generic point.
inline void jitter_ln(MlpParams& p, Rng& rng) {
    for (auto& l : p.layers) {
        for (Eigen::Index k = 0; k < l.ln_scale.size(); ++k) l.ln_scale[k] = rng.uniform(0.5, 1.5);
        for (Eigen::Index k = 0; k < l.ln_shift.size(); ++k) l.ln_shift[k] = rng.uniform(-0.3, 0.3);
        for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias[k] = rng.uniform(-0.2, 0.2);
    }
}

/// Analytic-vs-numeric check of the batch objective (1/B) sum_i <g_i, f(x_i)>.
inline double gradient_check(const MlpParams& p, const Matrix& inputs, const Matrix& out_grads) {
    auto objective = [&](const MlpParams& q) {
        return forward_batch(q, inputs).cwiseProduct(out_grads).sum() / static_cast<double>(inputs.cols());
    };
    const Vector numeric = numeric_param_grad(p, objective);
    const Vector analytic = flatten(mlp_grad(p, inputs, out_grads));
    return max_relative_error(analytic, numeric);
}

}  // namespace pars::oracle
