#pragma once

// Feedforward networks with optional layer normalization, analytic
// backpropagation, Adam and Polyak averaging. Samples are stored as columns.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pars/error.hpp"
#include "pars/rng.hpp"
#include "pars/text_io.hpp"

namespace pars {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { ReLU, GELU, Sigmoid, SiLU, None };

inline constexpr Activation kAllActivations[] = {Activation::ReLU, Activation::GELU, Activation::Sigmoid,
                                                 Activation::SiLU, Activation::None};

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::GELU: return "gelu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::SiLU: return "silu";
        case Activation::None: return "none";
    }
    return "?";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
    for (Activation a : kAllActivations)
        if (to_string(a) == s) return a;
    return std::nullopt;
}

struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden_dims{256, 256};
    int output_dim = 1;
    Activation activation = Activation::ReLU;
    bool use_ln = false;
    double ln_eps = 1e-5;

    void validate() const {
        if (input_dim < 1 || output_dim < 1) throw InvalidArgument("MlpSpec: input/output dims must be >= 1");
        if (hidden_dims.empty()) throw InvalidArgument("MlpSpec: hidden_dims must be non-empty");
        for (int h : hidden_dims)
            if (h < 1) throw InvalidArgument("MlpSpec: hidden dims must be >= 1");
        if (!(ln_eps > 0.0)) throw InvalidArgument("MlpSpec: ln_eps must be positive");
    }

    bool operator==(const MlpSpec&) const = default;
};

/// One affine layer. LN parameters are empty for the output layer and for
/// every layer when the spec disables LN.
struct DenseLayer {
    Matrix weight;
    Vector bias;
    Vector ln_scale;
    Vector ln_shift;

    bool operator==(const DenseLayer& o) const {
        return weight == o.weight && bias == o.bias && ln_scale == o.ln_scale && ln_shift == o.ln_shift;
    }
};

struct MlpParams {
    MlpSpec spec;
    std::vector<DenseLayer> layers;  // hidden layers, then the output layer

    std::size_t num_hidden() const { return layers.empty() ? 0 : layers.size() - 1; }

    std::size_t num_parameters() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size() + l.ln_scale.size() + l.ln_shift.size();
        return n;
    }

    bool operator==(const MlpParams&) const = default;
};

/// Calls f(std::span<double>) on every parameter tensor in a fixed order.
template <class F>
void for_each_tensor(MlpParams& p, F&& f) {
    for (auto& l : p.layers) {
        f(std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
        f(std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
        f(std::span<double>(l.ln_scale.data(), static_cast<std::size_t>(l.ln_scale.size())));
        f(std::span<double>(l.ln_shift.data(), static_cast<std::size_t>(l.ln_shift.size())));
    }
}

template <class F>
void for_each_tensor(const MlpParams& p, F&& f) {
    for (const auto& l : p.layers) {
        f(std::span<const double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
        f(std::span<const double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
        f(std::span<const double>(l.ln_scale.data(), static_cast<std::size_t>(l.ln_scale.size())));
        f(std::span<const double>(l.ln_shift.data(), static_cast<std::size_t>(l.ln_shift.size())));
    }
}

inline bool same_shape(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto& x = a.layers[i];
        const auto& y = b.layers[i];
        if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() || x.bias.size() != y.bias.size()
            || x.ln_scale.size() != y.ln_scale.size() || x.ln_shift.size() != y.ln_shift.size())
            return false;
    }
    return true;
}

inline void require_same_shape(const MlpParams& a, const MlpParams& b, const char* who) {
    if (!same_shape(a, b)) throw ShapeError(std::string(who) + ": parameter shapes differ");
}

/// Applies f(a_i, b_i) -> a_i elementwise over two identically shaped sets.
template <class F>
void zip_update(MlpParams& a, const MlpParams& b, F&& f) {
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        auto apply = [&](auto& x, const auto& y) {
            for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = f(x.data()[k], y.data()[k]);
        };
        apply(a.layers[i].weight, b.layers[i].weight);
        apply(a.layers[i].bias, b.layers[i].bias);
        apply(a.layers[i].ln_scale, b.layers[i].ln_scale);
        apply(a.layers[i].ln_shift, b.layers[i].ln_shift);
    }
}

inline MlpParams zeros_like(const MlpParams& p) {
    MlpParams z = p;
    for_each_tensor(z, [](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
    return z;
}

inline Vector flatten(const MlpParams& p) {
    Vector out(static_cast<Eigen::Index>(p.num_parameters()));
    Eigen::Index k = 0;
    for_each_tensor(p, [&](std::span<const double> t) {
        for (double v : t) out[k++] = v;
    });
    return out;
}

inline void unflatten(const Vector& flat, MlpParams& p) {
    if (flat.size() != static_cast<Eigen::Index>(p.num_parameters())) throw ShapeError("unflatten: size mismatch");
    Eigen::Index k = 0;
    for_each_tensor(p, [&](std::span<double> t) {
        for (double& v : t) v = flat[k++];
    });
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, LN scale 1 and
/// shift 0. Draw order is layer by layer, row-major within a weight matrix.
inline MlpParams mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    MlpParams p;
    p.spec = spec;
    int fan_in = spec.input_dim;
    auto make = [&](int out, int in, bool ln) {
        DenseLayer l;
        l.weight.resize(out, in);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
        l.bias = Vector::Zero(out);
        if (ln) {
            l.ln_scale = Vector::Ones(out);
            l.ln_shift = Vector::Zero(out);
        }
        return l;
    };
    for (int h : spec.hidden_dims) {
        p.layers.push_back(make(h, fan_in, spec.use_ln));
        fan_in = h;
    }
    p.layers.push_back(make(spec.output_dim, fan_in, false));
    return p;
}

// ---------------------------------------------------------------------------
// Activations

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::GELU: return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::SiLU: return x / (1.0 + std::exp(-x));
        case Activation::None: return x;
    }
    return x;
}

inline double activate_deriv(Activation a, double x) {
    switch (a) {
        case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
        case Activation::GELU: {
            const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + x * pdf;
        }
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::SiLU: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::None: return 1.0;
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// Layer normalization

/// (h - mean) / sqrt(var + eps) * scale + shift, population variance.
inline Vector layer_norm(const Vector& h, const Vector& scale, const Vector& shift, double eps) {
    if (scale.size() != h.size() || shift.size() != h.size()) throw ShapeError("layer_norm: length mismatch");
    if (!(eps > 0.0)) throw InvalidArgument("layer_norm: eps must be positive");
    const double mean = h.mean();
    const double var = (h.array() - mean).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + eps);
    return ((h.array() - mean) * inv_std * scale.array() + shift.array()).matrix();
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerTrace {
    Matrix pre;         // W x + b
    Matrix normalized;  // LN output before the affine (empty without LN)
    RowVector inv_std;  // 1/sqrt(var + eps) per sample (empty without LN)
    Matrix post_ln;     // LN output after the affine (== pre without LN)
    Matrix post_act;    // activation(post_ln)
};

struct ForwardTrace {
    Matrix input;
    std::vector<LayerTrace> hidden;
    Matrix output;
};

inline void check_input(const MlpParams& p, Eigen::Index rows) {
    if (rows != p.spec.input_dim)
        throw ShapeError("mlp_forward: input has " + std::to_string(rows) + " rows, network expects "
                         + std::to_string(p.spec.input_dim));
}

namespace detail {

inline void normalize_columns(const Matrix& pre, double eps, Matrix& normalized, RowVector& inv_std) {
    const Eigen::Index n = pre.rows();
    const RowVector mean = pre.colwise().mean();
    normalized = pre.rowwise() - mean;
    const RowVector var = normalized.colwise().squaredNorm() / static_cast<double>(n);
    inv_std = (var.array() + eps).rsqrt().matrix();
    normalized = normalized * inv_std.asDiagonal();
}

inline Matrix apply_activation(Activation a, const Matrix& x) {
    if (a == Activation::None) return x;
    if (a == Activation::ReLU) return x.cwiseMax(0.0);
    return x.unaryExpr([a](double v) { return activate(a, v); });
}

}  // namespace detail

/// Batched forward pass; each column of `inputs` is one sample.
inline Matrix forward_batch(const MlpParams& p, const Matrix& inputs) {
    check_input(p, inputs.rows());
    Matrix x = inputs;
    Matrix normalized;
    RowVector inv_std;
    for (std::size_t i = 0; i + 1 < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        Matrix h = l.weight * x;
        h.colwise() += l.bias;
        if (p.spec.use_ln) {
            detail::normalize_columns(h, p.spec.ln_eps, normalized, inv_std);
            h = (l.ln_scale.asDiagonal() * normalized).colwise() + l.ln_shift;
        }
        x = detail::apply_activation(p.spec.activation, h);
    }
    const auto& out = p.layers.back();
    Matrix y = out.weight * x;
    y.colwise() += out.bias;
    return y;
}

inline ForwardTrace forward_batch_traced(const MlpParams& p, const Matrix& inputs) {
    check_input(p, inputs.rows());
    ForwardTrace t;
    t.input = inputs;
    const Matrix* x = &t.input;
    t.hidden.resize(p.num_hidden());
    for (std::size_t i = 0; i + 1 < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        auto& lt = t.hidden[i];
        lt.pre = l.weight * *x;
        lt.pre.colwise() += l.bias;
        if (p.spec.use_ln) {
            detail::normalize_columns(lt.pre, p.spec.ln_eps, lt.normalized, lt.inv_std);
            lt.post_ln = (l.ln_scale.asDiagonal() * lt.normalized).colwise() + l.ln_shift;
        } else {
            lt.post_ln = lt.pre;
        }
        lt.post_act = detail::apply_activation(p.spec.activation, lt.post_ln);
        x = &lt.post_act;
    }
    const auto& out = p.layers.back();
    t.output = out.weight * *x;
    t.output.colwise() += out.bias;
    return t;
}

/// Single-sample forward pass, optionally returning the trace.
inline std::pair<Vector, std::optional<ForwardTrace>> mlp_forward(const MlpParams& p, const Vector& x,
                                                                  bool want_trace) {
    if (want_trace) {
        ForwardTrace t = forward_batch_traced(p, x);
        Vector y = t.output.col(0);
        return {std::move(y), std::move(t)};
    }
    return {forward_batch(p, x).col(0), std::nullopt};
}

struct Gradients {
    MlpParams params;  // d/dtheta of (1/B) sum_i <g_i, f(x_i)>
    Matrix inputs;     // column i: d<g_i, f(x_i)>/dx_i (not divided by B)
};

/// Reverse pass through Linear -> LN -> activation stacks, including the
/// mean and variance pathways of LN.
inline Gradients mlp_backward(const MlpParams& p, const ForwardTrace& t, const Matrix& output_grads) {
    if (output_grads.rows() != p.spec.output_dim || output_grads.cols() != t.output.cols())
        throw ShapeError("mlp_backward: output gradient shape does not match the forward batch");
    const double inv_batch = 1.0 / static_cast<double>(output_grads.cols());
    Gradients g;
    g.params = zeros_like(p);

    Matrix delta = output_grads;  // dL/d(layer output), per sample
    {
        const Matrix& below = t.hidden.empty() ? t.input : t.hidden.back().post_act;
        auto& gl = g.params.layers.back();
        gl.weight.noalias() = delta * below.transpose() * inv_batch;
        gl.bias = delta.rowwise().sum() * inv_batch;
        delta = p.layers.back().weight.transpose() * delta;
    }
    for (std::size_t ii = p.num_hidden(); ii-- > 0;) {
        const auto& l = p.layers[ii];
        const auto& lt = t.hidden[ii];
        auto& gl = g.params.layers[ii];
        // through activation
        if (p.spec.activation == Activation::ReLU) {
            delta = delta.cwiseProduct((lt.post_ln.array() > 0.0).cast<double>().matrix());
        } else if (p.spec.activation != Activation::None) {
            const Activation a = p.spec.activation;
            delta = delta.cwiseProduct(lt.post_ln.unaryExpr([a](double v) { return activate_deriv(a, v); }));
        }
        // through LN
        if (p.spec.use_ln) {
            gl.ln_scale = delta.cwiseProduct(lt.normalized).rowwise().sum() * inv_batch;
            gl.ln_shift = delta.rowwise().sum() * inv_batch;
            const Matrix dxhat = l.ln_scale.asDiagonal() * delta;
            const RowVector mean_d = dxhat.colwise().mean();
            const RowVector mean_dx = dxhat.cwiseProduct(lt.normalized).colwise().mean();
            delta = ((dxhat.rowwise() - mean_d) - lt.normalized * mean_dx.asDiagonal()) * lt.inv_std.asDiagonal();
        }
        const Matrix& below = ii == 0 ? t.input : t.hidden[ii - 1].post_act;
        gl.weight.noalias() = delta * below.transpose() * inv_batch;
        gl.bias = delta.rowwise().sum() * inv_batch;
        delta = l.weight.transpose() * delta;
    }
    g.inputs = std::move(delta);
    return g;
}

/// Parameter gradient of the batch mean of <output_grad_i, f(x_i)>.
inline MlpParams mlp_grad(const MlpParams& p, const Matrix& batch_inputs, const Matrix& output_grads) {
    if (output_grads.cols() != batch_inputs.cols()) throw ShapeError("mlp_grad: batch sizes differ");
    return mlp_backward(p, forward_batch_traced(p, batch_inputs), output_grads).params;
}

// ---------------------------------------------------------------------------
// Optimization

struct AdamState {
    MlpParams m;
    MlpParams v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 3e-4;

    static AdamState for_params(const MlpParams& p, double lr = 3e-4) {
        AdamState s;
        s.m = zeros_like(p);
        s.v = zeros_like(p);
        s.lr = lr;
        return s;
    }

    bool operator==(const AdamState&) const = default;
};

/// In-place Adam update with bias correction.
inline void adam_update(MlpParams& params, const MlpParams& grads, AdamState& s) {
    require_same_shape(params, grads, "adam_step");
    require_same_shape(params, s.m, "adam_step");
    s.t += 1;
    const double b1 = s.beta1, b2 = s.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    const double lr = s.lr, eps = s.eps;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto step = [&](auto& w, const auto& g, auto& m, auto& v) {
            for (Eigen::Index k = 0; k < w.size(); ++k) {
                const double gk = g.data()[k];
                double& mk = m.data()[k];
                double& vk = v.data()[k];
                mk = b1 * mk + (1.0 - b1) * gk;
                vk = b2 * vk + (1.0 - b2) * gk * gk;
                w.data()[k] -= lr * (mk / c1) / (std::sqrt(vk / c2) + eps);
            }
        };
        auto& L = params.layers[i];
        const auto& G = grads.layers[i];
        auto& M = s.m.layers[i];
        auto& V = s.v.layers[i];
        step(L.weight, G.weight, M.weight, V.weight);
        step(L.bias, G.bias, M.bias, V.bias);
        step(L.ln_scale, G.ln_scale, M.ln_scale, V.ln_scale);
        step(L.ln_shift, G.ln_shift, M.ln_shift, V.ln_shift);
    }
}

inline std::pair<MlpParams, AdamState> adam_step(MlpParams params, const MlpParams& grads, AdamState state) {
    adam_update(params, grads, state);
    return {std::move(params), std::move(state)};
}

inline void soft_update_inplace(MlpParams& target, const MlpParams& online, double tau) {
    require_same_shape(target, online, "soft_update");
    if (tau < 0.0 || tau > 1.0) throw InvalidArgument("soft_update: tau must lie in [0, 1]");
    zip_update(target, online, [tau](double t, double o) { return tau * o + (1.0 - tau) * t; });
}

inline MlpParams soft_update(MlpParams target, const MlpParams& online, double tau) {
    soft_update_inplace(target, online, tau);
    return target;
}

// ---------------------------------------------------------------------------
// Checkpoint text format
//
//   mlp <name>
//   input_dim <n>
//   hidden_dims <h1> <h2> ...
//   output_dim <n>
//   activation <relu|gelu|sigmoid|silu|none>
//   use_ln <0|1>
//   ln_eps <real>
//   layer <i> weight <rows> <cols>     followed by <rows> lines of <cols> values
//   layer <i> bias <n>                 followed by one line of n values
//   layer <i> ln_scale <n> / ln_shift <n>   (hidden layers, use_ln only)
//   end
//
// Reals use the shortest representation that round-trips exactly.

inline void write_mlp(std::ostream& os, const MlpParams& p, std::string_view name = "net") {
    const auto& s = p.spec;
    os << "mlp " << name << '\n';
    os << "input_dim " << s.input_dim << '\n';
    os << "hidden_dims";
    for (int h : s.hidden_dims) os << ' ' << h;
    os << '\n';
    os << "output_dim " << s.output_dim << '\n';
    os << "activation " << to_string(s.activation) << '\n';
    os << "use_ln " << (s.use_ln ? 1 : 0) << '\n';
    os << "ln_eps " << format_real(s.ln_eps) << '\n';
    auto row = [&](const double* v, Eigen::Index n, Eigen::Index stride) {
        for (Eigen::Index k = 0; k < n; ++k) os << (k ? " " : "") << format_real(v[k * stride]);
        os << '\n';
    };
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        os << "layer " << i << " weight " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) row(l.weight.data() + r, l.weight.cols(), l.weight.rows());
        os << "layer " << i << " bias " << l.bias.size() << '\n';
        row(l.bias.data(), l.bias.size(), 1);
        if (l.ln_scale.size() > 0) {
            os << "layer " << i << " ln_scale " << l.ln_scale.size() << '\n';
            row(l.ln_scale.data(), l.ln_scale.size(), 1);
            os << "layer " << i << " ln_shift " << l.ln_shift.size() << '\n';
            row(l.ln_shift.data(), l.ln_shift.size(), 1);
        }
    }
    os << "end\n";
}

/// Reads one network written by write_mlp. `name_out` receives its name.
inline MlpParams read_mlp(LineReader& in, std::string* name_out = nullptr) {
    auto keyed = [&](std::string_view key) {
        auto tok = in.expect_tokens(key);
        if (tok.empty() || tok[0] != key) throw ParseError(in.line_no(), "expected '" + std::string(key) + "'");
        return tok;
    };
    MlpSpec s;
    {
        auto tok = keyed("mlp");
        if (tok.size() != 2) throw ParseError(in.line_no(), "expected 'mlp <name>'");
        if (name_out) *name_out = std::string(tok[1]);
    }
    auto single_int = [&](std::string_view key) {
        auto tok = keyed(key);
        if (tok.size() != 2) throw ParseError(in.line_no(), "expected one value after " + std::string(key));
        return static_cast<int>(parse_int(tok[1], in.line_no()));
    };
    s.input_dim = single_int("input_dim");
    {
        auto tok = keyed("hidden_dims");
        s.hidden_dims.clear();
        for (std::size_t k = 1; k < tok.size(); ++k) s.hidden_dims.push_back(static_cast<int>(parse_int(tok[k], in.line_no())));
    }
    s.output_dim = single_int("output_dim");
    {
        auto tok = keyed("activation");
        auto a = tok.size() == 2 ? parse_activation(tok[1]) : std::nullopt;
        if (!a) throw ParseError(in.line_no(), "unknown activation");
        s.activation = *a;
    }
    s.use_ln = single_int("use_ln") != 0;
    {
        auto tok = keyed("ln_eps");
        if (tok.size() != 2) throw ParseError(in.line_no(), "expected one value after ln_eps");
        s.ln_eps = parse_real(tok[1], in.line_no());
    }
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw SchemaError(in.line_no(), e.what());
    }
    MlpParams p = mlp_init(s, 0);
    auto read_values = [&](double* dst, Eigen::Index n, Eigen::Index stride) {
        auto tok = in.expect_tokens("parameter values");
        if (static_cast<Eigen::Index>(tok.size()) != n)
            throw SchemaError(in.line_no(), "expected " + std::to_string(n) + " values, got " + std::to_string(tok.size()));
        for (Eigen::Index k = 0; k < n; ++k) dst[k * stride] = parse_real(tok[static_cast<std::size_t>(k)], in.line_no());
    };
    auto header = [&](std::size_t layer, std::string_view what, Eigen::Index rows, Eigen::Index cols) {
        auto tok = keyed("layer");
        const bool matrix = cols >= 0;
        const std::size_t want = matrix ? 5 : 4;
        if (tok.size() != want || tok[2] != what || parse_int(tok[1], in.line_no()) != static_cast<std::int64_t>(layer))
            throw SchemaError(in.line_no(), "expected section 'layer " + std::to_string(layer) + " " + std::string(what) + "'");
        if (parse_int(tok[3], in.line_no()) != rows || (matrix && parse_int(tok[4], in.line_no()) != cols))
            throw SchemaError(in.line_no(), "section shape does not match the declared architecture");
    };
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        header(i, "weight", l.weight.rows(), l.weight.cols());
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) read_values(l.weight.data() + r, l.weight.cols(), l.weight.rows());
        header(i, "bias", l.bias.size(), -1);
        read_values(l.bias.data(), l.bias.size(), 1);
        if (l.ln_scale.size() > 0) {
            header(i, "ln_scale", l.ln_scale.size(), -1);
            read_values(l.ln_scale.data(), l.ln_scale.size(), 1);
            header(i, "ln_shift", l.ln_shift.size(), -1);
            read_values(l.ln_shift.data(), l.ln_shift.size(), 1);
        }
    }
    keyed("end");
    return p;
}

}  // namespace pars
