#pragma once

// Critic-ensemble actor-critic with reward scaling, layer-normalized critics
// and a penalty pinning Q at far-infeasible actions to Q_min, trained offline
// and then fine-tuned online.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pars/data_store.hpp"
#include "pars/dormant.hpp"
#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"
#include "pars/toy_envs.hpp"

namespace pars {

enum class RMinSource { Known, Dataset };
enum class ActorQNormalization { BatchMeanAbs, None };
enum class SubsetDraw { PerBatch, PerSample };

struct ParsConfig {
    double c_reward = 1.0;
    double alpha = 0.001;  // infeasible-action penalty weight
    double beta = 0.01;    // behavior-cloning weight
    double gamma = 0.99;
    double tau = 5e-3;
    int n_critics = 2;
    int target_subset_size = 2;  // target critics whose minimum forms the TD target
    int actor_subset_size = 1;   // critics averaged by the actor online
    double policy_noise = 0.2;
    double noise_clip = 0.5;
    int policy_delay = 2;
    double exploration_noise = 0.05;
    int utd_ratio = 20;
    double offline_fraction = 0.5;
    double guard_multiplier = 100.0;  // penalized support is [-2m, -m) U [m, 2m) per component
    RMinSource r_min_source = RMinSource::Dataset;
    double r_min_known = 0.0;
    int batch_size = 256;
    int max_gradient_steps = 10000;

    std::vector<int> hidden_dims{256, 256};
    bool critic_ln = true;
    bool actor_ln = false;
    Activation activation = Activation::ReLU;
    double critic_lr = 3e-4;
    double actor_lr = 3e-4;
    bool train_ln_affine = true;
    ActorQNormalization actor_q_normalization = ActorQNormalization::BatchMeanAbs;
    SubsetDraw subset_draw = SubsetDraw::PerBatch;

    int log_interval = 1000;  // gradient steps offline, environment steps online
    int eval_episodes = 10;
    int dormant_batch = 256;
    double divergence_factor = 1e3;

    bool use_pa() const { return alpha > 0.0; }

    void validate() const {
        auto fail = [](const char* key, const char* why) { throw ConfigError(key, 0, why); };
        if (!(c_reward > 0.0)) fail("c_reward", "must be positive");
        if (!(alpha >= 0.0)) fail("alpha", "must be non-negative");
        if (!(beta >= 0.0)) fail("beta", "must be non-negative");
        if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma", "must lie in (0, 1)");
        if (!(tau >= 0.0 && tau <= 1.0)) fail("tau", "must lie in [0, 1]");
        if (n_critics < 2) fail("n_critics", "must be >= 2");
        if (target_subset_size < 1 || target_subset_size > n_critics) fail("target_subset_size", "must lie in [1, n_critics]");
        if (actor_subset_size < 1 || actor_subset_size > n_critics) fail("actor_subset_size", "must lie in [1, n_critics]");
        if (policy_noise < 0.0) fail("policy_noise", "must be non-negative");
        if (noise_clip < 0.0) fail("noise_clip", "must be non-negative");
        if (policy_delay < 1) fail("policy_delay", "must be >= 1");
        if (exploration_noise < 0.0) fail("exploration_noise", "must be non-negative");
        if (utd_ratio < 1) fail("utd_ratio", "must be >= 1");
        if (offline_fraction < 0.0 || offline_fraction > 1.0) fail("offline_fraction", "must lie in [0, 1]");
        if (!(guard_multiplier >= 1.0)) fail("guard_multiplier", "must be >= 1");
        if (batch_size < 1) fail("batch_size", "must be >= 1");
        if (max_gradient_steps < 0) fail("max_gradient_steps", "must be >= 0");
        if (hidden_dims.empty()) fail("hidden_dims", "must be non-empty");
        for (int h : hidden_dims)
            if (h < 1) fail("hidden_dims", "entries must be >= 1");
        if (!(critic_lr > 0.0)) fail("critic_lr", "must be positive");
        if (!(actor_lr > 0.0)) fail("actor_lr", "must be positive");
        if (log_interval < 1) fail("log_interval", "must be >= 1");
        if (eval_episodes < 0) fail("eval_episodes", "must be >= 0");
        if (dormant_batch < 1) fail("dormant_batch", "must be >= 1");
        if (!(divergence_factor > 0.0)) fail("divergence_factor", "must be positive");
    }
};

// ---------------------------------------------------------------------------
// Networks

struct ActorNet {
    MlpParams params;
    MlpParams target;
    AdamState opt;
    Vector low;
    Vector high;

    /// Pre-squash outputs -> feasible actions via tanh onto [low, high].
    Matrix squash(const Matrix& raw) const {
        const Vector mid = (high + low) * 0.5, half = (high - low) * 0.5;
        return (half.asDiagonal() * raw.array().tanh().matrix()).colwise() + mid;
    }
    Matrix act(const Matrix& states) const { return squash(forward_batch(params, states)); }
    Matrix act_target(const Matrix& states) const { return squash(forward_batch(target, states)); }
    Vector act(const Vector& s) const { return act(Matrix(s)).col(0); }
};

struct CriticEnsemble {
    std::vector<MlpParams> online;
    std::vector<MlpParams> target;
    std::vector<AdamState> opt;

    std::size_t size() const { return online.size(); }
};

struct ParsAgent {
    ActorNet actor;
    CriticEnsemble critics;
};

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

inline MlpSpec critic_spec(const ParsConfig& cfg, int state_dim, int action_dim) {
    MlpSpec s;
    s.input_dim = state_dim + action_dim;
    s.hidden_dims = cfg.hidden_dims;
    s.output_dim = 1;
    s.activation = cfg.activation;
    s.use_ln = cfg.critic_ln;
    return s;
}

inline MlpSpec actor_spec(const ParsConfig& cfg, int state_dim, int action_dim) {
    MlpSpec s;
    s.input_dim = state_dim;
    s.hidden_dims = cfg.hidden_dims;
    s.output_dim = action_dim;
    s.activation = Activation::ReLU;
    s.use_ln = cfg.actor_ln;
    return s;
}

/// Fresh agent; critic i is initialized from derive_seed(seed, "critic" + i)
/// and every target starts equal to its online network.
inline ParsAgent make_agent(const ParsConfig& cfg, int state_dim, int action_dim, const Vector& low,
                            const Vector& high, std::uint64_t seed) {
    cfg.validate();
    ParsAgent ag;
    ag.actor.params = mlp_init(actor_spec(cfg, state_dim, action_dim), derive_seed(seed, "actor"));
    ag.actor.target = ag.actor.params;
    ag.actor.opt = AdamState::for_params(ag.actor.params, cfg.actor_lr);
    ag.actor.low = low;
    ag.actor.high = high;
    const MlpSpec cs = critic_spec(cfg, state_dim, action_dim);
    for (int i = 0; i < cfg.n_critics; ++i) {
        MlpParams c = mlp_init(cs, derive_seed(seed, "critic" + std::to_string(i)));
        ag.critics.opt.push_back(AdamState::for_params(c, cfg.critic_lr));
        ag.critics.target.push_back(c);
        ag.critics.online.push_back(std::move(c));
    }
    return ag;
}

// ---------------------------------------------------------------------------
// Scalar helpers

/// c_reward * r_min / (1 - gamma).
inline double compute_q_min(double c_reward, double r_min, double gamma) {
    if (!(gamma < 1.0)) throw InvalidArgument("compute_q_min: gamma must be < 1");
    if (!std::isfinite(r_min)) throw InvalidArgument("compute_q_min: r_min must be finite");
    return (c_reward * r_min) / (1.0 - gamma);
}

inline double compute_q_min(const ParsConfig& cfg, const DatasetStats& stats) {
    const double r_min = cfg.r_min_source == RMinSource::Known ? cfg.r_min_known : stats.r_min;
    return compute_q_min(cfg.c_reward, r_min, cfg.gamma);
}

/// Maps a uniform draw u in [-1, 1) to the penalized support:
/// (u - 1) * m for u < 0, (u + 1) * m otherwise.
inline double infeasible_component(double u, double m) { return u < 0.0 ? (u - 1.0) * m : (u + 1.0) * m; }

/// action_dim x n matrix of infeasible actions, each component uniform on
/// [-2m, -m) U [m, 2m).
inline Matrix sample_infeasible(int action_dim, double m, Eigen::Index n, Rng& rng) {
    if (!(m >= 1.0)) throw InvalidArgument("sample_infeasible: guard multiplier must be >= 1");
    Matrix out(action_dim, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < action_dim; ++r) out(r, c) = infeasible_component(rng.uniform(-1.0, 1.0), m);
    return out;
}

/// k distinct indices from [0, n), sorted ascending.
inline std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.index(n - i))]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------
// Losses

/// a' = clip(actor_target(s') + clip(noise, -c, c)); target = c_reward * r +
/// not_done * gamma * min over a random critic subset of Q_target(s', a').
inline Vector td_target(const ParsConfig& cfg, const CriticEnsemble& ens, const ActorNet& actor, const Batch& b,
                        Rng& rng) {
    const Eigen::Index n = b.size();
    Matrix a_next = actor.act_target(b.s_next);
    if (cfg.policy_noise > 0.0) {
        for (Eigen::Index c = 0; c < n; ++c)
            for (Eigen::Index r = 0; r < a_next.rows(); ++r) {
                const double eps = std::clamp(cfg.policy_noise * rng.normal(), -cfg.noise_clip, cfg.noise_clip);
                a_next(r, c) = std::clamp(a_next(r, c) + eps, actor.low[r], actor.high[r]);
            }
    }
    const Matrix x_next = stack_rows(b.s_next, a_next);
    const auto k = static_cast<std::size_t>(cfg.target_subset_size);
    Vector next_q = Vector::Constant(n, std::numeric_limits<double>::infinity());
    if (cfg.subset_draw == SubsetDraw::PerBatch) {
        for (std::size_t j : sample_subset(ens.size(), k, rng))
            next_q = next_q.cwiseMin(forward_batch(ens.target[j], x_next).row(0).transpose());
    } else {
        Matrix all(static_cast<Eigen::Index>(ens.size()), n);
        for (std::size_t j = 0; j < ens.size(); ++j)
            all.row(static_cast<Eigen::Index>(j)) = forward_batch(ens.target[j], x_next).row(0);
        for (Eigen::Index c = 0; c < n; ++c)
            for (std::size_t j : sample_subset(ens.size(), k, rng))
                next_q[c] = std::min(next_q[c], all(static_cast<Eigen::Index>(j), c));
    }
    return (cfg.c_reward * b.r.array() + b.not_done.array() * cfg.gamma * next_q.array()).matrix();
}

struct CriticLoss {
    double td_loss = 0.0;  // mean (Q(s,a) - y)^2
    double pa_loss = 0.0;  // mean (Q(s,a_inf) - Q_min)^2
    double total = 0.0;    // td_loss + alpha * pa_loss
    double mean_q_data = 0.0;
    double mean_q_infeasible = 0.0;
    MlpParams grad;
};

/// Loss and gradient for one critic. Infeasible actions are paired column by
/// column with the batch states; pass an empty matrix to skip the penalty.
inline CriticLoss critic_loss_and_grad(const ParsConfig& cfg, const MlpParams& critic, const Vector& targets,
                                       const Batch& b, const Matrix& infeasible_actions, double q_min) {
    const Eigen::Index n = b.size();
    if (targets.size() != n) throw ShapeError("critic_loss_and_grad: target count differs from batch size");
    const bool pa = cfg.alpha > 0.0 && infeasible_actions.cols() > 0;
    if (pa && infeasible_actions.cols() != n) throw ShapeError("critic_loss_and_grad: one infeasible action per state");
    CriticLoss out;
    Matrix x = pa ? Matrix(b.s.rows() + b.a.rows(), 2 * n) : Matrix(b.s.rows() + b.a.rows(), n);
    x.leftCols(n) = stack_rows(b.s, b.a);
    if (pa) x.rightCols(n) = stack_rows(b.s, infeasible_actions);
    const ForwardTrace t = forward_batch_traced(critic, x);
    const RowVector q = t.output.row(0);
    const RowVector td_err = q.leftCols(n) - targets.transpose();
    out.td_loss = td_err.squaredNorm() / static_cast<double>(n);
    out.mean_q_data = q.leftCols(n).mean();
    // mlp_backward averages over all columns, so scale per-column grads by the column count ratio
    const double cols_ratio = static_cast<double>(x.cols()) / static_cast<double>(n);
    Matrix g(1, x.cols());
    g.leftCols(n) = 2.0 * cols_ratio * td_err;
    if (pa) {
        const RowVector pa_err = q.rightCols(n).array() - q_min;
        out.pa_loss = pa_err.squaredNorm() / static_cast<double>(n);
        out.mean_q_infeasible = q.rightCols(n).mean();
        g.rightCols(n) = 2.0 * cfg.alpha * cols_ratio * pa_err;
    }
    out.total = out.td_loss + cfg.alpha * out.pa_loss;
    out.grad = mlp_backward(critic, t, g).params;
    if (!cfg.train_ln_affine)
        for (auto& l : out.grad.layers) {
            l.ln_scale.setZero();
            l.ln_shift.setZero();
        }
    return out;
}

enum class Phase { Offline, Online };

struct ActorLoss {
    double loss = 0.0;
    double q_term = 0.0;   // mean Q_pi
    double bc_term = 0.0;  // mean ||pi(s) - a||^2
    double normalizer = 1.0;
    Vector q_pi;           // per-sample Q_pi
    MlpParams grad;
};

/// Offline: Q_pi = min over all critics at (s, pi(s)). Online: mean over a
/// random subset of actor_subset_size critics. loss = -mean(Q_pi) / Z + beta *
/// mean ||pi(s) - a||^2 with Z the detached batch mean |Q_pi| (or 1).
inline ActorLoss actor_loss_and_grad(const ParsConfig& cfg, const CriticEnsemble& ens, const ActorNet& actor,
                                     const Batch& b, Phase phase, Rng& rng) {
    const Eigen::Index n = b.size();
    if (n == 0) throw InvalidArgument("actor_loss_and_grad: empty batch");
    const ForwardTrace at = forward_batch_traced(actor.params, b.s);
    const Matrix pi = actor.squash(at.output);
    const Matrix x = stack_rows(b.s, pi);
    const auto sd = b.s.rows();
    const auto ad = pi.rows();

    std::vector<std::size_t> used;
    if (phase == Phase::Offline) {
        used.resize(ens.size());
        std::iota(used.begin(), used.end(), std::size_t{0});
    } else {
        used = sample_subset(ens.size(), static_cast<std::size_t>(cfg.actor_subset_size), rng);
    }
    Matrix qs(static_cast<Eigen::Index>(used.size()), n);
    std::vector<Matrix> dq_da(used.size());
    const Matrix ones = Matrix::Ones(1, n);
    for (std::size_t j = 0; j < used.size(); ++j) {
        const ForwardTrace ct = forward_batch_traced(ens.online[used[j]], x);
        qs.row(static_cast<Eigen::Index>(j)) = ct.output.row(0);
        dq_da[j] = mlp_backward(ens.online[used[j]], ct, ones).inputs.bottomRows(ad);
    }
    ActorLoss out;
    out.q_pi.resize(n);
    Matrix dq(ad, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        if (phase == Phase::Offline) {
            Eigen::Index arg = 0;
            out.q_pi[c] = qs.col(c).minCoeff(&arg);
            dq.col(c) = dq_da[static_cast<std::size_t>(arg)].col(c);
        } else {
            out.q_pi[c] = qs.col(c).mean();
            dq.col(c).setZero();
            for (const auto& d : dq_da) dq.col(c) += d.col(c);
            dq.col(c) /= static_cast<double>(dq_da.size());
        }
    }
    out.q_term = out.q_pi.mean();
    if (cfg.actor_q_normalization == ActorQNormalization::BatchMeanAbs) {
        const double z = out.q_pi.cwiseAbs().mean();
        out.normalizer = z > 0.0 ? z : 1.0;
    }
    const Matrix diff = pi - b.a;
    out.bc_term = diff.colwise().squaredNorm().mean();
    out.loss = -out.q_term / out.normalizer + cfg.beta * out.bc_term;
    // d(per-sample loss)/d(pi), then through the tanh squash
    Matrix dpi = -dq / out.normalizer;
    if (cfg.beta > 0.0) dpi += 2.0 * cfg.beta * diff;
    const Vector half = (actor.high - actor.low) * 0.5;
    const Matrix dsquash = half.asDiagonal() * (1.0 - at.output.array().tanh().square()).matrix();
    out.grad = mlp_backward(actor.params, at, dpi.cwiseProduct(dsquash)).params;
    (void)sd;
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainLogRow {
    std::string phase;
    long step = 0;            // gradient updates so far (offline) / environment steps (online)
    long gradient_updates = 0;
    double critic_loss = 0.0;  // mean over critics and over the interval
    double td_loss = 0.0;
    double pa_loss = 0.0;
    double q_data = 0.0;
    double q_infeasible = 0.0;
    double actor_loss = 0.0;
    double eval_return = std::numeric_limits<double>::quiet_NaN();
    double eval_goal_rate = std::numeric_limits<double>::quiet_NaN();
    double dormant_ratio = 0.0;

    bool operator==(const TrainLogRow& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return phase == o.phase && step == o.step && gradient_updates == o.gradient_updates
               && same(critic_loss, o.critic_loss) && same(td_loss, o.td_loss) && same(pa_loss, o.pa_loss)
               && same(q_data, o.q_data) && same(q_infeasible, o.q_infeasible) && same(actor_loss, o.actor_loss)
               && same(eval_return, o.eval_return) && same(eval_goal_rate, o.eval_goal_rate)
               && same(dormant_ratio, o.dormant_ratio);
    }
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    long gradient_updates = 0;

    bool operator==(const TrainLog&) const = default;
};

inline constexpr const char* kTrainLogHeader =
    "phase,step,gradient_updates,critic_loss,td_loss,pa_loss,q_data,q_infeasible,actor_loss,eval_return,"
    "eval_goal_rate,dormant_ratio";

inline void write_train_log_csv(std::ostream& os, const TrainLog& log) {
    os << kTrainLogHeader << '\n';
    for (const auto& r : log.rows) {
        os << r.phase << ',' << r.step << ',' << r.gradient_updates << ',' << format_real(r.critic_loss) << ','
           << format_real(r.td_loss) << ',' << format_real(r.pa_loss) << ',' << format_real(r.q_data) << ','
           << format_real(r.q_infeasible) << ',' << format_real(r.actor_loss) << ',' << format_real(r.eval_return)
           << ',' << format_real(r.eval_goal_rate) << ',' << format_real(r.dormant_ratio) << '\n';
    }
}

struct TrainResult {
    ParsAgent agent;
    TrainLog log;
};

/// Shared per-update machinery for the offline and online loops.
class ParsUpdater {
public:
    ParsUpdater(const ParsConfig& cfg, ParsAgent& agent, double q_min, double q_abs_limit, std::uint64_t seed)
        : cfg_(cfg), ag_(agent), q_min_(q_min), q_abs_limit_(q_abs_limit),
          target_rng_(derive_seed(seed, "target")), infeasible_rng_(derive_seed(seed, "infeasible")),
          actor_rng_(derive_seed(seed, "actor_subset")) {}

    void update(const Batch& b, Phase phase) {
        const Vector y = td_target(cfg_, ag_.critics, ag_.actor, b, target_rng_);
        Matrix a_inf;
        if (cfg_.use_pa())
            a_inf = sample_infeasible(static_cast<int>(b.a.rows()), cfg_.guard_multiplier, b.size(), infeasible_rng_);
        double total = 0, td = 0, pa = 0, qd = 0, qi = 0;
        for (std::size_t j = 0; j < ag_.critics.size(); ++j) {
            CriticLoss l = critic_loss_and_grad(cfg_, ag_.critics.online[j], y, b, a_inf, q_min_);
            adam_update(ag_.critics.online[j], l.grad, ag_.critics.opt[j]);
            total += l.total;
            td += l.td_loss;
            pa += l.pa_loss;
            qd += l.mean_q_data;
            qi += l.mean_q_infeasible;
        }
        const double nc = static_cast<double>(ag_.critics.size());
        if (!(std::abs(qd / nc) <= q_abs_limit_))
            throw DivergenceError("critic diverged: mean |Q| on data actions " + format_real(std::abs(qd / nc))
                                  + " exceeds " + format_real(q_abs_limit_));
        acc_.critic_loss += total / nc;
        acc_.td_loss += td / nc;
        acc_.pa_loss += pa / nc;
        acc_.q_data += qd / nc;
        acc_.q_infeasible += qi / nc;
        ++acc_count_;
        for (std::size_t j = 0; j < ag_.critics.size(); ++j)
            soft_update_inplace(ag_.critics.target[j], ag_.critics.online[j], cfg_.tau);
        ++updates_;
        if (updates_ % cfg_.policy_delay == 0) {
            ActorLoss al = actor_loss_and_grad(cfg_, ag_.critics, ag_.actor, b, phase, actor_rng_);
            adam_update(ag_.actor.params, al.grad, ag_.actor.opt);
            soft_update_inplace(ag_.actor.target, ag_.actor.params, cfg_.tau);
            acc_.actor_loss += al.loss;
            ++actor_count_;
        }
    }

    /// Interval means since the previous call; resets the accumulators.
    TrainLogRow drain(std::string phase, long step) {
        TrainLogRow r = acc_;
        const double n = acc_count_ > 0 ? static_cast<double>(acc_count_) : 1.0;
        r.phase = std::move(phase);
        r.step = step;
        r.gradient_updates = updates_;
        r.critic_loss /= n;
        r.td_loss /= n;
        r.pa_loss /= n;
        r.q_data /= n;
        r.q_infeasible /= n;
        r.actor_loss = actor_count_ > 0 ? r.actor_loss / static_cast<double>(actor_count_) : 0.0;
        acc_ = TrainLogRow{};
        acc_count_ = 0;
        actor_count_ = 0;
        return r;
    }

    long updates() const { return updates_; }

private:
    const ParsConfig& cfg_;
    ParsAgent& ag_;
    double q_min_;
    double q_abs_limit_;
    Rng target_rng_;
    Rng infeasible_rng_;
    Rng actor_rng_;
    long updates_ = 0;
    TrainLogRow acc_{};
    long acc_count_ = 0;
    long actor_count_ = 0;
};

/// Divergence threshold on mean |Q|: factor * c_reward * max(|r_min|, |r_max|) / (1 - gamma).
inline double divergence_limit(const ParsConfig& cfg, const DatasetStats& st) {
    double r_scale = std::max(std::abs(st.r_min), std::abs(st.r_max));
    if (cfg.r_min_source == RMinSource::Known) r_scale = std::max(r_scale, std::abs(cfg.r_min_known));
    if (r_scale == 0.0) r_scale = 1.0;
    return cfg.divergence_factor * cfg.c_reward * r_scale / (1.0 - cfg.gamma);
}

/// Dormant ratio of critic 0 on states/actions drawn from `src`.
template <class Source>
double critic_dormant_ratio(const ParsConfig& cfg, const ParsAgent& ag, const Source& src, Rng& rng) {
    const Batch b = to_batch(sample_batch(src, static_cast<std::size_t>(cfg.dormant_batch), rng));
    return dormant_ratio(ag.critics.online[0], stack_rows(b.s, b.a)).dormant_ratio;
}

struct TrainOptions {
    const EnvSpec* eval_env = nullptr;  // evaluate at every log row when set
};

inline EvalResult evaluate_agent(const EnvSpec& env, const ParsAgent& ag, int episodes, std::uint64_t seed) {
    return evaluate_policy(env, [&](const Vector& s) { return ag.actor.act(s); }, episodes, seed);
}

inline TrainResult train_offline(const ParsConfig& cfg, const TransitionDataset& ds, std::uint64_t seed,
                                 const TrainOptions& opts = {}) {
    cfg.validate();
    const DatasetStats st = dataset_stats(ds);
    TrainResult res{make_agent(cfg, ds.state_dim, ds.action_dim, ds.feasible_low, ds.feasible_high, seed), {}};
    const double q_min = compute_q_min(cfg, st);
    ParsUpdater up(cfg, res.agent, q_min, divergence_limit(cfg, st), seed);
    Rng sample_rng(derive_seed(seed, "sampling"));
    Rng dormant_rng(derive_seed(seed, "dormant"));
    for (long step = 1; step <= cfg.max_gradient_steps; ++step) {
        up.update(to_batch(sample_batch(ds, static_cast<std::size_t>(cfg.batch_size), sample_rng)), Phase::Offline);
        if (step % cfg.log_interval == 0 || step == cfg.max_gradient_steps) {
            TrainLogRow row = up.drain("offline", step);
            row.dormant_ratio = critic_dormant_ratio(cfg, res.agent, ds, dormant_rng);
            if (opts.eval_env && cfg.eval_episodes > 0) {
                const EvalResult ev =
                    evaluate_agent(*opts.eval_env, res.agent, cfg.eval_episodes, derive_seed(seed, "eval"));
                row.eval_return = ev.mean_return;
                row.eval_goal_rate = ev.goal_rate;
            }
            res.log.rows.push_back(std::move(row));
        }
    }
    res.log.gradient_updates = up.updates();
    return res;
}

/// Online fine-tuning from a trained agent: per environment step, act with
/// Gaussian exploration (clipped to the box), store the transition, then run
/// utd_ratio updates on mixed offline/online batches.
inline TrainResult finetune_online(const ParsConfig& cfg, const ParsAgent& checkpoint, const EnvSpec& env,
                                   const TransitionDataset& ds, long online_steps, std::uint64_t seed) {
    cfg.validate();
    env.validate();
    if (online_steps < 0) throw InvalidArgument("finetune_online: online_steps must be >= 0");
    TrainResult res{checkpoint, {}};
    // fresh optimizers with the online learning rates
    res.agent.actor.opt = AdamState::for_params(res.agent.actor.params, cfg.actor_lr);
    for (std::size_t j = 0; j < res.agent.critics.size(); ++j)
        res.agent.critics.opt[j] = AdamState::for_params(res.agent.critics.online[j], cfg.critic_lr);
    if (static_cast<int>(res.agent.critics.size()) != cfg.n_critics)
        throw InvalidArgument("finetune_online: checkpoint critic count differs from n_critics");
    const DatasetStats st = dataset_stats(ds);
    ParsUpdater up(cfg, res.agent, compute_q_min(cfg, st), divergence_limit(cfg, st), seed);
    ReplayBuffer buffer(static_cast<std::size_t>(std::max<long>(online_steps, 1)));
    Rng sample_rng(derive_seed(seed, "sampling"));
    Rng explore_rng(derive_seed(seed, "explore"));
    Rng dormant_rng(derive_seed(seed, "dormant"));
    std::uint64_t episode = 0;
    Vector s = env_reset(env, derive_seed(derive_seed(seed, "env"), episode));
    int t_in_episode = 0;
    const Vector half = (env.feasible_high - env.feasible_low) * 0.5;
    for (long step = 1; step <= online_steps; ++step) {
        Vector a = res.agent.actor.act(s);
        for (Eigen::Index k = 0; k < a.size(); ++k)
            a[k] = std::clamp(a[k] + cfg.exploration_noise * half[k] * explore_rng.normal(), env.feasible_low[k],
                              env.feasible_high[k]);
        const StepResult sr = env_step(env, s, a, t_in_episode);
        buffer.add(Transition{s, a, sr.r, sr.s_next, sr.done, sr.truncated});
        ++t_in_episode;
        if (sr.done || sr.truncated) {
            ++episode;
            s = env_reset(env, derive_seed(derive_seed(seed, "env"), episode));
            t_in_episode = 0;
        } else {
            s = sr.s_next;
        }
        for (int u = 0; u < cfg.utd_ratio; ++u)
            up.update(to_batch(mixed_sample(ds, buffer, cfg.offline_fraction, static_cast<std::size_t>(cfg.batch_size),
                                            sample_rng)),
                      Phase::Online);
        if (step % cfg.log_interval == 0 || step == online_steps) {
            TrainLogRow row = up.drain("online", step);
            row.dormant_ratio = critic_dormant_ratio(cfg, res.agent, ds, dormant_rng);
            if (cfg.eval_episodes > 0) {
                const EvalResult ev = evaluate_agent(env, res.agent, cfg.eval_episodes, derive_seed(seed, "eval"));
                row.eval_return = ev.mean_return;
                row.eval_goal_rate = ev.goal_rate;
            }
            res.log.rows.push_back(std::move(row));
        }
    }
    res.log.gradient_updates = up.updates();
    return res;
}

// ---------------------------------------------------------------------------
// Agent checkpoints: a header line followed by nn_core network blocks.

inline void write_agent(std::ostream& os, const ParsAgent& ag) {
    os << "pars-agent 1 " << ag.critics.size() << '\n';
    os << "bounds";
    for (Eigen::Index k = 0; k < ag.actor.low.size(); ++k) os << ' ' << format_real(ag.actor.low[k]);
    for (Eigen::Index k = 0; k < ag.actor.high.size(); ++k) os << ' ' << format_real(ag.actor.high[k]);
    os << '\n';
    write_mlp(os, ag.actor.params, "actor");
    write_mlp(os, ag.actor.target, "actor_target");
    for (std::size_t j = 0; j < ag.critics.size(); ++j) {
        write_mlp(os, ag.critics.online[j], "critic" + std::to_string(j));
        write_mlp(os, ag.critics.target[j], "critic_target" + std::to_string(j));
    }
}

inline ParsAgent read_agent(std::istream& is, double actor_lr = 3e-4, double critic_lr = 3e-4) {
    LineReader in(is);
    auto head = in.expect_tokens("agent header");
    if (head.size() != 3 || head[0] != "pars-agent" || head[1] != "1")
        throw ParseError(in.line_no(), "expected 'pars-agent 1 <n_critics>'");
    const auto n = parse_int(head[2], in.line_no());
    if (n < 1) throw SchemaError(in.line_no(), "critic count must be positive");
    std::vector<double> bounds;
    {
        auto tok = in.expect_tokens("bounds");
        if (tok.empty() || tok[0] != "bounds" || tok.size() % 2 == 0)
            throw ParseError(in.line_no(), "expected 'bounds <low...> <high...>'");
        for (std::size_t k = 1; k < tok.size(); ++k) bounds.push_back(parse_real(tok[k], in.line_no()));
    }
    ParsAgent ag;
    const auto ad = static_cast<Eigen::Index>(bounds.size() / 2);
    ag.actor.low = Eigen::Map<const Vector>(bounds.data(), ad);
    ag.actor.high = Eigen::Map<const Vector>(bounds.data() + ad, ad);
    ag.actor.params = read_mlp(in);
    ag.actor.target = read_mlp(in);
    if (ag.actor.params.spec.output_dim != ad) throw SchemaError(in.line_no(), "actor output does not match bounds");
    ag.actor.opt = AdamState::for_params(ag.actor.params, actor_lr);
    for (std::int64_t j = 0; j < n; ++j) {
        ag.critics.online.push_back(read_mlp(in));
        ag.critics.target.push_back(read_mlp(in));
        ag.critics.opt.push_back(AdamState::for_params(ag.critics.online.back(), critic_lr));
    }
    return ag;
}

}  // namespace pars
