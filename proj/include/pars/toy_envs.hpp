#pragma once

// Deterministic toy continuous-action tasks and the behavior policies that
// produce clustered offline datasets for them.
//
//   point_maze_2d  state (x, y) in [0,1]^2, action in [-1,1]^2 scaled by
//                  step_scale; rectangles (and the unit-square border) block
//                  movement; sparse reward 1 + done inside the goal disc.
//   line_walk_1d   state x in [0,1], action in [-1,1] scaled by step_scale and
//                  clamped to [0,1]; shaped reward -|x' - goal|.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pars/data_store.hpp"
#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/rng.hpp"

namespace pars {

enum class RewardKind { SparseGoal, Shaped };

struct Rect {
    double x0, y0, x1, y1;
    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    bool operator==(const Rect&) const = default;
};

struct EnvSpec {
    std::string env_id;
    int state_dim = 0;
    int action_dim = 0;
    Vector feasible_low;
    Vector feasible_high;
    int max_episode_steps = 0;
    double step_scale = 0.05;
    Vector start;
    double start_noise = 0.0;
    Vector goal;
    double goal_radius = 0.0;
    std::vector<Rect> walls;
    std::vector<Vector> waypoints;  // navigation corners used by scripted behavior
    RewardKind reward_kind = RewardKind::SparseGoal;

    bool is_maze() const { return env_id == "point_maze_2d"; }

    /// U-shaped maze: a block from the left wall splits the square, so the
    /// start (bottom left) reaches the goal (top left) only via the right side.
    static EnvSpec point_maze_2d() {
        EnvSpec e;
        e.env_id = "point_maze_2d";
        e.state_dim = 2;
        e.action_dim = 2;
        e.feasible_low = Vector::Constant(2, -1.0);
        e.feasible_high = Vector::Constant(2, 1.0);
        e.max_episode_steps = 300;
        e.step_scale = 0.05;
        e.start = Vector(2);
        e.start << 0.15, 0.15;
        e.start_noise = 0.02;
        e.goal = Vector(2);
        e.goal << 0.15, 0.85;
        e.goal_radius = 0.1;
        e.walls = {Rect{0.0, 0.4, 0.7, 0.6}};
        Vector w1(2), w2(2);
        w1 << 0.85, 0.2;
        w2 << 0.85, 0.8;
        e.waypoints = {w1, w2};
        e.reward_kind = RewardKind::SparseGoal;
        return e;
    }

    static EnvSpec line_walk_1d() {
        EnvSpec e;
        e.env_id = "line_walk_1d";
        e.state_dim = 1;
        e.action_dim = 1;
        e.feasible_low = Vector::Constant(1, -1.0);
        e.feasible_high = Vector::Constant(1, 1.0);
        e.max_episode_steps = 50;
        e.step_scale = 0.05;
        e.start = Vector::Constant(1, 0.2);
        e.start_noise = 0.05;
        e.goal = Vector::Constant(1, 0.8);
        e.goal_radius = 0.025;
        e.reward_kind = RewardKind::Shaped;
        return e;
    }

    static EnvSpec by_id(std::string_view id) {
        if (id == "point_maze_2d") return point_maze_2d();
        if (id == "line_walk_1d") return line_walk_1d();
        throw InvalidArgument("unknown env_id '" + std::string(id) + "'");
    }

    void validate() const {
        if (env_id != "point_maze_2d" && env_id != "line_walk_1d") throw InvalidArgument("EnvSpec: unknown env_id");
        if (feasible_low.size() != action_dim || feasible_high.size() != action_dim)
            throw InvalidArgument("EnvSpec: bounds do not match action_dim");
        for (Eigen::Index k = 0; k < action_dim; ++k)
            if (feasible_low[k] != -1.0 || feasible_high[k] != 1.0)
                throw InvalidArgument("EnvSpec: the feasible box must be [-1, 1]^n");
        if (start.size() != state_dim || goal.size() != state_dim) throw InvalidArgument("EnvSpec: start/goal dims");
        if (max_episode_steps < 1) throw InvalidArgument("EnvSpec: max_episode_steps must be >= 1");
        if (!(step_scale > 0.0)) throw InvalidArgument("EnvSpec: step_scale must be positive");
    }
};

struct StepResult {
    Vector s_next;
    double r = 0.0;
    bool done = false;
    bool truncated = false;
};

inline bool in_goal(const EnvSpec& e, const Vector& s) { return (s - e.goal).norm() <= e.goal_radius; }

inline bool blocked(const EnvSpec& e, const Vector& s) {
    if (!e.is_maze()) return false;
    if (s[0] < 0.0 || s[0] > 1.0 || s[1] < 0.0 || s[1] > 1.0) return true;
    for (const auto& w : e.walls)
        if (w.contains(s[0], s[1])) return true;
    return false;
}

inline Vector env_reset(const EnvSpec& e, std::uint64_t seed) {
    Rng rng(seed);
    Vector s = e.start;
    if (e.start_noise > 0.0) {
        for (Eigen::Index k = 0; k < s.size(); ++k) s[k] += rng.uniform(-e.start_noise, e.start_noise);
        if (!e.is_maze()) s = s.cwiseMax(0.0).cwiseMin(1.0);
        if (blocked(e, s)) s = e.start;
    }
    return s;
}

/// One transition. `step_index` (0-based) marks truncation at the horizon;
/// pass -1 to disable.
inline StepResult env_step(const EnvSpec& e, const Vector& s, const Vector& a, int step_index = -1) {
    if (a.size() != e.action_dim || s.size() != e.state_dim) throw ShapeError("env_step: dimension mismatch");
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (!(a[k] >= e.feasible_low[k] && a[k] <= e.feasible_high[k]))
            throw InvalidArgument("env_step: action outside the feasible box");
    StepResult out;
    Vector next = s + e.step_scale * a;
    if (e.is_maze()) {
        out.s_next = blocked(e, next) ? s : next;
    } else {
        out.s_next = next.cwiseMax(0.0).cwiseMin(1.0);
    }
    if (e.reward_kind == RewardKind::SparseGoal) {
        out.done = in_goal(e, out.s_next);
        out.r = out.done ? 1.0 : 0.0;
    } else {
        out.r = -(out.s_next - e.goal).norm();
    }
    out.truncated = !out.done && step_index >= 0 && step_index + 1 >= e.max_episode_steps;
    return out;
}

/// Uniform free position (rejection sampling inside the square).
inline Vector random_free_state(const EnvSpec& e, Rng& rng) {
    Vector s(e.state_dim);
    do {
        for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = rng.uniform();
    } while (blocked(e, s) || in_goal(e, s));
    return s;
}

// ---------------------------------------------------------------------------
// Navigation for scripted behavior

/// True when no point of p->q lies within `margin` of a wall. Points closer
/// than `skip` to p are not checked, so a route may leave a wall it starts on.
inline bool segment_clear(const EnvSpec& e, const Vector& p, const Vector& q, double margin = 0.0, double skip = 0.0) {
    if (!e.is_maze()) return true;
    const double len = (q - p).norm();
    const int n = std::max(2, static_cast<int>(std::ceil(len / 0.01)));
    for (int k = 0; k <= n; ++k) {
        const Vector x = p + (q - p) * (static_cast<double>(k) / n);
        if (margin > 0.0 && len * k / n < skip) continue;
        for (const auto& w : e.walls)
            if (x[0] >= w.x0 - margin && x[0] <= w.x1 + margin && x[1] >= w.y0 - margin && x[1] <= w.y1 + margin)
                return false;
    }
    return true;
}

namespace detail {

inline std::optional<Vector> route_hop(const EnvSpec& e, const Vector& pos, const Vector& target, double margin) {
    if (segment_clear(e, pos, target, margin, margin)) return target;
    std::vector<Vector> nodes;
    nodes.push_back(pos);
    for (const auto& w : e.waypoints) nodes.push_back(w);
    nodes.push_back(target);
    const std::size_t n = nodes.size();
    std::vector<double> dist(n, 1e300);
    std::vector<std::size_t> prev(n, n);
    std::vector<bool> done(n, false);
    dist[0] = 0.0;
    for (std::size_t it = 0; it < n; ++it) {
        std::size_t u = n;
        for (std::size_t k = 0; k < n; ++k)
            if (!done[k] && (u == n || dist[k] < dist[u])) u = k;
        if (u == n || dist[u] >= 1e300) break;
        done[u] = true;
        for (std::size_t v = 0; v < n; ++v) {
            if (done[v] || !segment_clear(e, nodes[u], nodes[v], margin, u == 0 ? margin : 0.0)) continue;
            const double d = dist[u] + (nodes[u] - nodes[v]).norm();
            if (d < dist[v]) {
                dist[v] = d;
                prev[v] = u;
            }
        }
    }
    if (prev[n - 1] == n) return std::nullopt;
    std::size_t v = n - 1;
    while (prev[v] != 0) v = prev[v];
    return nodes[v];
}

}  // namespace detail

/// Next point to head for on the shortest visibility-graph route from `pos`
/// to `target` through the waypoints. Routes keep `clearance` from walls so
/// axis-aligned moves along them do not clip a corner; if none exists (pos
/// already hugs a wall) the plain route is used.
inline Vector next_hop(const EnvSpec& e, const Vector& pos, const Vector& target, double clearance = 0.0) {
    if (clearance > 0.0)
        if (auto h = detail::route_hop(e, pos, target, clearance)) return *h;
    return detail::route_hop(e, pos, target, 0.0).value_or(target);
}

// ---------------------------------------------------------------------------
// Behavior policies

enum class BehaviorKind { ClusteredNoisyExpert, Random, Mixture };

inline std::string_view to_string(BehaviorKind k) {
    switch (k) {
        case BehaviorKind::ClusteredNoisyExpert: return "clustered_noisy_expert";
        case BehaviorKind::Random: return "random";
        case BehaviorKind::Mixture: return "mixture";
    }
    return "?";
}

struct BehaviorSpec {
    BehaviorKind kind = BehaviorKind::ClusteredNoisyExpert;
    std::vector<Vector> centers;  // cluster centers in action space
    double noise = 0.05;          // Gaussian stddev around the chosen center
    int episodes = 10;
    int episode_length = 0;       // 0: use the environment horizon
    double expert_prob = 0.8;     // chance of taking the best-aligned cluster
    double random_prob = 0.3;     // mixture: chance of a uniform action
    bool random_starts = false;   // start anywhere in free space
    bool random_targets = false;  // head to a random free point instead of the goal
    double goal_fraction = 0.0;   // with random_targets: share of episodes still aimed at the goal
    double clearance = 0.0;       // distance the scripted route keeps from walls

    /// Two clusters on the first axis at +-0.6.
    static BehaviorSpec two_clusters(int action_dim) {
        BehaviorSpec b;
        Vector c1 = Vector::Zero(action_dim), c2 = Vector::Zero(action_dim);
        c1[0] = -0.6;
        c2[0] = 0.6;
        b.centers = {c1, c2};
        return b;
    }

    /// Four clusters at +-0.6 along each axis of a 2-D action space.
    static BehaviorSpec cardinal_clusters() {
        BehaviorSpec b;
        for (int axis = 0; axis < 2; ++axis)
            for (double sign : {-1.0, 1.0}) {
                Vector c = Vector::Zero(2);
                c[axis] = 0.6 * sign;
                b.centers.push_back(c);
            }
        return b;
    }

    static BehaviorSpec defaults_for(const EnvSpec& e) {
        if (e.is_maze()) {
            BehaviorSpec b = cardinal_clusters();
            b.episodes = 100;
            b.episode_length = 150;
            b.random_starts = true;
            b.random_targets = true;
            b.goal_fraction = 0.7;
            b.clearance = 0.1;
            return b;
        }
        BehaviorSpec b = two_clusters(e.action_dim);
        b.episodes = 40;
        return b;
    }
};

inline Vector clip_to_box(const Vector& a, const Vector& lo, const Vector& hi) { return a.cwiseMax(lo).cwiseMin(hi); }

/// Stateful scripted behavior for one episode.
class BehaviorPolicy {
public:
    BehaviorPolicy(const EnvSpec& e, const BehaviorSpec& b, Vector target, Rng& rng)
        : env_(e), beh_(b), target_(std::move(target)), rng_(rng) {}

    Vector act(const Vector& s) {
        const bool uniform = beh_.kind == BehaviorKind::Random
                             || (beh_.kind == BehaviorKind::Mixture && rng_.uniform() < beh_.random_prob);
        if (uniform || beh_.centers.empty()) {
            Vector a(env_.action_dim);
            for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = rng_.uniform(-1.0, 1.0);
            return a;
        }
        std::size_t pick = 0;
        if (rng_.uniform() < beh_.expert_prob) {
            const Vector dir = next_hop(env_, s, target_, beh_.clearance) - s;
            double best = -1e300;
            for (std::size_t c = 0; c < beh_.centers.size(); ++c) {
                const double n = beh_.centers[c].norm();
                const double score = n > 0 ? beh_.centers[c].dot(dir) / n : -1e300;
                if (score > best) {
                    best = score;
                    pick = c;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng_.index(beh_.centers.size()));
        }
        Vector a = beh_.centers[pick];
        for (Eigen::Index k = 0; k < a.size(); ++k) a[k] += beh_.noise * rng_.normal();
        return clip_to_box(a, env_.feasible_low, env_.feasible_high);
    }

private:
    const EnvSpec& env_;
    const BehaviorSpec& beh_;
    Vector target_;
    Rng& rng_;
};

inline TransitionDataset empty_dataset_for(const EnvSpec& e) {
    TransitionDataset ds;
    ds.env_id = e.env_id;
    ds.state_dim = e.state_dim;
    ds.action_dim = e.action_dim;
    ds.feasible_low = e.feasible_low;
    ds.feasible_high = e.feasible_high;
    return ds;
}

/// Rolls out the behavior policy and records every transition in episode
/// order, so a non-terminal, non-truncated record is followed by its successor.
inline TransitionDataset generate_offline_dataset(const EnvSpec& e, const BehaviorSpec& b, std::uint64_t seed) {
    e.validate();
    if (b.episodes < 0) throw InvalidArgument("BehaviorSpec: episodes must be >= 0");
    for (const auto& c : b.centers)
        if (c.size() != e.action_dim) throw InvalidArgument("BehaviorSpec: cluster center dimension mismatch");
    TransitionDataset ds = empty_dataset_for(e);
    Rng rng(seed);
    const int horizon = b.episode_length > 0 ? std::min(b.episode_length, e.max_episode_steps) : e.max_episode_steps;
    for (int ep = 0; ep < b.episodes; ++ep) {
        Vector s = b.random_starts ? random_free_state(e, rng) : env_reset(e, rng.next_u64());
        const bool wander = b.random_targets && e.is_maze() && !(rng.uniform() < b.goal_fraction);
        const Vector target = wander ? random_free_state(e, rng) : e.goal;
        BehaviorPolicy pi(e, b, target, rng);
        for (int t = 0; t < horizon; ++t) {
            Transition tr;
            tr.s = s;
            tr.a = pi.act(s);
            const StepResult res = env_step(e, s, tr.a);
            tr.r = res.r;
            tr.s_next = res.s_next;
            tr.done = res.done;
            tr.truncated = !res.done && t + 1 == horizon;
            ds.transitions.push_back(tr);
            if (res.done) break;
            s = res.s_next;
        }
    }
    return ds;
}

struct EvalResult {
    double mean_return = 0.0;
    double goal_rate = 0.0;
};

using ActorFn = std::function<Vector(const Vector&)>;

/// Runs `episodes` deterministic episodes; episode k starts from
/// env_reset(derive_seed(seed, k)).
inline EvalResult evaluate_policy(const EnvSpec& e, const ActorFn& actor, int episodes, std::uint64_t seed) {
    if (episodes <= 0) throw InvalidArgument("evaluate_policy: episodes must be >= 1");
    EvalResult out;
    int reached = 0;
    double total = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        Vector s = env_reset(e, derive_seed(seed, static_cast<std::uint64_t>(ep)));
        double ret = 0.0;
        bool goal = false;
        for (int t = 0; t < e.max_episode_steps; ++t) {
            const StepResult res = env_step(e, s, actor(s), t);
            ret += res.r;
            s = res.s_next;
            goal = goal || in_goal(e, s);
            if (res.done || res.truncated) break;
        }
        total += ret;
        reached += goal ? 1 : 0;
    }
    out.mean_return = total / episodes;
    out.goal_rate = static_cast<double>(reached) / episodes;
    return out;
}

}  // namespace pars
