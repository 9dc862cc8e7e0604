#pragma once

// Run configuration: `key = value` lines grouped under `[section]` headers.
// Every key has a default; unknown keys, malformed values and constraint
// violations raise ConfigError naming the key and line.
//
// Environment and behavior defaults follow env_id: setting env_id resets the
// [env] and [behavior] sections to that environment's defaults before the
// file's other keys are applied, whatever their order in the file.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pars/didactic_lab.hpp"
#include "pars/error.hpp"
#include "pars/pars_trainer.hpp"
#include "pars/text_io.hpp"
#include "pars/toy_envs.hpp"

namespace pars {

struct OnlineSettings {
    long steps = 2000;        // environment steps
    double alpha = 0.001;     // penalty weight while fine-tuning; 0 drops it online
    std::string checkpoint;   // empty: train offline first within the run
};

struct DiagnosticsSettings {
    std::string checkpoint;  // empty: train offline first within the run
    int sarsa_steps = 2000;
    double sarsa_lr = 3e-4;
    int maxq_steps = 2000;
    double maxq_lr = 1e-3;
    int ntk_resolution = 21;
    double ntk_extent = 3.0;  // NTK action grid covers [-extent, extent]^2
    double eps_id = 0.0;      // 0: 1% of the action-box diagonal
    double dormant_threshold = 0.0;
    int probe_points = 512;   // state-action pairs classified ID / OOD-in / OOD-out
};

struct DidacticSettings {
    RegressionTask task;
    int steps = 3000;
    int grid_resolution = 41;
};

struct TabularSettings {
    int instances = 100;
    int n_states = 6;
    int n_actions = 4;
    double density = 0.5;
    double gamma = 0.9;
    int k = 3;
    int trials = 100;
    double tol = 1e-12;
    int max_iterations = 10000;
};

struct AblateSettings {
    std::vector<double> c_values{1.0, 10.0, 100.0, 1000.0};
    double alpha = 0.01;  // penalty weight used by the PA variants
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out = "run";
    EnvSpec env = EnvSpec::point_maze_2d();
    BehaviorSpec behavior = BehaviorSpec::defaults_for(EnvSpec::point_maze_2d());
    ParsConfig pars;
    OnlineSettings online;
    DiagnosticsSettings diagnostics;
    DidacticSettings didactic;
    TabularSettings tabular;
    AblateSettings ablate;

    void set_env_id(std::string_view id) {
        env = EnvSpec::by_id(id);
        behavior = BehaviorSpec::defaults_for(env);
    }
};

namespace config_detail {

struct Field {
    std::string section;
    std::string key;
    std::function<void(RunConfig&, std::string_view, std::size_t)> parse;
    std::function<std::string(const RunConfig&)> format;

    std::string name() const { return section + "." + key; }
};

[[noreturn]] inline void bad(const std::string& key, std::size_t line, const std::string& why) {
    throw ConfigError(key, line, why);
}

inline double real_of(const std::string& key, std::string_view v, std::size_t line) {
    double x = 0.0;
    if (!try_parse_real(trim(v), x)) bad(key, line, "expected a real number, got '" + std::string(v) + "'");
    return x;
}

inline std::int64_t int_of(const std::string& key, std::string_view v, std::size_t line) {
    std::int64_t x = 0;
    if (!try_parse_int(trim(v), x)) bad(key, line, "expected an integer, got '" + std::string(v) + "'");
    return x;
}

inline bool bool_of(const std::string& key, std::string_view v, std::size_t line) {
    v = trim(v);
    if (v == "true") return true;
    if (v == "false") return false;
    bad(key, line, "expected true or false, got '" + std::string(v) + "'");
}

inline std::vector<double> reals_of(const std::string& key, std::string_view v, std::size_t line) {
    std::vector<double> out;
    for (auto tok : split_ws(v)) out.push_back(real_of(key, tok, line));
    return out;
}

inline Vector vector_of(const std::string& key, std::string_view v, std::size_t line) {
    const auto xs = reals_of(key, v, line);
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

/// "a b; c d" -> groups of reals, each of size `width` (0: any).
inline std::vector<std::vector<double>> groups_of(const std::string& key, std::string_view v, std::size_t line,
                                                  std::size_t width) {
    std::vector<std::vector<double>> out;
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const std::size_t semi = std::min(v.find(';', start), v.size());
        auto g = reals_of(key, v.substr(start, semi - start), line);
        if (g.empty() || (width && g.size() != width))
            bad(key, line, "each ';'-separated group needs " + (width ? std::to_string(width) : "some") + " numbers");
        out.push_back(std::move(g));
        start = semi + 1;
    }
    return out;
}

inline std::string fmt(double x) { return format_real(x); }
inline std::string fmt(bool b) { return b ? "true" : "false"; }

inline std::string fmt_list(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? " " : "") + format_real(xs[k]);
    return s;
}

inline std::string fmt_vec(const Vector& v) { return fmt_list(std::vector<double>(v.data(), v.data() + v.size())); }

inline std::string fmt_ints(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? " " : "") + std::to_string(xs[k]);
    return s;
}

template <class E>
struct EnumName {
    E value;
    const char* name;
};

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        auto add = [&](std::string sec, std::string key, auto parse, auto format) {
            f.push_back(Field{std::move(sec), std::move(key), parse, format});
        };
        // Typed helpers binding a member reached through `get`.
        auto real = [&](std::string sec, std::string key, auto get) {
            const std::string name = sec + "." + key;
            add(sec, key, [=](RunConfig& c, std::string_view v, std::size_t l) { get(c) = real_of(name, v, l); },
                [=](const RunConfig& c) { return fmt(get(const_cast<RunConfig&>(c))); });
        };
        auto integer = [&](std::string sec, std::string key, auto get) {
            const std::string name = sec + "." + key;
            add(sec, key,
                [=](RunConfig& c, std::string_view v, std::size_t l) {
                    using T = std::decay_t<decltype(get(c))>;
                    const auto x = int_of(name, v, l);
                    if constexpr (std::is_unsigned_v<T>) {
                        if (x < 0) bad(name, l, "must be non-negative");
                    } else if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
                        bad(name, l, "out of range");
                    }
                    get(c) = static_cast<T>(x);
                },
                [=](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); });
        };
        auto boolean = [&](std::string sec, std::string key, auto get) {
            const std::string name = sec + "." + key;
            add(sec, key, [=](RunConfig& c, std::string_view v, std::size_t l) { get(c) = bool_of(name, v, l); },
                [=](const RunConfig& c) { return fmt(get(const_cast<RunConfig&>(c))); });
        };
        auto text = [&](std::string sec, std::string key, auto get) {
            add(sec, key, [=](RunConfig& c, std::string_view v, std::size_t) { get(c) = std::string(trim(v)); },
                [=](const RunConfig& c) { return get(const_cast<RunConfig&>(c)); });
        };
        auto vec = [&](std::string sec, std::string key, auto get) {
            const std::string name = sec + "." + key;
            add(sec, key, [=](RunConfig& c, std::string_view v, std::size_t l) { get(c) = vector_of(name, v, l); },
                [=](const RunConfig& c) { return fmt_vec(get(const_cast<RunConfig&>(c))); });
        };
        auto ints = [&](std::string sec, std::string key, auto get) {
            const std::string name = sec + "." + key;
            add(sec, key,
                [=](RunConfig& c, std::string_view v, std::size_t l) {
                    std::vector<int> out;
                    for (auto tok : split_ws(v)) out.push_back(static_cast<int>(int_of(name, tok, l)));
                    get(c) = out;
                },
                [=](const RunConfig& c) { return fmt_ints(get(const_cast<RunConfig&>(c))); });
        };
        auto enumeration = [&](std::string sec, std::string key, auto get, auto names) {
            const std::string name = sec + "." + key;
            add(sec, key,
                [=](RunConfig& c, std::string_view v, std::size_t l) {
                    v = trim(v);
                    for (const auto& n : names)
                        if (v == n.name) {
                            get(c) = n.value;
                            return;
                        }
                    std::string opts;
                    for (const auto& n : names) opts += std::string(opts.empty() ? "" : ", ") + n.name;
                    bad(name, l, "expected one of " + opts + ", got '" + std::string(v) + "'");
                },
                [=](const RunConfig& c) {
                    for (const auto& n : names)
                        if (get(const_cast<RunConfig&>(c)) == n.value) return std::string(n.name);
                    return std::string("?");
                });
        };
        const std::vector<EnumName<Activation>> activations = [] {
            std::vector<EnumName<Activation>> v;
            for (Activation a : kAllActivations) v.push_back({a, to_string(a).data()});
            return v;
        }();

        // [run]
        integer("run", "seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
        text("run", "out", [](RunConfig& c) -> std::string& { return c.out; });

        // [env]; env_id is applied before every other key
        add("env", "env_id", [](RunConfig& c, std::string_view v, std::size_t l) {
                try {
                    c.set_env_id(trim(v));
                } catch (const InvalidArgument& e) {
                    bad("env.env_id", l, e.what());
                }
            },
            [](const RunConfig& c) { return c.env.env_id; });
        integer("env", "max_episode_steps", [](RunConfig& c) -> int& { return c.env.max_episode_steps; });
        real("env", "step_scale", [](RunConfig& c) -> double& { return c.env.step_scale; });
        vec("env", "start", [](RunConfig& c) -> Vector& { return c.env.start; });
        real("env", "start_noise", [](RunConfig& c) -> double& { return c.env.start_noise; });
        vec("env", "goal", [](RunConfig& c) -> Vector& { return c.env.goal; });
        real("env", "goal_radius", [](RunConfig& c) -> double& { return c.env.goal_radius; });
        add("env", "walls",
            [](RunConfig& c, std::string_view v, std::size_t l) {
                c.env.walls.clear();
                for (const auto& g : groups_of("env.walls", v, l, 4)) {
                    if (!(g[0] < g[2] && g[1] < g[3])) bad("env.walls", l, "each wall needs x0 < x1 and y0 < y1");
                    c.env.walls.push_back(Rect{g[0], g[1], g[2], g[3]});
                }
            },
            [](const RunConfig& c) {
                std::string s;
                for (const auto& w : c.env.walls) s += (s.empty() ? "" : "; ") + fmt_list({w.x0, w.y0, w.x1, w.y1});
                return s;
            });
        add("env", "waypoints",
            [](RunConfig& c, std::string_view v, std::size_t l) {
                c.env.waypoints.clear();
                for (const auto& g : groups_of("env.waypoints", v, l, 0))
                    c.env.waypoints.push_back(Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size())));
            },
            [](const RunConfig& c) {
                std::string s;
                for (const auto& w : c.env.waypoints) s += (s.empty() ? "" : "; ") + fmt_vec(w);
                return s;
            });

        // [behavior]
        enumeration("behavior", "kind", [](RunConfig& c) -> BehaviorKind& { return c.behavior.kind; },
                    std::vector<EnumName<BehaviorKind>>{{BehaviorKind::ClusteredNoisyExpert, "clustered_noisy_expert"},
                                                        {BehaviorKind::Random, "random"},
                                                        {BehaviorKind::Mixture, "mixture"}});
        add("behavior", "centers",
            [](RunConfig& c, std::string_view v, std::size_t l) {
                c.behavior.centers.clear();
                for (const auto& g : groups_of("behavior.centers", v, l, 0))
                    c.behavior.centers.push_back(Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size())));
            },
            [](const RunConfig& c) {
                std::string s;
                for (const auto& w : c.behavior.centers) s += (s.empty() ? "" : "; ") + fmt_vec(w);
                return s;
            });
        real("behavior", "noise", [](RunConfig& c) -> double& { return c.behavior.noise; });
        integer("behavior", "episodes", [](RunConfig& c) -> int& { return c.behavior.episodes; });
        integer("behavior", "episode_length", [](RunConfig& c) -> int& { return c.behavior.episode_length; });
        real("behavior", "expert_prob", [](RunConfig& c) -> double& { return c.behavior.expert_prob; });
        real("behavior", "random_prob", [](RunConfig& c) -> double& { return c.behavior.random_prob; });
        boolean("behavior", "random_starts", [](RunConfig& c) -> bool& { return c.behavior.random_starts; });
        boolean("behavior", "random_targets", [](RunConfig& c) -> bool& { return c.behavior.random_targets; });
        real("behavior", "goal_fraction", [](RunConfig& c) -> double& { return c.behavior.goal_fraction; });
        real("behavior", "clearance", [](RunConfig& c) -> double& { return c.behavior.clearance; });

        // [pars]
        real("pars", "c_reward", [](RunConfig& c) -> double& { return c.pars.c_reward; });
        real("pars", "alpha", [](RunConfig& c) -> double& { return c.pars.alpha; });
        real("pars", "beta", [](RunConfig& c) -> double& { return c.pars.beta; });
        real("pars", "gamma", [](RunConfig& c) -> double& { return c.pars.gamma; });
        real("pars", "tau", [](RunConfig& c) -> double& { return c.pars.tau; });
        integer("pars", "n_critics", [](RunConfig& c) -> int& { return c.pars.n_critics; });
        integer("pars", "target_subset_size", [](RunConfig& c) -> int& { return c.pars.target_subset_size; });
        integer("pars", "actor_subset_size", [](RunConfig& c) -> int& { return c.pars.actor_subset_size; });
        real("pars", "policy_noise", [](RunConfig& c) -> double& { return c.pars.policy_noise; });
        real("pars", "noise_clip", [](RunConfig& c) -> double& { return c.pars.noise_clip; });
        integer("pars", "policy_delay", [](RunConfig& c) -> int& { return c.pars.policy_delay; });
        real("pars", "exploration_noise", [](RunConfig& c) -> double& { return c.pars.exploration_noise; });
        integer("pars", "utd_ratio", [](RunConfig& c) -> int& { return c.pars.utd_ratio; });
        real("pars", "offline_fraction", [](RunConfig& c) -> double& { return c.pars.offline_fraction; });
        real("pars", "guard_multiplier", [](RunConfig& c) -> double& { return c.pars.guard_multiplier; });
        enumeration("pars", "r_min_source", [](RunConfig& c) -> RMinSource& { return c.pars.r_min_source; },
                    std::vector<EnumName<RMinSource>>{{RMinSource::Known, "known"}, {RMinSource::Dataset, "dataset"}});
        real("pars", "r_min_known", [](RunConfig& c) -> double& { return c.pars.r_min_known; });
        integer("pars", "batch_size", [](RunConfig& c) -> int& { return c.pars.batch_size; });
        integer("pars", "max_gradient_steps", [](RunConfig& c) -> int& { return c.pars.max_gradient_steps; });
        ints("pars", "hidden_dims", [](RunConfig& c) -> std::vector<int>& { return c.pars.hidden_dims; });
        boolean("pars", "critic_ln", [](RunConfig& c) -> bool& { return c.pars.critic_ln; });
        boolean("pars", "actor_ln", [](RunConfig& c) -> bool& { return c.pars.actor_ln; });
        enumeration("pars", "activation", [](RunConfig& c) -> Activation& { return c.pars.activation; }, activations);
        real("pars", "critic_lr", [](RunConfig& c) -> double& { return c.pars.critic_lr; });
        real("pars", "actor_lr", [](RunConfig& c) -> double& { return c.pars.actor_lr; });
        boolean("pars", "train_ln_affine", [](RunConfig& c) -> bool& { return c.pars.train_ln_affine; });
        enumeration("pars", "actor_q_normalization",
                    [](RunConfig& c) -> ActorQNormalization& { return c.pars.actor_q_normalization; },
                    std::vector<EnumName<ActorQNormalization>>{{ActorQNormalization::BatchMeanAbs, "batch_mean_abs"},
                                                               {ActorQNormalization::None, "none"}});
        enumeration("pars", "subset_draw", [](RunConfig& c) -> SubsetDraw& { return c.pars.subset_draw; },
                    std::vector<EnumName<SubsetDraw>>{{SubsetDraw::PerBatch, "per_batch"},
                                                      {SubsetDraw::PerSample, "per_sample"}});
        integer("pars", "log_interval", [](RunConfig& c) -> int& { return c.pars.log_interval; });
        integer("pars", "eval_episodes", [](RunConfig& c) -> int& { return c.pars.eval_episodes; });
        integer("pars", "dormant_batch", [](RunConfig& c) -> int& { return c.pars.dormant_batch; });
        real("pars", "divergence_factor", [](RunConfig& c) -> double& { return c.pars.divergence_factor; });

        // [online]
        integer("online", "steps", [](RunConfig& c) -> long& { return c.online.steps; });
        real("online", "alpha", [](RunConfig& c) -> double& { return c.online.alpha; });
        text("online", "checkpoint", [](RunConfig& c) -> std::string& { return c.online.checkpoint; });

        // [diagnostics]
        text("diagnostics", "checkpoint", [](RunConfig& c) -> std::string& { return c.diagnostics.checkpoint; });
        integer("diagnostics", "sarsa_steps", [](RunConfig& c) -> int& { return c.diagnostics.sarsa_steps; });
        real("diagnostics", "sarsa_lr", [](RunConfig& c) -> double& { return c.diagnostics.sarsa_lr; });
        integer("diagnostics", "maxq_steps", [](RunConfig& c) -> int& { return c.diagnostics.maxq_steps; });
        real("diagnostics", "maxq_lr", [](RunConfig& c) -> double& { return c.diagnostics.maxq_lr; });
        integer("diagnostics", "ntk_resolution", [](RunConfig& c) -> int& { return c.diagnostics.ntk_resolution; });
        real("diagnostics", "ntk_extent", [](RunConfig& c) -> double& { return c.diagnostics.ntk_extent; });
        real("diagnostics", "eps_id", [](RunConfig& c) -> double& { return c.diagnostics.eps_id; });
        real("diagnostics", "dormant_threshold", [](RunConfig& c) -> double& { return c.diagnostics.dormant_threshold; });
        integer("diagnostics", "probe_points", [](RunConfig& c) -> int& { return c.diagnostics.probe_points; });

        // [didactic]
        enumeration("didactic", "kind", [](RunConfig& c) -> ConeKind& { return c.didactic.task.kind; },
                    std::vector<EnumName<ConeKind>>{{ConeKind::Cone, "cone"}, {ConeKind::TwoCone, "two_cone"}});
        real("didactic", "c_reward", [](RunConfig& c) -> double& { return c.didactic.task.c_reward; });
        real("didactic", "radius", [](RunConfig& c) -> double& { return c.didactic.task.radius; });
        real("didactic", "two_cone_radius", [](RunConfig& c) -> double& { return c.didactic.task.two_cone_radius; });
        real("didactic", "two_cone_offset", [](RunConfig& c) -> double& { return c.didactic.task.two_cone_offset; });
        integer("didactic", "samples", [](RunConfig& c) -> int& { return c.didactic.task.samples; });
        real("didactic", "grid_extent", [](RunConfig& c) -> double& { return c.didactic.task.grid_extent; });
        ints("didactic", "hidden_dims", [](RunConfig& c) -> std::vector<int>& { return c.didactic.task.hidden_dims; });
        boolean("didactic", "use_ln", [](RunConfig& c) -> bool& { return c.didactic.task.use_ln; });
        enumeration("didactic", "activation", [](RunConfig& c) -> Activation& { return c.didactic.task.activation; },
                    activations);
        integer("didactic", "batch_size", [](RunConfig& c) -> int& { return c.didactic.task.batch_size; });
        real("didactic", "lr", [](RunConfig& c) -> double& { return c.didactic.task.lr; });
        boolean("didactic", "use_pa", [](RunConfig& c) -> bool& { return c.didactic.task.use_pa; });
        real("didactic", "pa_weight", [](RunConfig& c) -> double& { return c.didactic.task.pa_weight; });
        real("didactic", "pa_multiplier", [](RunConfig& c) -> double& { return c.didactic.task.pa_multiplier; });
        real("didactic", "pa_target", [](RunConfig& c) -> double& { return c.didactic.task.pa_target; });
        integer("didactic", "steps", [](RunConfig& c) -> int& { return c.didactic.steps; });
        integer("didactic", "grid_resolution", [](RunConfig& c) -> int& { return c.didactic.grid_resolution; });

        // [tabular]
        integer("tabular", "instances", [](RunConfig& c) -> int& { return c.tabular.instances; });
        integer("tabular", "n_states", [](RunConfig& c) -> int& { return c.tabular.n_states; });
        integer("tabular", "n_actions", [](RunConfig& c) -> int& { return c.tabular.n_actions; });
        real("tabular", "density", [](RunConfig& c) -> double& { return c.tabular.density; });
        real("tabular", "gamma", [](RunConfig& c) -> double& { return c.tabular.gamma; });
        integer("tabular", "k", [](RunConfig& c) -> int& { return c.tabular.k; });
        integer("tabular", "trials", [](RunConfig& c) -> int& { return c.tabular.trials; });
        real("tabular", "tol", [](RunConfig& c) -> double& { return c.tabular.tol; });
        integer("tabular", "max_iterations", [](RunConfig& c) -> int& { return c.tabular.max_iterations; });

        // [ablate]
        add("ablate", "c_values",
            [](RunConfig& c, std::string_view v, std::size_t l) { c.ablate.c_values = reals_of("ablate.c_values", v, l); },
            [](const RunConfig& c) { return fmt_list(c.ablate.c_values); });
        real("ablate", "alpha", [](RunConfig& c) -> double& { return c.ablate.alpha; });
        return f;
    }();
    return table;
}

inline const Field* find_field(std::string_view section, std::string_view key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

}  // namespace config_detail

/// Throws ConfigError("<section>.<key>", 0, why) on the first violated constraint.
inline void validate_config(const RunConfig& c) {
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key, 0, why); };
    if (c.out.empty()) fail("run.out", "must be non-empty");
    try {
        c.env.validate();
    } catch (const InvalidArgument& e) {
        fail("env.env_id", e.what());
    }
    if (!(c.env.goal_radius >= 0.0)) fail("env.goal_radius", "must be non-negative");
    if (!(c.env.start_noise >= 0.0)) fail("env.start_noise", "must be non-negative");
    for (const auto& w : c.env.waypoints)
        if (w.size() != c.env.state_dim) fail("env.waypoints", "dimension must match the state");

    const BehaviorSpec& b = c.behavior;
    for (const auto& ctr : b.centers)
        if (ctr.size() != c.env.action_dim) fail("behavior.centers", "dimension must match the action");
    if (b.noise < 0.0) fail("behavior.noise", "must be non-negative");
    if (b.episodes < 0) fail("behavior.episodes", "must be >= 0");
    if (b.episode_length < 0) fail("behavior.episode_length", "must be >= 0");
    if (b.expert_prob < 0.0 || b.expert_prob > 1.0) fail("behavior.expert_prob", "must lie in [0, 1]");
    if (b.random_prob < 0.0 || b.random_prob > 1.0) fail("behavior.random_prob", "must lie in [0, 1]");
    if (b.goal_fraction < 0.0 || b.goal_fraction > 1.0) fail("behavior.goal_fraction", "must lie in [0, 1]");
    if (b.clearance < 0.0) fail("behavior.clearance", "must be non-negative");

    try {
        c.pars.validate();
    } catch (const ConfigError& e) {
        fail("pars." + e.key(), e.reason());
    }

    if (c.online.steps < 0) fail("online.steps", "must be >= 0");
    if (c.online.alpha < 0.0) fail("online.alpha", "must be non-negative");

    const DiagnosticsSettings& d = c.diagnostics;
    if (d.sarsa_steps < 0) fail("diagnostics.sarsa_steps", "must be >= 0");
    if (!(d.sarsa_lr > 0.0)) fail("diagnostics.sarsa_lr", "must be positive");
    if (d.maxq_steps < 0) fail("diagnostics.maxq_steps", "must be >= 0");
    if (!(d.maxq_lr > 0.0)) fail("diagnostics.maxq_lr", "must be positive");
    if (d.ntk_resolution < 2) fail("diagnostics.ntk_resolution", "must be >= 2");
    if (!(d.ntk_extent > 0.0)) fail("diagnostics.ntk_extent", "must be positive");
    if (d.eps_id < 0.0) fail("diagnostics.eps_id", "must be non-negative");
    if (d.dormant_threshold < 0.0) fail("diagnostics.dormant_threshold", "must be non-negative");
    if (d.probe_points < 1) fail("diagnostics.probe_points", "must be >= 1");

    try {
        c.didactic.task.validate();
    } catch (const InvalidArgument& e) {
        fail("didactic", e.what());
    }
    if (c.didactic.task.hidden_dims.empty()) fail("didactic.hidden_dims", "must be non-empty");
    if (c.didactic.steps < 0) fail("didactic.steps", "must be >= 0");
    if (c.didactic.grid_resolution < 2) fail("didactic.grid_resolution", "must be >= 2");

    const TabularSettings& t = c.tabular;
    if (t.instances < 1) fail("tabular.instances", "must be >= 1");
    if (t.n_states < 1) fail("tabular.n_states", "must be >= 1");
    if (t.n_actions < 1) fail("tabular.n_actions", "must be >= 1");
    if (!(t.density > 0.0 && t.density <= 1.0)) fail("tabular.density", "must lie in (0, 1]");
    if (!(t.gamma >= 0.0 && t.gamma < 1.0)) fail("tabular.gamma", "must lie in [0, 1)");
    if (t.k < 1) fail("tabular.k", "must be >= 1");
    if (t.trials < 1) fail("tabular.trials", "must be >= 1");
    if (!(t.tol > 0.0)) fail("tabular.tol", "must be positive");
    if (t.max_iterations < 1) fail("tabular.max_iterations", "must be >= 1");

    if (c.ablate.c_values.empty()) fail("ablate.c_values", "must be non-empty");
    for (double v : c.ablate.c_values)
        if (!(v > 0.0)) fail("ablate.c_values", "entries must be positive");
    if (!(c.ablate.alpha > 0.0)) fail("ablate.alpha", "must be positive");
}

inline RunConfig parse_config(std::istream& in) {
    struct Entry {
        const config_detail::Field* field;
        std::string value;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::map<std::string, std::size_t> seen;
    std::string section;
    LineReader reader(in);
    std::string raw;
    while (reader.next(raw)) {
        const std::size_t ln = reader.line_no();
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(std::string(line), ln, "malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            bool known = false;
            for (const auto& f : config_detail::fields()) known = known || f.section == section;
            if (!known) throw ConfigError(section, ln, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(std::string(line), ln, "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        if (section.empty()) throw ConfigError(key, ln, "key outside any [section]");
        const auto* f = config_detail::find_field(section, key);
        const std::string full = section + "." + key;
        if (!f) throw ConfigError(full, ln, "unknown key");
        if (auto it = seen.find(full); it != seen.end())
            throw ConfigError(full, ln, "duplicate key (first set on line " + std::to_string(it->second) + ")");
        seen[full] = ln;
        entries.push_back({f, std::string(trim(line.substr(eq + 1))), ln});
    }

    RunConfig cfg;
    for (const auto& e : entries)
        if (e.field->section == "env" && e.field->key == "env_id") e.field->parse(cfg, e.value, e.line);
    for (const auto& e : entries)
        if (!(e.field->section == "env" && e.field->key == "env_id")) e.field->parse(cfg, e.value, e.line);
    try {
        validate_config(cfg);
    } catch (const ConfigError& e) {
        auto it = seen.find(e.key());
        if (it == seen.end()) throw;
        throw ConfigError(e.key(), it->second, e.reason());
    }
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_config(in);
}

/// Every key with its resolved value, sections in a fixed order.
inline void serialize_config(std::ostream& os, const RunConfig& c) {
    std::string section;
    for (const auto& f : config_detail::fields()) {
        if (f.section != section) {
            if (!section.empty()) os << '\n';
            section = f.section;
            os << '[' << section << "]\n";
        }
        os << f.key << " = " << f.format(c) << '\n';
    }
}

inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    serialize_config(os, c);
    return os.str();
}

}  // namespace pars
