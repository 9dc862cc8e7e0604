#pragma once

// Subcommand pipelines behind the command-line tool. Each run writes its
// artifacts into one output directory plus a manifest.json holding the
// resolved config, so `replay` can recreate the run exactly.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pars/config.hpp"
#include "pars/data_store.hpp"
#include "pars/diagnostics.hpp"
#include "pars/didactic_lab.hpp"
#include "pars/dormant.hpp"
#include "pars/pars_trainer.hpp"
#include "pars/svg.hpp"
#include "pars/tabular_oracle.hpp"
#include "pars/toy_envs.hpp"

namespace pars {

inline constexpr const char* kToolVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"gen-data",  "train-offline", "finetune", "diagnose",
                                                "didactic",  "tabular-check", "ablate"};
    return names;
}

/// Writes artifacts relative to the run directory and remembers them.
class RunContext {
public:
    RunContext(RunConfig cfg, std::filesystem::path dir, bool quiet)
        : cfg_(std::move(cfg)), dir_(std::move(dir)), quiet_(quiet) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    const RunConfig& cfg() const { return cfg_; }
    const std::filesystem::path& dir() const { return dir_; }
    const std::vector<std::string>& artifacts() const { return artifacts_; }

    /// Truncates and fills `rel` (subdirectories are created).
    void write(const std::string& rel, const std::function<void(std::ostream&)>& fill) {
        const auto path = dir_ / rel;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write '" + path.string() + "'");
        fill(os);
        if (!os) throw IoError("write failed for '" + path.string() + "'");
        artifacts_.push_back(rel);
    }

    void log(const std::string& msg) const {
        if (!quiet_) std::cerr << msg << '\n';
    }

private:
    RunConfig cfg_;
    std::filesystem::path dir_;
    bool quiet_;
    std::vector<std::string> artifacts_;
};

namespace runner_detail {

inline std::uint64_t seed_for(const RunConfig& c, std::string_view purpose) { return derive_seed(c.seed, purpose); }

inline TransitionDataset make_dataset(RunContext& ctx) {
    const auto& c = ctx.cfg();
    return generate_offline_dataset(c.env, c.behavior, seed_for(c, "data"));
}

inline void write_log(RunContext& ctx, const std::string& rel, const TrainLog& log) {
    ctx.write(rel, [&](std::ostream& os) { write_train_log_csv(os, log); });
}

inline void write_agent_file(RunContext& ctx, const std::string& rel, const ParsAgent& ag) {
    ctx.write(rel, [&](std::ostream& os) { write_agent(os, ag); });
}

inline ParsAgent load_agent_file(const std::string& path, const ParsConfig& p) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    return read_agent(in, p.actor_lr, p.critic_lr);
}

inline double min_q(const CriticEnsemble& ens, const Matrix& x) {
    double q = std::numeric_limits<double>::infinity();
    for (const auto& c : ens.online) q = std::min(q, forward_batch(c, x)(0, 0));
    return q;
}

/// Critic value map: V(s) = min_j Q_j(s, pi(s)) over the state square for
/// 2-D states, Q(s, a) over (state, first action) for 1-D states.
inline Matrix value_map(const ParsAgent& ag, int state_dim, int action_dim, int res) {
    Matrix out(res, res);
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            const double u = (j + 0.5) / res, v = (i + 0.5) / res;
            Vector s(state_dim), a;
            if (state_dim == 2) {
                s << u, v;
                a = ag.actor.act(s);
            } else {
                s.setConstant(u);
                a = Vector::Zero(action_dim);
                a[0] = -1.0 + 2.0 * v;
            }
            Matrix x(state_dim + action_dim, 1);
            x << s, a;
            out(i, j) = min_q(ag.critics, x);
        }
    return out;
}

inline void write_value_svg(RunContext& ctx, const std::string& rel, const ParsAgent& ag, int sd, int ad,
                            const std::string& title) {
    const Matrix m = value_map(ag, sd, ad, 32);
    ctx.write(rel, [&](std::ostream& os) { write_heatmap_svg(os, m, title); });
}

inline std::string summary_header() {
    return "final_step,gradient_updates,critic_loss,td_loss,pa_loss,q_data,q_infeasible,eval_return,eval_goal_rate,"
           "dormant_ratio";
}

inline std::string summary_fields(const TrainLog& log) {
    if (log.rows.empty()) return ",,,,,,,,,";
    const TrainLogRow& r = log.rows.back();
    std::ostringstream os;
    os << r.step << ',' << r.gradient_updates << ',' << format_real(r.critic_loss) << ',' << format_real(r.td_loss)
       << ',' << format_real(r.pa_loss) << ',' << format_real(r.q_data) << ',' << format_real(r.q_infeasible) << ','
       << format_real(r.eval_return) << ',' << format_real(r.eval_goal_rate) << ',' << format_real(r.dormant_ratio);
    return os.str();
}

inline TrainResult offline(RunContext& ctx, const TransitionDataset& ds, const ParsConfig& p, std::uint64_t seed,
                           const std::string& prefix = "") {
    TrainOptions opts;
    opts.eval_env = &ctx.cfg().env;
    ctx.log("training offline: " + std::to_string(p.max_gradient_steps) + " gradient steps");
    TrainResult r = train_offline(p, ds, seed, opts);
    write_log(ctx, prefix + "train_log.csv", r.log);
    return r;
}

// --- subcommands ----------------------------------------------------------

inline void gen_data(RunContext& ctx) {
    const TransitionDataset ds = make_dataset(ctx);
    ctx.log("generated " + std::to_string(ds.transitions.size()) + " transitions");
    ctx.write("dataset.txt", [&](std::ostream& os) { write_dataset(os, ds); });
    ctx.write("dataset_stats.csv", [&](std::ostream& os) { write_stats_csv(os, dataset_stats(ds)); });
    // action histogram over the feasible box
    const int res = 32;
    Matrix h = Matrix::Zero(ds.action_dim == 2 ? res : 1, res);
    for (const auto& t : ds.transitions) {
        auto bin = [&](Eigen::Index d) {
            const double u = (t.a[d] - ds.feasible_low[d]) / (ds.feasible_high[d] - ds.feasible_low[d]);
            return std::clamp(static_cast<int>(u * res), 0, res - 1);
        };
        h(ds.action_dim == 2 ? bin(1) : 0, bin(0)) += 1.0;
    }
    ctx.write("actions.svg", [&](std::ostream& os) { write_heatmap_svg(os, h, "dataset action counts"); });
}

inline void train_offline_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const TransitionDataset ds = make_dataset(ctx);
    const TrainResult r = offline(ctx, ds, c.pars, seed_for(c, "train"));
    write_agent_file(ctx, "agent.txt", r.agent);
    ctx.write("summary.csv", [&](std::ostream& os) { os << summary_header() << '\n' << summary_fields(r.log) << '\n'; });
    write_value_svg(ctx, "value_map.svg", r.agent, ds.state_dim, ds.action_dim, "critic value map");
}

inline ParsAgent checkpoint_or_train(RunContext& ctx, const TransitionDataset& ds, const std::string& path) {
    const auto& c = ctx.cfg();
    if (!path.empty()) return load_agent_file(path, c.pars);
    TrainResult r = offline(ctx, ds, c.pars, seed_for(c, "train"));
    write_agent_file(ctx, "agent.txt", r.agent);
    return std::move(r.agent);
}

inline void finetune_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const TransitionDataset ds = make_dataset(ctx);
    const ParsAgent start = checkpoint_or_train(ctx, ds, c.online.checkpoint);
    ParsConfig p = c.pars;
    p.alpha = c.online.alpha;
    ctx.log("fine-tuning online: " + std::to_string(c.online.steps) + " environment steps");
    const TrainResult r = finetune_online(p, start, c.env, ds, c.online.steps, seed_for(c, "online"));
    write_log(ctx, "online_log.csv", r.log);
    write_agent_file(ctx, "agent_online.txt", r.agent);
    ctx.write("summary.csv", [&](std::ostream& os) { os << summary_header() << '\n' << summary_fields(r.log) << '\n'; });
    write_value_svg(ctx, "value_map.svg", r.agent, ds.state_dim, ds.action_dim, "critic value map after fine-tuning");
}

inline void diagnose_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const auto& d = c.diagnostics;
    const TransitionDataset ds = make_dataset(ctx);
    const ParsAgent ag = checkpoint_or_train(ctx, ds, d.checkpoint);
    const Batch all = to_batch(ds.transitions);
    const Matrix sa = stack_rows(all.s, all.a);

    const DormantReport dr = dormant_ratio(ag.critics.online[0], sa, d.dormant_threshold);
    ctx.write("dormant.csv", [&](std::ostream& os) {
        os << "layer,units,dormant\n";
        for (std::size_t l = 0; l < dr.units_per_layer.size(); ++l)
            os << l << ',' << dr.units_per_layer[l] << ',' << dr.dormant_per_layer[l] << '\n';
        os << "all," << std::accumulate(dr.units_per_layer.begin(), dr.units_per_layer.end(), std::size_t{0}) << ','
           << std::accumulate(dr.dormant_per_layer.begin(), dr.dormant_per_layer.end(), std::size_t{0}) << '\n';
    });

    // max-Q actions of the trained critic and of a plain SARSA critic
    MaxQOptions mq;
    mq.steps = d.maxq_steps;
    mq.lr = d.maxq_lr;
    MlpSpec plain = critic_spec(c.pars, ds.state_dim, ds.action_dim);
    plain.use_ln = false;
    SarsaOptions so;
    so.gamma = c.pars.gamma;
    so.lr = d.sarsa_lr;
    so.tau = c.pars.tau;
    so.batch_size = c.pars.batch_size;
    ctx.log("fitting SARSA critic: " + std::to_string(d.sarsa_steps) + " steps");
    const MlpParams sarsa = train_sarsa_q(ds, plain, d.sarsa_steps, seed_for(c, "sarsa"), so);
    const MaxQReport rp = max_q_probe(ag.critics.online[0], ds, seed_for(c, "maxq"), mq);
    const MaxQReport rs = max_q_probe(sarsa, ds, seed_for(c, "maxq"), mq);
    ctx.write("maxq.csv", [&](std::ostream& os) {
        os << "critic,mean_data_norm,mean_max_q_norm\n";
        os << "trained," << format_real(rp.mean_data_norm) << ',' << format_real(rp.mean_max_q_norm) << '\n';
        os << "sarsa," << format_real(rs.mean_data_norm) << ',' << format_real(rs.mean_max_q_norm) << '\n';
    });

    // region labels of random probe actions against the dataset's action set
    Rng rng(seed_for(c, "probe"));
    const auto ad = ds.action_dim;
    Matrix queries(ad, d.probe_points), probe_states(ds.state_dim, d.probe_points);
    for (int k = 0; k < d.probe_points; ++k) {
        for (Eigen::Index j = 0; j < ad; ++j)
            queries(j, k) = rng.uniform(2.0 * ds.feasible_low[j], 2.0 * ds.feasible_high[j]);
        probe_states.col(k) = all.s.col(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(all.s.cols()))));
    }
    const double eps = d.eps_id > 0.0 ? d.eps_id : default_eps_id(ds.feasible_low, ds.feasible_high);
    const auto labels = classify_ood(all.a, queries, eps);
    const RowVector q_probe = forward_batch(ag.critics.online[0], stack_rows(probe_states, queries)).row(0);
    ctx.write("ood.csv", [&](std::ostream& os) {
        os << "region,count,mean_q\n";
        for (RegionLabel l : {RegionLabel::ID, RegionLabel::OodIn, RegionLabel::OodOut}) {
            long n = 0;
            double sum = 0.0;
            for (std::size_t k = 0; k < labels.size(); ++k)
                if (labels[k] == l) {
                    ++n;
                    sum += q_probe[static_cast<Eigen::Index>(k)];
                }
            os << to_string(l) << ',' << n << ',' << format_real(n ? sum / static_cast<double>(n) : 0.0) << '\n';
        }
    });

    // tangent-kernel similarity to the data action of largest norm at the first state
    Eigen::Index far = 0;
    all.a.colwise().norm().maxCoeff(&far);
    const Vector s0 = all.s.col(0);
    Vector ref(ds.state_dim + ad);
    ref << s0, all.a.col(far);
    const int res = d.ntk_resolution;
    Matrix actions;
    if (ad == 2) {
        actions = square_grid(-d.ntk_extent, d.ntk_extent, res);
    } else {
        actions = Matrix::Zero(ad, res);
        actions.row(0) = Vector::LinSpaced(res, -d.ntk_extent, d.ntk_extent).transpose();
    }
    const Matrix grid = stack_rows(s0.replicate(1, actions.cols()), actions);
    const NtkMap ntk = ntk_similarity(ag.critics.online[0], ref, grid);
    ctx.write("ntk.csv", [&](std::ostream& os) { write_ntk_csv(os, ntk); });
    const Matrix img = ad == 2 ? Matrix(ntk.values.reshaped(res, res).transpose()) : Matrix(ntk.values.transpose());
    ctx.write("ntk.svg", [&](std::ostream& os) { write_heatmap_svg(os, img, "tangent-kernel similarity", 12, -1.0, 1.0); });

    ctx.write("summary.csv", [&](std::ostream& os) {
        os << "metric,value\n";
        os << "dormant_ratio," << format_real(dr.dormant_ratio) << '\n';
        os << "mean_data_norm," << format_real(rp.mean_data_norm) << '\n';
        os << "trained_max_q_norm," << format_real(rp.mean_max_q_norm) << '\n';
        os << "sarsa_max_q_norm," << format_real(rs.mean_max_q_norm) << '\n';
        os << "ntk_mean," << format_real(ntk.mean_defined()) << '\n';
    });
}

inline void didactic_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const RegressionTask& t = c.didactic.task;
    ctx.log("fitting regressor: " + std::to_string(c.didactic.steps) + " steps");
    const MlpParams p = fit_regressor(t, c.didactic.steps, seed_for(c, "didactic"));
    const int res = c.didactic.grid_resolution;
    ctx.write("region_stats.csv", [&](std::ostream& os) { write_region_stats_csv(os, region_stats(p, t, res)); });
    ctx.write("prediction_grid.csv", [&](std::ostream& os) { write_prediction_grid_csv(os, p, t, res); });
    const Matrix g = region_grid(t, res);
    const RowVector pred = forward_batch(p, g).row(0) / t.c_reward;
    ctx.write("prediction.svg", [&](std::ostream& os) {
        write_heatmap_svg(os, Matrix(pred.transpose().reshaped(res, res).transpose()), "prediction / c_reward");
    });
    // reference on the data boundary: rightmost point of the last disc
    const auto discs = t.discs();
    Vector ref = discs.back().first;
    ref[0] += discs.back().second;
    const NtkMap ntk = ntk_similarity(p, ref, g);
    ctx.write("ntk.csv", [&](std::ostream& os) { write_ntk_csv(os, ntk); });
    ctx.write("ntk.svg", [&](std::ostream& os) {
        write_heatmap_svg(os, Matrix(ntk.values.reshaped(res, res).transpose()), "tangent-kernel similarity", 12, -1.0,
                          1.0);
    });
}

inline void tabular_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const TabularSettings& t = c.tabular;
    std::vector<CertificationRow> rows;
    for (int i = 0; i < t.instances; ++i) {
        const std::uint64_t s = derive_seed(seed_for(c, "tabular"), static_cast<std::uint64_t>(i));
        const RandomMdp m = build_random_mdp(t.n_states, t.n_actions, t.density, s, t.gamma);
        CertificationRow r;
        r.seed = s;
        r.gamma = t.gamma;
        r.max_ratio = verify_contraction(m.mdp, m.labels, t.k, t.trials, s);
        const FixedPointResult fp = fixed_point_iterate(m.mdp, m.labels, t.k, t.tol, t.max_iterations);
        r.iterations = fp.iterations;
        r.final_residual = fp.residuals.back();
        rows.push_back(r);
    }
    ctx.write("certification.csv", [&](std::ostream& os) { write_certification_csv(os, rows); });
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, r.max_ratio);
    ctx.log("largest contraction ratio " + format_real(worst) + " (gamma " + format_real(t.gamma) + ")");
}

inline void ablate_cmd(RunContext& ctx) {
    const auto& c = ctx.cfg();
    const TransitionDataset ds = make_dataset(ctx);
    struct Variant {
        const char* name;
        bool ln;
        bool pa;
    };
    const Variant variants[] = {{"none", false, false}, {"ln", true, false}, {"pa", false, true}, {"ln_pa", true, true}};
    std::ostringstream summary;
    summary << "variant,c_reward,critic_ln,alpha," << summary_header() << '\n';
    for (const Variant& v : variants)
        for (double cr : c.ablate.c_values) {
            ParsConfig p = c.pars;
            p.critic_ln = v.ln;
            p.alpha = v.pa ? c.ablate.alpha : 0.0;
            p.c_reward = cr;
            const std::string cell = std::string(v.name) + "_c" + format_real(cr) + "/";
            const TrainResult r = offline(ctx, ds, p, seed_for(c, "train"), cell);
            summary << v.name << ',' << format_real(cr) << ',' << (v.ln ? 1 : 0) << ',' << format_real(p.alpha) << ','
                    << summary_fields(r.log) << '\n';
        }
    ctx.write("summary.csv", [&](std::ostream& os) { os << summary.str(); });
}

}  // namespace runner_detail

/// Runs one subcommand into ctx's directory, then writes manifest.json.
inline void run_subcommand(const std::string& name, RunContext& ctx) {
    using namespace runner_detail;
    static const std::map<std::string, void (*)(RunContext&)> table{
        {"gen-data", gen_data},     {"train-offline", train_offline_cmd}, {"finetune", finetune_cmd},
        {"diagnose", diagnose_cmd}, {"didactic", didactic_cmd},          {"tabular-check", tabular_cmd},
        {"ablate", ablate_cmd}};
    const auto it = table.find(name);
    if (it == table.end()) throw InvalidArgument("unknown subcommand '" + name + "'");
    validate_config(ctx.cfg());
    const auto t0 = std::chrono::steady_clock::now();
    it->second(ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::ordered_json m;
    m["tool"] = "pars_cli";
    m["version"] = kToolVersion;
    m["subcommand"] = name;
    m["seed"] = ctx.cfg().seed;
    m["config"] = serialize_config(ctx.cfg());
    m["artifacts"] = ctx.artifacts();
    m["duration_seconds"] = secs;
    std::ofstream os(ctx.dir() / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write manifest in '" + ctx.dir().string() + "'");
    os << m.dump(2) << '\n';
}

struct ManifestInfo {
    std::string subcommand;
    RunConfig config;
    std::vector<std::string> artifacts;
};

inline ManifestInfo read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
        ManifestInfo info;
        info.subcommand = j.at("subcommand").get<std::string>();
        info.config = parse_config_string(j.at("config").get<std::string>());
        info.artifacts = j.at("artifacts").get<std::vector<std::string>>();
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, "manifest '" + path + "': " + e.what());
    }
}

}  // namespace pars
