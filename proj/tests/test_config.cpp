#include <gtest/gtest.h>

#include "pars/config.hpp"

using namespace pars;

namespace {

ConfigError config_error(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a ConfigError for:\n" << text;
    return ConfigError("", 0, "");
}

}  // namespace

TEST(ParseConfig, EmptyFileGivesDefaults) {
    const RunConfig c = parse_config_string("");
    EXPECT_EQ(serialize_config(c), serialize_config(RunConfig{}));
    EXPECT_EQ(c.pars.gamma, 0.99);
    EXPECT_EQ(c.env.env_id, "point_maze_2d");
}

TEST(ParseConfig, CommentsAndBlankLinesIgnored) {
    const RunConfig c = parse_config_string("# header\n\n[pars]\n; note\n  gamma = 0.95  \n");
    EXPECT_EQ(c.pars.gamma, 0.95);
}

TEST(ParseConfig, GammaOutOfRangeNamesKeyAndLine) {
    const ConfigError e = config_error("[run]\nseed = 3\n[pars]\ngamma = 1.5\n");
    EXPECT_EQ(e.key(), "pars.gamma");
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 6);
}

TEST(ParseConfig, UnknownKeyRejected) {
    const ConfigError e = config_error("[pars]\ngamma = 0.9\ngama = 0.9\n");
    EXPECT_EQ(e.key(), "pars.gama");
    EXPECT_EQ(e.line(), 3u);
}

TEST(ParseConfig, UnknownSectionAndStrayKeyRejected) {
    EXPECT_EQ(config_error("[nope]\n").line(), 1u);
    EXPECT_EQ(config_error("seed = 1\n").key(), "seed");
    EXPECT_EQ(config_error("[run]\nseed 1\n").line(), 2u);
}

TEST(ParseConfig, TypeMismatchNamesKey) {
    EXPECT_EQ(config_error("[pars]\nbatch_size = 2.5\n").key(), "pars.batch_size");
    EXPECT_EQ(config_error("[pars]\ncritic_ln = yes\n").key(), "pars.critic_ln");
    EXPECT_EQ(config_error("[pars]\nactivation = swish\n").key(), "pars.activation");
    EXPECT_EQ(config_error("[env]\nwalls = 0 0 1\n").key(), "env.walls");
    EXPECT_EQ(config_error("[run]\nseed = -1\n").key(), "run.seed");
}

TEST(ParseConfig, DuplicateKeyRejected) {
    const ConfigError e = config_error("[pars]\nalpha = 1\nalpha = 2\n");
    EXPECT_EQ(e.key(), "pars.alpha");
    EXPECT_EQ(e.line(), 3u);
}

TEST(ParseConfig, EnvIdAppliesBeforeOverridesRegardlessOfOrder) {
    const RunConfig a = parse_config_string("[env]\ngoal = 0.7\nenv_id = line_walk_1d\n");
    const RunConfig b = parse_config_string("[env]\nenv_id = line_walk_1d\ngoal = 0.7\n");
    EXPECT_EQ(serialize_config(a), serialize_config(b));
    EXPECT_EQ(a.env.goal[0], 0.7);
    EXPECT_EQ(a.behavior.centers.size(), 2u);
}

TEST(ParseConfig, ConstraintChecksSpanSections) {
    EXPECT_EQ(config_error("[env]\nenv_id = line_walk_1d\nstart = 0.1 0.2\n").key(), "env.env_id");
    EXPECT_EQ(config_error("[tabular]\ngamma = 1\n").key(), "tabular.gamma");
    EXPECT_EQ(config_error("[behavior]\ncenters = 1 0 0\n").key(), "behavior.centers");
    EXPECT_EQ(config_error("[pars]\nn_critics = 3\ntarget_subset_size = 4\n").key(), "pars.target_subset_size");
}

TEST(SerializeConfig, RoundTripIsIdentity) {
    const std::string text =
        "[run]\nseed = 17\nout = runs/x\n[env]\nenv_id = point_maze_2d\nwalls = 0 0.4 0.6 0.6; 0.8 0 0.9 0.1\n"
        "[behavior]\ngoal_fraction = 0.7\nclearance = 0.1\n[pars]\nc_reward = 1000\nhidden_dims = 64 64\n"
        "alpha = 0.01\nsubset_draw = per_sample\n[ablate]\nc_values = 1 1000\n[didactic]\nkind = two_cone\n";
    const RunConfig c = parse_config_string(text);
    const std::string once = serialize_config(c);
    const RunConfig again = parse_config_string(once);
    EXPECT_EQ(serialize_config(again), once);
    EXPECT_EQ(again.seed, 17u);
    EXPECT_EQ(again.env.walls.size(), 2u);
    EXPECT_EQ(again.pars.hidden_dims, (std::vector<int>{64, 64}));
    EXPECT_EQ(again.pars.subset_draw, SubsetDraw::PerSample);
    EXPECT_EQ(again.didactic.task.kind, ConeKind::TwoCone);
}

TEST(SerializeConfig, RealsSurviveExactly) {
    RunConfig c;
    c.pars.tau = 0.1 + 0.2;
    c.env.start[0] = 1.0 / 3.0;
    const RunConfig back = parse_config_string(serialize_config(c));
    EXPECT_EQ(back.pars.tau, c.pars.tau);
    EXPECT_EQ(back.env.start[0], c.env.start[0]);
}

TEST(SerializeConfig, EveryFieldAppearsOnce) {
    const std::string s = serialize_config(RunConfig{});
    for (const auto& f : config_detail::fields()) {
        const std::string needle = "\n" + f.key + " = ";
        EXPECT_NE(s.find(needle), std::string::npos) << f.name();
    }
}
