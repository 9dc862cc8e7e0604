#include <gtest/gtest.h>

#include "pars/toy_envs.hpp"

using namespace pars;

namespace {

Vector v2(double x, double y) {
    Vector v(2);
    v << x, y;
    return v;
}

}  // namespace

TEST(PointMaze, ZeroActionKeepsPosition) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const Vector s = v2(0.3, 0.2);
    const StepResult r = env_step(e, s, v2(0, 0));
    EXPECT_EQ(r.s_next, s);
    EXPECT_EQ(r.r, 0.0);
    EXPECT_FALSE(r.done);
}

TEST(PointMaze, StepIntoGoalDiscTerminates) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    // just outside the disc, moving toward its center by one full step (0.05)
    const Vector dir = v2(0.6, 0.8);
    const Vector s = e.goal + dir * (e.goal_radius + 0.02);
    ASSERT_FALSE(in_goal(e, s));
    const StepResult r = env_step(e, s, -dir);
    EXPECT_NEAR((r.s_next - e.goal).norm(), e.goal_radius + 0.02 - 0.05, 1e-12);
    EXPECT_EQ(r.r, 1.0);
    EXPECT_TRUE(r.done);
}

TEST(PointMaze, WallBlocksMovement) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const Vector below_wall = v2(0.3, 0.38);
    const StepResult r = env_step(e, below_wall, v2(0, 1));
    EXPECT_EQ(r.s_next, below_wall);
    EXPECT_EQ(r.r, 0.0);
    const Vector at_border = v2(0.99, 0.1);
    EXPECT_EQ(env_step(e, at_border, v2(1, 0)).s_next, at_border);
}

TEST(PointMaze, OutOfBoxActionIsRejected) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    EXPECT_THROW(env_step(e, v2(0.3, 0.2), v2(1.01, 0)), InvalidArgument);
}

TEST(PointMaze, TruncatesAtHorizon) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    EXPECT_TRUE(env_step(e, v2(0.3, 0.2), v2(0, 0), e.max_episode_steps - 1).truncated);
    EXPECT_FALSE(env_step(e, v2(0.3, 0.2), v2(0, 0), e.max_episode_steps - 2).truncated);
}

TEST(PointMaze, TrajectoriesAreDeterministic) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    Rng actions(5);
    std::vector<Vector> seq;
    for (int k = 0; k < 100; ++k) seq.push_back(v2(actions.uniform(-1, 1), actions.uniform(-1, 1)));
    auto roll = [&] {
        std::vector<Vector> states;
        Vector s = env_reset(e, 17);
        for (const auto& a : seq) {
            s = env_step(e, s, a).s_next;
            states.push_back(s);
        }
        return states;
    };
    EXPECT_EQ(roll(), roll());
}

TEST(LineWalk, ShapedRewardAndClamp) {
    const EnvSpec e = EnvSpec::line_walk_1d();
    const StepResult r = env_step(e, Vector::Constant(1, 0.5), Vector::Constant(1, 1.0));
    EXPECT_DOUBLE_EQ(r.s_next[0], 0.55);
    EXPECT_DOUBLE_EQ(r.r, -std::abs(0.55 - 0.8));
    EXPECT_EQ(env_step(e, Vector::Constant(1, 0.99), Vector::Constant(1, 1.0)).s_next[0], 1.0);
}

TEST(GenerateDataset, RandomEpisodeHasHorizonTransitions) {
    const EnvSpec e = EnvSpec::line_walk_1d();
    BehaviorSpec b;
    b.kind = BehaviorKind::Random;
    b.episodes = 1;
    b.episode_length = 37;
    const TransitionDataset ds = generate_offline_dataset(e, b, 3);
    EXPECT_EQ(ds.transitions.size(), 37u);
    EXPECT_TRUE(ds.transitions.back().truncated);
}

TEST(GenerateDataset, ClusteredDataLeavesGapAroundZero) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    BehaviorSpec b = BehaviorSpec::two_clusters(2);
    b.noise = 0.05;
    b.episodes = 20;
    b.episode_length = 100;
    const TransitionDataset ds = generate_offline_dataset(e, b, 9);
    ASSERT_FALSE(ds.transitions.empty());
    for (const auto& t : ds.transitions) EXPECT_GE(std::abs(t.a[0]), 0.3);
}

TEST(GenerateDataset, SameSeedSameDataset) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const BehaviorSpec b = BehaviorSpec::defaults_for(e);
    EXPECT_EQ(generate_offline_dataset(e, b, 4), generate_offline_dataset(e, b, 4));
    EXPECT_FALSE(generate_offline_dataset(e, b, 4) == generate_offline_dataset(e, b, 5));
}

TEST(GenerateDataset, EpisodeContinuityAndRewardSupport) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const TransitionDataset ds = generate_offline_dataset(e, BehaviorSpec::defaults_for(e), 1);
    bool any_goal = false;
    for (std::size_t i = 0; i < ds.transitions.size(); ++i) {
        const auto& t = ds.transitions[i];
        EXPECT_TRUE(t.r == 0.0 || t.r == 1.0);
        any_goal = any_goal || t.done;
        for (Eigen::Index k = 0; k < 2; ++k) EXPECT_LE(std::abs(t.a[k]), 1.0);
        if (!t.done && !t.truncated) {
            ASSERT_LT(i + 1, ds.transitions.size());
            EXPECT_EQ(ds.transitions[i + 1].s, t.s_next);
        }
    }
    EXPECT_TRUE(any_goal);
    EXPECT_EQ(dataset_stats(ds).r_min, 0.0);
}

TEST(EvaluatePolicy, IdleActorNeverReachesGoal) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const EvalResult r = evaluate_policy(e, [](const Vector&) { return Vector::Zero(2).eval(); }, 3, 0);
    EXPECT_EQ(r.goal_rate, 0.0);
    EXPECT_EQ(r.mean_return, 0.0);
}

TEST(EvaluatePolicy, StraightLineExpertOnOpenMazeAlwaysSucceeds) {
    EnvSpec e = EnvSpec::point_maze_2d();
    e.walls.clear();
    const ActorFn expert = [&](const Vector& s) {
        const Vector d = e.goal - s;
        return Vector(d / std::max(d.norm(), 1e-12));
    };
    const EvalResult r = evaluate_policy(e, expert, 5, 11);
    EXPECT_EQ(r.goal_rate, 1.0);
    EXPECT_EQ(r.mean_return, 1.0);
}

TEST(EvaluatePolicy, ScriptedRouteSolvesUMaze) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    const ActorFn expert = [&](const Vector& s) {
        const Vector d = next_hop(e, s, e.goal) - s;
        return Vector(d / std::max(d.norm(), 1e-12));
    };
    EXPECT_EQ(evaluate_policy(e, expert, 4, 2).goal_rate, 1.0);
}

TEST(EvaluatePolicy, ZeroEpisodesIsAnError) {
    const EnvSpec e = EnvSpec::line_walk_1d();
    EXPECT_THROW(evaluate_policy(e, [](const Vector&) { return Vector::Zero(1).eval(); }, 0, 0), InvalidArgument);
}

TEST(NextHop, ClearanceAvoidsGrazingTheWallEnd) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    Vector s(2);
    s << 0.65, 0.1;
    // the direct line to the upper waypoint passes 0.036 from the wall's right face
    EXPECT_TRUE(next_hop(e, s, e.goal).isApprox(e.waypoints[1]));
    EXPECT_TRUE(next_hop(e, s, e.goal, 0.1).isApprox(e.waypoints[0]));
}

TEST(NextHop, ClearanceRouteMayLeaveAWallItStartsOn) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    Vector s(2);
    s << 0.692, 0.39;  // just under the wall end
    EXPECT_TRUE(next_hop(e, s, e.goal, 0.1).isApprox(e.waypoints[0]));
}

TEST(NextHop, ClearanceFallsBackWithoutAnyClearRoute) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    Vector s(2);
    s << 0.69, 0.41;  // inside the wall region: no clear route at all
    EXPECT_TRUE(next_hop(e, s, e.goal, 0.1).isApprox(next_hop(e, s, e.goal)));
}

TEST(GenerateDataset, GoalFractionOneAimsEveryEpisodeAtTheGoal) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    BehaviorSpec b = BehaviorSpec::defaults_for(e);
    b.goal_fraction = 1.0;
    b.expert_prob = 1.0;
    b.noise = 0.0;
    b.clearance = 0.1;
    b.episodes = 12;
    b.episode_length = 300;
    const TransitionDataset ds = generate_offline_dataset(e, b, 4);
    int dones = 0;
    for (const auto& t : ds.transitions) dones += t.done;
    EXPECT_EQ(dones, 12);
}

TEST(GenerateDataset, GoalFractionZeroRarelyReachesGoal) {
    const EnvSpec e = EnvSpec::point_maze_2d();
    BehaviorSpec b = BehaviorSpec::defaults_for(e);
    b.episodes = 40;
    b.goal_fraction = 0.0;
    int low = 0, high = 0;
    for (const auto& t : generate_offline_dataset(e, b, 5).transitions) low += t.done;
    b.goal_fraction = 1.0;
    for (const auto& t : generate_offline_dataset(e, b, 5).transitions) high += t.done;
    EXPECT_LT(low, high);
}
