#include <gtest/gtest.h>

#include <sstream>

#include "pars/data_store.hpp"

using namespace pars;

namespace {

Transition make_transition(double s0, double a0, double r, bool done = false) {
    Transition t;
    t.s = Vector::Constant(2, s0);
    t.a = Vector::Constant(1, a0);
    t.r = r;
    t.s_next = Vector::Constant(2, s0 + 0.1);
    t.done = done;
    return t;
}

TransitionDataset small_dataset() {
    TransitionDataset ds;
    ds.env_id = "line_walk_1d";
    ds.state_dim = 2;
    ds.action_dim = 1;
    ds.feasible_low = Vector::Constant(1, -1.0);
    ds.feasible_high = Vector::Constant(1, 1.0);
    ds.transitions = {make_transition(0.1, 0.5, -0.25), make_transition(1.0 / 3.0, -1.0, 2.0, true),
                      make_transition(0.7, 0.0, 1e-17)};
    ds.transitions[2].truncated = true;
    return ds;
}

}  // namespace

TEST(DatasetIo, RoundTripIsExact) {
    Rng rng(3);
    TransitionDataset ds = small_dataset();
    for (int k = 0; k < 50; ++k) ds.transitions.push_back(make_transition(rng.normal(), rng.uniform(-1, 1), rng.normal() * 1e5));
    std::stringstream ss;
    write_dataset(ss, ds);
    EXPECT_EQ(read_dataset(ss), ds);
}

TEST(DatasetIo, FileRoundTrip) {
    const TransitionDataset ds = small_dataset();
    const std::string path = ::testing::TempDir() + "/ds.txt";
    save_dataset(ds, path);
    EXPECT_EQ(load_dataset(path), ds);
    EXPECT_THROW(load_dataset(path + ".missing"), IoError);
}

TEST(DatasetIo, HeaderOnlyFileLoadsEmpty) {
    std::stringstream ss("pars-dataset 1 point_maze_2d 2 2 -1 -1 1 1\n");
    const TransitionDataset ds = read_dataset(ss);
    EXPECT_EQ(ds.env_id, "point_maze_2d");
    EXPECT_EQ(ds.state_dim, 2);
    EXPECT_EQ(ds.action_dim, 2);
    EXPECT_TRUE(ds.transitions.empty());
}

TEST(DatasetIo, FieldCountMismatchCitesLine) {
    // line 3 carries a 2-D action for a 1-D action dataset
    std::stringstream ss(
        "pars-dataset 1 line_walk_1d 1 1 -1 1\n"
        "0.2 0.5 -0.3 0.225 0 0\n"
        "0.2 0.5 0.1 -0.3 0.225 0 0\n");
    try {
        (void)read_dataset(ss);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(DatasetIo, MalformedNumberIsParseError) {
    std::stringstream ss(
        "pars-dataset 1 line_walk_1d 1 1 -1 1\n"
        "0.2 0.5 x 0.225 0 0\n");
    try {
        (void)read_dataset(ss);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(DatasetIo, ActionOutsideBoxIsSchemaError) {
    std::stringstream ss(
        "pars-dataset 1 line_walk_1d 1 1 -1 1\n"
        "0.2 1.5 0 0.225 0 0\n");
    EXPECT_THROW(read_dataset(ss), SchemaError);
}

TEST(SampleBatch, SingletonRepeats) {
    TransitionDataset ds = small_dataset();
    ds.transitions.resize(1);
    Rng rng(0);
    const auto b = sample_batch(ds, 4, rng);
    ASSERT_EQ(b.size(), 4u);
    for (const auto& t : b) EXPECT_EQ(t, ds.transitions[0]);
}

TEST(SampleBatch, DeterministicUnderSeed) {
    const TransitionDataset ds = small_dataset();
    Rng a(42), b(42);
    EXPECT_EQ(sample_batch(ds, 32, a), sample_batch(ds, 32, b));
}

TEST(SampleBatch, UniformFrequencies) {
    TransitionDataset ds = small_dataset();
    ds.transitions.resize(2);
    Rng rng(7);
    const int draws = 100000;
    int first = 0;
    for (const auto& t : sample_batch(ds, draws, rng)) first += t == ds.transitions[0];
    // binomial(1e5, 0.5): sd = 0.0016, band is > 6 sd
    EXPECT_NEAR(static_cast<double>(first) / draws, 0.5, 0.01);
}

TEST(SampleBatch, EmptySourceThrows) {
    TransitionDataset ds = small_dataset();
    ds.transitions.clear();
    Rng rng(0);
    EXPECT_THROW(sample_batch(ds, 1, rng), InvalidArgument);
    ReplayBuffer buf(4);
    EXPECT_THROW(sample_batch(buf, 1, rng), InvalidArgument);
}

TEST(ReplayBuffer, FifoEviction) {
    ReplayBuffer buf(5);
    for (int k = 0; k < 8; ++k) buf.add(make_transition(k, 0.0, k));
    EXPECT_EQ(buf.size(), 5u);
    EXPECT_EQ(buf.insertion_count(), 8u);
    const auto items = buf.in_order();
    for (int k = 0; k < 5; ++k) EXPECT_EQ(items[static_cast<std::size_t>(k)].r, k + 3);
    for (const auto& t : items) EXPECT_GE(t.r, 3.0);
}

TEST(ReplayBuffer, NeverExceedsCapacity) {
    ReplayBuffer buf(3);
    for (int k = 0; k < 100; ++k) {
        buf.add(make_transition(k, 0.0, k));
        EXPECT_LE(buf.size(), 3u);
    }
}

TEST(MixedSample, CountsAreExact) {
    TransitionDataset off = small_dataset();
    for (auto& t : off.transitions) t.r = 1.0;
    ReplayBuffer on(10);
    on.add(make_transition(0.0, 0.0, -1.0));
    Rng rng(1);
    auto count_offline = [](const std::vector<Transition>& b) {
        std::size_t n = 0;
        for (const auto& t : b) n += t.r == 1.0;
        return n;
    };
    auto all = mixed_sample(off, on, 1.0, 256, rng);
    EXPECT_EQ(count_offline(all), 256u);
    auto half = mixed_sample(off, on, 0.5, 256, rng);
    EXPECT_EQ(count_offline(half), 128u);
    auto five = mixed_sample(off, on, 0.05, 256, rng);
    EXPECT_EQ(count_offline(five), 13u);
    EXPECT_EQ(five.size(), 256u);
}

TEST(MixedSample, RequiredEmptySourceThrows) {
    TransitionDataset off = small_dataset();
    ReplayBuffer on(10);
    Rng rng(1);
    EXPECT_THROW(mixed_sample(off, on, 0.5, 8, rng), InvalidArgument);
    EXPECT_NO_THROW(mixed_sample(off, on, 1.0, 8, rng));
    EXPECT_THROW(mixed_sample(off, on, 1.5, 8, rng), InvalidArgument);
}

TEST(DatasetStats, ZeroRewards) {
    TransitionDataset ds = small_dataset();
    for (auto& t : ds.transitions) t.r = 0.0;
    EXPECT_EQ(dataset_stats(ds).r_min, 0.0);
}

TEST(DatasetStats, CornerActionsHaveUnitNorm) {
    TransitionDataset ds;
    ds.state_dim = 1;
    ds.action_dim = 3;
    ds.feasible_low = Vector::Constant(3, -1.0);
    ds.feasible_high = Vector::Constant(3, 1.0);
    for (int k = 0; k < 4; ++k) {
        Transition t;
        t.s = t.s_next = Vector::Zero(1);
        t.a = Vector::Constant(3, k % 2 ? 1.0 : -1.0);
        ds.transitions.push_back(t);
    }
    EXPECT_NEAR(dataset_stats(ds).mean_action_norm, 1.0, 1e-15);
}

TEST(DatasetStats, HandComputed) {
    const DatasetStats st = dataset_stats(small_dataset());
    EXPECT_EQ(st.count, 3u);
    EXPECT_EQ(st.r_min, -0.25);
    EXPECT_EQ(st.r_max, 2.0);
    EXPECT_DOUBLE_EQ(st.max_possible_norm, 1.0);
    // |0.5| + |-1| + |0| over 3
    EXPECT_DOUBLE_EQ(st.mean_action_norm, 0.5);
    TransitionDataset empty = small_dataset();
    empty.transitions.clear();
    EXPECT_THROW(dataset_stats(empty), InvalidArgument);
}

TEST(DatasetStats, CsvHasHeaderAndOneMetricPerRow) {
    std::stringstream ss;
    write_stats_csv(ss, dataset_stats(small_dataset()));
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, "metric,value");
    int rows = 0;
    while (std::getline(ss, line)) ++rows;
    EXPECT_EQ(rows, 5);
}
