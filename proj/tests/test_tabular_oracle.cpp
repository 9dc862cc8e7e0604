#include <gtest/gtest.h>

#include <sstream>

#include "pars/tabular_oracle.hpp"
#include "support/policy_evaluation.hpp"

using namespace pars;
using oracle::direct_policy_evaluation;

namespace {

/// OOD-in iff some supported action lies at or left of a and another at or right of it.
PairLabel interval_oracle(const std::vector<bool>& support, int a) {
    if (support[static_cast<std::size_t>(a)]) return PairLabel::ID;
    bool left = false, right = false;
    for (int b = 0; b < static_cast<int>(support.size()); ++b)
        if (support[static_cast<std::size_t>(b)]) {
            left = left || b < a;
            right = right || b > a;
        }
    return left && right ? PairLabel::OodIn : PairLabel::OodOut;
}

}  // namespace

TEST(RandomMdp, FullSupportIsAllId) {
    const RandomMdp r = build_random_mdp(5, 4, 1.0, 1);
    EXPECT_EQ(r.labels.count(PairLabel::ID), 20);
    EXPECT_NO_THROW(r.mdp.validate());
}

TEST(RandomMdp, EndpointSupportMakesMiddleOodIn) {
    RandomMdp r = build_random_mdp(3, 6, 1.0, 2);
    for (auto& row : r.support) {
        std::fill(row.begin(), row.end(), false);
        row.front() = row.back() = true;
    }
    const TabularLabels l = labels_from_support(r.mdp, r.support);
    EXPECT_EQ(l.count(PairLabel::OodOut), 0);
    EXPECT_EQ(l.count(PairLabel::OodIn), 3 * 4);
}

TEST(RandomMdp, LabelsMatchIntervalOracle) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RandomMdp r = build_random_mdp(4, 7, 0.35, seed);
        for (int s = 0; s < 4; ++s) {
            const auto& sup = r.support[static_cast<std::size_t>(s)];
            ASSERT_TRUE(std::find(sup.begin(), sup.end(), true) != sup.end());
            for (int a = 0; a < 7; ++a) ASSERT_EQ(r.labels.at(s, a), interval_oracle(sup, a)) << seed;
        }
    }
}

TEST(RandomMdp, RejectsBadArguments) {
    EXPECT_THROW(build_random_mdp(1, 3, 0.5, 0), InvalidArgument);
    EXPECT_THROW(build_random_mdp(3, 3, 0.0, 0), InvalidArgument);
}

TEST(TPars, AllIdEqualsPolicyBackup) {
    const RandomMdp r = build_random_mdp(4, 3, 1.0, 3);
    Rng rng(1);
    const QTable q = QTable::NullaryExpr(4, 3, [&] { return rng.normal(); });
    const QTable t = apply_t_pars(q, r.mdp, r.labels);
    // scalar-loop backup
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a) {
            double ev = 0.0;
            for (int s2 = 0; s2 < 4; ++s2)
                for (int a2 = 0; a2 < 3; ++a2) ev += r.mdp.P[static_cast<std::size_t>(a)](s, s2) * r.mdp.pi(s2, a2) * q(s2, a2);
            EXPECT_NEAR(t(s, a), r.mdp.r(s, a) + r.mdp.gamma * ev, 1e-14);
        }
}

TEST(TPars, OodOutEntriesAreQMin) {
    const RandomMdp r = build_random_mdp(6, 8, 0.3, 4);
    ASSERT_GT(r.labels.count(PairLabel::OodOut), 0);
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const QTable q = QTable::NullaryExpr(6, 8, [&] { return 100.0 * rng.normal(); });
        const QTable t = apply_t_pars(q, r.mdp, r.labels);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 8; ++a)
                if (r.labels.at(s, a) == PairLabel::OodOut) {
                    EXPECT_EQ(t(s, a), r.mdp.q_min());
                }
    }
}

TEST(TPars, OodInWithOneNeighborMatchesDirectScan) {
    Rng rng(3);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RandomMdp r = build_random_mdp(5, 9, 0.3, seed);
        const QTable q = QTable::NullaryExpr(5, 9, [&] { return rng.normal(); });
        const QTable t = apply_t_pars(q, r.mdp, r.labels, 1);
        const QTable backup = policy_backup(r.mdp, q);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 9; ++a) {
                if (r.labels.at(s, a) != PairLabel::OodIn) continue;
                // scan in (state, action) order, strict improvement only: the first minimum wins
                double best = std::numeric_limits<double>::infinity();
                double value = 0.0;
                for (int s2 = 0; s2 < 5; ++s2)
                    for (int a2 = 0; a2 < 9; ++a2) {
                        if (r.labels.at(s2, a2) != PairLabel::ID) continue;
                        const double d = std::abs(s - s2) + std::abs(r.mdp.embedding(a) - r.mdp.embedding(a2));
                        if (d < best) {
                            best = d;
                            value = backup(s2, a2);
                        }
                    }
                EXPECT_EQ(t(s, a), value);
                ++checked;
            }
    }
    EXPECT_GT(checked, 20);
}

TEST(TPars, NeighborTiesGoToLowestIndex) {
    RandomMdp r = build_random_mdp(3, 5, 1.0, 1);
    for (auto& row : r.support) std::fill(row.begin(), row.end(), false);
    r.support[1][0] = r.support[1][4] = true;  // action 2 of state 1 is equidistant from both
    r.support[0][2] = r.support[2][2] = true;  // and from these, at distance 1
    const TabularLabels l = labels_from_support(r.mdp, r.support);
    const auto nb = nearest_id_pairs(r.mdp, l, 1, 2, 2);
    ASSERT_EQ(nb.size(), 2u);
    EXPECT_EQ(nb[0], std::make_pair(0, 2));
    EXPECT_EQ(nb[1], std::make_pair(1, 0));
}

TEST(Contraction, RatioNeverExceedsGamma) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (double gamma : {0.5, 0.9, 0.99}) {
            const RandomMdp r = build_random_mdp(5, 6, 0.4, seed, gamma);
            EXPECT_LE(verify_contraction(r.mdp, r.labels, 3, 50, seed), gamma + 1e-12);
        }
    }
}

TEST(Contraction, RequiresAtLeastOneTrial) {
    const RandomMdp r = build_random_mdp(2, 2, 1.0, 0);
    EXPECT_THROW(verify_contraction(r.mdp, r.labels, 1, 0, 0), InvalidArgument);
    EXPECT_GE(verify_contraction(r.mdp, r.labels, 1, 1, 0), 0.0);
}

TEST(FixedPoint, AllIdMatchesLinearSolve) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const RandomMdp r = build_random_mdp(6, 4, 1.0, seed, 0.9);
        const FixedPointResult fp = fixed_point_iterate(r.mdp, r.labels, 3, 1e-13);
        const Vector exact = direct_policy_evaluation(r.mdp);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 4; ++a) EXPECT_NEAR(fp.q(s, a), exact[s * 4 + a], 1e-10);
    }
}

TEST(FixedPoint, GammaZeroConvergesInOneIteration) {
    const RandomMdp r = build_random_mdp(4, 5, 0.5, 7, 0.0);
    const FixedPointResult fp = fixed_point_iterate(r.mdp, r.labels, 3, 1e-12);
    EXPECT_EQ(fp.iterations, 1);
    EXPECT_EQ(fp.q, apply_t_pars(QTable::Zero(4, 5), r.mdp, r.labels));
}

TEST(FixedPoint, ResidualsDecayGeometricallyWithinBound) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const RandomMdp r = build_random_mdp(5, 7, 0.4, seed, 0.8);
        const FixedPointResult fp = fixed_point_iterate(r.mdp, r.labels, 3, 1e-10);
        ASSERT_GE(fp.residuals.size(), 11u);
        for (std::size_t t = 2; t < fp.residuals.size(); ++t) {
            EXPECT_LE(fp.residuals[t], fp.residuals[t - 1]);
            if (fp.residuals[t - 1] > 1e-12) {
                EXPECT_LE(fp.residuals[t] / fp.residuals[t - 1], 0.8 + 1e-9);
            }
        }
        EXPECT_LE(fp.iterations, iteration_bound(0.8, fp.residuals[0], 1e-10));
        // fixed point: one more application changes nothing beyond tol
        EXPECT_LT(sup_norm(apply_t_pars(fp.q, r.mdp, r.labels) - fp.q), 1e-10);
    }
}

TEST(Certification, CsvLayout) {
    std::ostringstream os;
    write_certification_csv(os, {{3, 0.9, 0.85, 120, 1e-11}});
    EXPECT_EQ(os.str(), "instance_seed,gamma,max_ratio,iterations,final_residual\n3,0.9,0.85,120,1e-11\n");
}
