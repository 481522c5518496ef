#include "nsb/estimator.hpp"
#include "nsb/simulation.hpp"

#include <gtest/gtest.h>

using namespace nsb;

TEST(Estimator, SettlingBoundOnBundledRing) {
    // Dense-solver eigenvalues and the printed bound evaluated independently.
    const auto b = estimator_settling_bound(CommGraph::ring(6, {0}), EstimatorConfig{});
    EXPECT_NEAR(b.T_e, 9286.1410980345754, 1e-6);
    EXPECT_NEAR(b.K1t, 0.0026581228879486289, 1e-15);
    EXPECT_NEAR(b.K2t, 0.00090512681709506492, 1e-15);
    EXPECT_DOUBLE_EQ(b.r1t, 1.1);
    EXPECT_DOUBLE_EQ(b.r2t, 0.8);
}

TEST(Estimator, SettlingBoundSingleAgentStar) {
    const auto b = estimator_settling_bound(CommGraph::ring(1, {0}), EstimatorConfig{});
    EXPECT_NEAR(b.T_e, 18.362698078835365, 1e-10);
}

TEST(Estimator, RejectsExponentRatios) {
    EstimatorConfig c;
    c.r3 = 4;
    c.r4 = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.r5 = 6;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.K1 = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Estimator, ConsensusAtLeaderIsStationary) {
    const auto g = CommGraph::ring(4, {0});
    const Vec3 xo(1, 2, 3);
    const std::vector<Vec3> est(4, xo);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_EQ(estimator_derivative(LocalView(g, i, est, &xo), EstimatorConfig{}), Vec3::Zero());
}

TEST(Estimator, DerivativeMatchesHandComputation) {
    const auto g = CommGraph::ring(3, {0});
    const Vec3 xo = Vec3::Zero();
    const std::vector<Vec3> est{Vec3(1, 0, 0), Vec3(0, 0, 0), Vec3(0, 0, 0)};
    EstimatorConfig c;
    // Agent 1: (1-0) + (1-0) + (1-0) = 3 on x.
    const Vec3 d = estimator_derivative(LocalView(g, 0, est, &xo), c);
    const double e = 3.0;
    EXPECT_NEAR(d.x(), -c.K1 * std::pow(e, 1.2) - c.K2 * std::pow(e, 0.6) - c.K3, 1e-14);
    EXPECT_EQ(d.y(), 0.0);
}

TEST(Estimator, LocalityIsEnforced) {
    const auto g = CommGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}}, {0});
    const Vec3 xo = Vec3::Zero();
    const std::vector<Vec3> est(4, Vec3::Ones());
    const LocalView v(g, 3, est, &xo);
    EXPECT_THROW(v.estimate(0), LocalityError);
    EXPECT_THROW(v.leader(), LocalityError);
    EXPECT_NO_THROW(v.estimate(2));
}

TEST(Estimator, DerivativeReadsOnlyNeighbours) {
    const auto g = CommGraph::ring(6, {0});
    const Vec3 xo = Vec3::Zero();
    std::vector<Vec3> est;
    for (int i = 0; i < 6; ++i) est.emplace_back(i, -i, 0.5 * i);
    for (std::size_t i = 0; i < 6; ++i) {
        AccessLog log;
        estimator_derivative(LocalView(g, i, est, &xo, &log), EstimatorConfig{});
        for (auto j : log.estimates) EXPECT_TRUE(j == i || g.a(i, j) > 0.0);
        EXPECT_EQ(log.leader_reads > 0, g.b(i) > 0.0);
    }
}

TEST(Estimator, LyapunovIsPositiveDefinite) {
    const auto h = build_h_matrix(CommGraph::ring(6, {0})).h;
    const Vec3 xo(0, 0, 5);
    std::vector<Vec3> est(6, xo);
    EXPECT_EQ(estimator_lyapunov(h, est, xo), 0.0);
    est[3] += Vec3(0.1, 0, 0);
    EXPECT_GT(estimator_lyapunov(h, est, xo), 0.0);
}

TEST(Estimator, BankConvergesOnStaticLeader) {
    Trajectory leader;
    leader.base = Vec3(1, -1, 2);
    EstimatorBank bank(CommGraph::ring(1, {0}), EstimatorConfig{}, leader, {Vec3(2, -1, 2)});
    for (int k = 0; k < 20000; ++k) bank.advance(k * 1e-3, 1e-3, 4);
    EXPECT_LT(bank.max_error(20.0), 1e-3);
}

TEST(Estimator, BankMeanRateMatchesDisplacement) {
    Trajectory leader;
    leader.rate = Vec3(0, 0, 1);
    EstimatorBank bank(CommGraph::ring(3, {0}), EstimatorConfig{}, leader, {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)});
    const auto before = bank.estimates();
    const auto rate = bank.advance(0.0, 0.01, 5);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR((before[i] + 0.01 * rate[i] - bank.estimates()[i]).norm(), 0.0, 1e-15);
}
