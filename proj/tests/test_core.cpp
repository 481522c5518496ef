#include "nsb/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsb;

TEST(SignedPow, MatchesMagnitudeAndSign) {
    EXPECT_DOUBLE_EQ(signed_pow(-8.0, 1.0 / 3.0), -2.0);
    EXPECT_DOUBLE_EQ(signed_pow(4.0, 0.5), 2.0);
    EXPECT_EQ(signed_pow(0.0, 0.3), 0.0);
    EXPECT_EQ(signed_pow(-3.5, 1.0), -3.5);
}

TEST(SignedPow, RejectsBadArguments) {
    EXPECT_THROW(signed_pow(1.0, 0.0), DomainError);
    EXPECT_THROW(signed_pow(1.0, -1.0), DomainError);
    EXPECT_THROW(signed_pow(std::nan(""), 2.0), DomainError);
    EXPECT_THROW(signed_pow(HUGE_VAL, 2.0), DomainError);
}

TEST(SignedPow, OddSymmetryProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> x(-50.0, 50.0), p(0.05, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = x(rng), e = p(rng);
        EXPECT_EQ(signed_pow(-a, e), -signed_pow(a, e));
        EXPECT_GE(signed_pow(a, e) * a, 0.0);
    }
}

TEST(Sgn, ZeroMapsToZero) {
    EXPECT_EQ(sgn(0.0), 0.0);
    EXPECT_EQ(sgn(-1e-300), -1.0);
    EXPECT_EQ(sgn(Vec3(2, 0, -3)), Vec3(1, 0, -1));
}

TEST(Graph, RingHMatrixSpectrum) {
    // Six-node ring with the leader attached to node 1; eigenvalues from an independent dense solver.
    const auto s = build_h_matrix(CommGraph::ring(6, {0}));
    EXPECT_NEAR(s.lambda_min, 0.10878015128970654, 1e-12);
    EXPECT_NEAR(s.lambda_max, 4.278413609496444, 1e-12);
    EXPECT_NEAR((s.h - s.h.transpose()).norm(), 0.0, 0.0);
}

TEST(Graph, RejectsGraphWithoutLeaderAccess) {
    EXPECT_THROW(CommGraph::ring(4, {}), ConfigError);
}

TEST(Graph, RejectsDisconnectedComponentWithoutLeader) {
    const auto g = CommGraph::from_edges(4, {{0, 1}, {2, 3}}, {0});
    EXPECT_THROW(build_h_matrix(g), ConfigError);
}

TEST(Graph, RejectsAsymmetricAdjacency) {
    MatX a = MatX::Zero(2, 2);
    a(0, 1) = 1.0;
    VecX b = VecX::Ones(2);
    EXPECT_THROW(CommGraph(a, b), ConfigError);
}

TEST(Graph, NeighborsFollowEdges) {
    const auto g = CommGraph::ring(5, {2});
    EXPECT_EQ(g.neighbors(0), (std::vector<std::size_t>{1, 4}));
    EXPECT_EQ(g.b(2), 1.0);
    EXPECT_EQ(g.b(0), 0.0);
}

TEST(JacobiEigen, AgreesWithEigenLibraryOnRandomSymmetric) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        MatX m(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) m(i, j) = n(rng);
        m = (m + m.transpose()).eval();
        const auto ours = jacobi_eigen(m);
        Eigen::SelfAdjointEigenSolver<MatX> ref(m);
        for (int i = 0; i < 6; ++i) EXPECT_NEAR(ours.values(i), ref.eigenvalues()(i), 1e-10);
        EXPECT_NEAR((m * ours.vectors - ours.vectors * ours.values.asDiagonal()).norm(), 0.0, 1e-9);
    }
}

TEST(FixedTimeBound, TwoTermArithmetic) {
    SettlingParams p;
    p.eta1 = 2.0;
    p.eta2 = 4.0;
    p.k1 = 1.5;
    p.k2 = 0.5;
    EXPECT_DOUBLE_EQ(fixed_time_bound(p), 1.0 / (2.0 * 0.5) + 1.0 / (4.0 * 0.5));
}

TEST(FixedTimeBound, BracketedArithmetic) {
    SettlingParams p;
    p.form = SettlingParams::Form::Bracketed;
    p.eta1 = 1.0;
    p.eta2 = 1.0;
    p.k3 = 1.2;
    p.k4 = 0.6;
    p.k5 = 0.9;
    EXPECT_NEAR(fixed_time_bound(p), 1.0 / 0.08 + 1.0 / 0.46, 1e-12);
}

TEST(FixedTimeBound, RejectsExponentsOutsideHypotheses) {
    SettlingParams p;
    p.k1 = 1.0;
    EXPECT_THROW(fixed_time_bound(p), DomainError);
    p = {};
    p.k2 = 1.0;
    EXPECT_THROW(fixed_time_bound(p), DomainError);
    p = {};
    p.eta1 = 0.0;
    EXPECT_THROW(fixed_time_bound(p), DomainError);
}

TEST(FixedTimeBound, DecreasesWithGain) {
    SettlingParams a, b;
    b.eta1 = 2.0 * a.eta1;
    EXPECT_LT(fixed_time_bound(b), fixed_time_bound(a));
}

TEST(Rotation, OrthonormalAndUnitPreserving) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> th(-1.5707963267948966, 1.5707963267948966);
    for (int k = 0; k < 200; ++k) {
        const double x = th(rng), y = th(rng), z = th(rng);
        const Mat3 r = rot_z(z) * rot_y(y) * rot_x(x);
        EXPECT_NEAR((r.transpose() * r - Mat3::Identity()).norm(), 0.0, 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        const Vec3 v = Vec3(th(rng), th(rng), th(rng)).normalized();
        EXPECT_NEAR(rotate_unit(v, x, y, z).norm(), 1.0, 1e-12);
    }
}

TEST(Rotation, QuarterTurnAboutZ) {
    const Vec3 v = rotate_unit(Vec3(1, 0, 0), 0.0, 0.0, 1.5707963267948966);
    EXPECT_NEAR((v - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}
