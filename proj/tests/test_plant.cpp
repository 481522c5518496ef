#include "nsb/plant.hpp"

#include <gtest/gtest.h>

using namespace nsb;

TEST(Rk4, ExactForConstantInput) {
    const AgentDynamics none;
    AgentState s{Vec3(1, 2, 3), Vec3(0.5, 0, -1)};
    const Vec3 u(0.2, -0.4, 1.0);
    double t = 0.0;
    for (int k = 0; k < 100; ++k, t += 0.01) s = rk4_step(s, u, t, 0.01, none);
    const Vec3 x = Vec3(1, 2, 3) + Vec3(0.5, 0, -1) * t + 0.5 * u * t * t;
    EXPECT_NEAR((s.x1 - x).norm(), 0.0, 1e-12);
    EXPECT_NEAR((s.x2 - (Vec3(0.5, 0, -1) + u * t)).norm(), 0.0, 1e-12);
}

TEST(Rk4, FourthOrderConvergence) {
    const auto dyn = catalog_dynamics(2);
    const auto run = [&](int n) {
        AgentState s{Vec3(1, -1, 2), Vec3(0.3, 0.1, 0)};
        const double h = 1.0 / n;
        for (int k = 0; k < n; ++k) s = rk4_step(s, Vec3(0.1, 0, 0), k * h, h, dyn);
        return s.x1;
    };
    const Vec3 ref = run(4096);
    const double e1 = (run(16) - ref).norm(), e2 = (run(32) - ref).norm();
    EXPECT_GT(e1 / e2, 12.0);
}

TEST(Dynamics, CatalogShapes) {
    const auto d0 = catalog_dynamics(0);
    const Vec3 x1(1, 2, 2), x2(0.5, 0, 0);
    EXPECT_NEAR((d0.f(x1, x2) - 0.1 * 3.0 * Vec3(std::sin(0.5), 0, 0)).norm(), 0.0, 1e-15);
    const Vec3 d = d0.d(x1, 2.0);
    const double m = 0.5 * 0.02 * 3.0;
    EXPECT_NEAR((d - Vec3(m * std::sin(1.0), m * std::sin(1.4), m * std::cos(1.0))).norm(), 0.0, 1e-15);
    const auto d3 = catalog_dynamics(3);
    EXPECT_NEAR((d3.f(x1, x2) - 0.1 * 0.5 * Vec3(std::tanh(1), std::tanh(2), std::tanh(2))).norm(), 0.0, 1e-15);
    EXPECT_THROW(catalog_dynamics(6), ConfigError);
}

TEST(Trajectory, ObstacleCatalog) {
    EXPECT_EQ(obstacle_position(0, 0.0), Vec3(0, 1, 23));
    EXPECT_NEAR((obstacle_position(2, 3.0) - Vec3(-1.5, -std::cos(3.0), 10)).norm(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(catalog_obstacle(1).speed_bound(), 1.0);
    EXPECT_THROW(catalog_obstacle(4), ConfigError);
}

TEST(Trajectory, VelocityIsDerivative) {
    const Trajectory tr{Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0.5, -1, 0), Vec3(0, 2, 0.3), 1.7};
    for (double t : {0.0, 0.4, 3.1}) {
        const double h = 1e-6;
        const Vec3 fd = (tr.position(t + h) - tr.position(t - h)) / (2 * h);
        EXPECT_NEAR((fd - tr.velocity(t)).norm(), 0.0, 1e-8);
        EXPECT_LE(tr.velocity(t).cwiseAbs().maxCoeff(), tr.speed_bound_inf() + 1e-12);
    }
}

TEST(NearestObject, PrefersObstacleOnTie) {
    const std::vector<Vec3> ap{Vec3::Zero(), Vec3(1, 0, 0)}, av(2, Vec3::Zero());
    const std::vector<Vec3> op{Vec3(0, 1, 0), Vec3(0, -1, 0)}, ov(2, Vec3::Zero());
    const auto n = nearest_object(0, ap, av, op, ov, 10.0);
    ASSERT_TRUE(n);
    EXPECT_EQ(n->kind, NearestObject::Kind::Obstacle);
    EXPECT_EQ(n->index, 0u);
}

TEST(NearestObject, PicksClosestAgentAndRespectsRange) {
    const std::vector<Vec3> ap{Vec3::Zero(), Vec3(3, 0, 0), Vec3(0, 0.5, 0)}, av(3, Vec3::Ones());
    const std::vector<Vec3> op{Vec3(0, 2, 0)}, ov{Vec3::Zero()};
    const auto n = nearest_object(0, ap, av, op, ov, 10.0);
    ASSERT_TRUE(n);
    EXPECT_EQ(n->kind, NearestObject::Kind::Agent);
    EXPECT_EQ(n->index, 2u);
    EXPECT_DOUBLE_EQ(n->distance, 0.5);
    EXPECT_FALSE(nearest_object(0, ap, av, op, ov, 0.1));
}

TEST(Clik, StepMatchesRate) {
    const Vec3 xd(1, 1, 1), vd(0, 0, 2), x(1.5, 1, 0.5);
    EXPECT_EQ(clik_rate(xd, vd, x, 0.0), vd);
    EXPECT_NEAR((clik_step(xd, vd, x, 2.0, 0.1) - (xd + 0.1 * (vd + 2.0 * (x - xd)))).norm(), 0.0, 1e-15);
    EXPECT_THROW(clik_step(xd, vd, x, 1.0, 0.0), PreconditionError);
}

TEST(ReferenceFilterTest, ConvergesWithExactDecay) {
    ReferenceFilter f{50.0, Vec3::Zero()};
    const Vec3 cmd(1, -2, 0.5);
    f.advance(cmd, 0.02);
    EXPECT_NEAR((f.v - (1.0 - std::exp(-1.0)) * cmd).norm(), 0.0, 1e-15);
    EXPECT_NEAR((f.rate(cmd) - 50.0 * (cmd - f.v)).norm(), 0.0, 1e-15);
    for (int k = 0; k < 100; ++k) f.advance(cmd, 0.02);
    EXPECT_NEAR((f.output(cmd) - cmd).norm(), 0.0, 1e-12);
}

TEST(ReferenceFilterTest, ZeroBandwidthPassesThrough) {
    ReferenceFilter f;
    EXPECT_EQ(f.output(Vec3(3, 2, 1)), Vec3(3, 2, 1));
    EXPECT_EQ(f.rate(Vec3(3, 2, 1)), Vec3::Zero());
    f.advance(Vec3(1, 1, 1), 1e-3);
    EXPECT_EQ(f.v, Vec3(1, 1, 1));
}

TEST(IntegrateStep, FlagsNonFiniteState) {
    const std::vector<AgentState> s{{Vec3::Zero(), Vec3::Zero()}};
    const std::vector<Vec3> u{Vec3(HUGE_VAL, 0, 0)};
    const std::vector<AgentDynamics> d(1);
    EXPECT_THROW(integrate_step(s, u, d, 0.0, 1e-3), NumericalFault);
    EXPECT_THROW(integrate_step(s, std::vector<Vec3>{Vec3::Zero()}, d, 0.0, 0.0), PreconditionError);
}
