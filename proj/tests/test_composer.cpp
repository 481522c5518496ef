#include "nsb/composer.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsb;

TEST(Projector, AlgebraOnRandomJacobians) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> scale(-4.0, 2.0);
    for (int k = 0; k < 10000; ++k) {
        const Vec3 j = Vec3(n(rng), n(rng), n(rng)) * std::pow(10.0, scale(rng));
        const Mat3 N = nullspace_projector(j);
        const Vec3 jp = row_pinv(j).pinv;
        ASSERT_LE((N * N - N).cwiseAbs().maxCoeff(), 1e-10);
        ASSERT_LE((N * jp).cwiseAbs().maxCoeff() * j.norm(), 1e-10);
        ASSERT_LE((j.transpose() * N).cwiseAbs().maxCoeff() / j.norm(), 1e-10);
    }
}

TEST(Projector, AxisRow) {
    const Mat3 N = nullspace_projector(Vec3(1, 0, 0));
    EXPECT_NEAR((N - Vec3(0, 1, 1).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-15);
}

TEST(Projector, RemovesObstacleDirection) {
    const FttsmParams p;
    const Vec3 x(1.2, -0.4, 0.7), xo(0.5, 0.1, 0.2);
    const auto c = coab_evaluate(x, xo, Vec3::Zero(), 2.0, 1.0, p);
    ASSERT_TRUE(c.active);
    EXPECT_NEAR((nullspace_projector(c.jacobian) * (x - xo)).norm(), 0.0, 1e-10);
}

TEST(Projector, ZeroRowGivesIdentity) { EXPECT_EQ(nullspace_projector(Vec3::Zero()), Mat3::Identity()); }

namespace {

MergedVelocity merge_once(const Vec3& vio, const Vec3& vif, const Vec3& j, bool active, EscapeState& st,
                          EscapeConfig esc = {}) {
    EscapeRng rng(5);
    return merge(vio, vif, j, active, esc, st, rng, 0.0, Vec3(1, 0, 0), Vec3::Zero());
}

}  // namespace

TEST(Merge, OrthogonalTasksPassThrough) {
    EscapeState st;
    const auto m = merge_once(Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), true, st);
    EXPECT_NEAR((m.velocity - Vec3(1, 1, 0)).norm(), 0.0, 1e-15);
    EXPECT_FALSE(m.escape_active);
}

TEST(Merge, InactiveCoabReturnsTracking) {
    EscapeState st;
    const auto m = merge_once(Vec3(1, 0, 0), Vec3(0.3, 0.2, 0.1), Vec3(1, 0, 0), false, st);
    EXPECT_EQ(m.velocity, Vec3(0.3, 0.2, 0.1));
}

TEST(Merge, CancellingTasksTriggerEscape) {
    EscapeState st;
    EscapeConfig esc;
    const auto m = merge_once(Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0), true, st, esc);
    ASSERT_TRUE(m.escape_active);
    EXPECT_TRUE(m.escape_triggered);
    EXPECT_NEAR((m.velocity - Vec3(1, 0, 0)).norm(), esc.delta_d, 1e-15);
    EXPECT_EQ(st.triggers, 1);
    EXPECT_DOUBLE_EQ(st.until, esc.hold_s);
}

TEST(Merge, EscapeHeldThenReleased) {
    EscapeState st;
    EscapeConfig esc;
    EscapeRng rng(1);
    merge(Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0), true, esc, st, rng, 0.0, Vec3(1, 0, 0), Vec3::Zero());
    const Vec3 dir = st.direction;
    const auto held = merge(Vec3(0.5, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), true, esc, st, rng, 0.5, Vec3(1, 0, 0),
                            Vec3::Zero());
    EXPECT_TRUE(held.escape_active);
    EXPECT_EQ(st.direction, dir);
    const auto after = merge(Vec3(0.5, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), true, esc, st, rng, 1.5, Vec3(1, 0, 0),
                             Vec3::Zero());
    EXPECT_FALSE(after.escape_active);
}

TEST(Merge, PriorityNonInterferenceProperty) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    EscapeConfig esc;
    for (int k = 0; k < 2000; ++k) {
        EscapeState st;
        EscapeRng er(k);
        const Vec3 j(n(rng), n(rng), n(rng)), vio(n(rng), n(rng), n(rng)), vif(n(rng), n(rng), n(rng));
        const auto m = merge(vio, vif, j, true, esc, st, er, 0.0, j, Vec3::Zero());
        Vec3 esc_term = Vec3::Zero();
        if (m.escape_active) esc_term = esc.delta_d * st.direction;
        EXPECT_NEAR(j.dot(m.velocity - vio - esc_term), 0.0, 1e-10 * std::max(1.0, j.norm() * vif.norm()));
    }
}

TEST(Escape, FixedAnglesAreReproducible) {
    EscapeConfig esc;
    esc.policy = EscapeConfig::AnglePolicy::Fixed;
    EscapeState a, b;
    EscapeRng r1(1), r2(2);
    merge(Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0), true, esc, a, r1, 0.0, Vec3(1, 0, 0), Vec3::Zero());
    merge(Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(1, 0, 0), true, esc, b, r2, 0.0, Vec3(1, 0, 0), Vec3::Zero());
    EXPECT_EQ(a.direction, b.direction);
    EXPECT_NEAR((a.direction - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Escape, SeededStreamIsDeterministic) {
    EscapeRng a(42), b(42), c(43);
    for (int k = 0; k < 100; ++k) {
        const double x = a.uniform(-1, 1);
        EXPECT_EQ(x, b.uniform(-1, 1));
        EXPECT_GE(x, -1.0);
        EXPECT_LT(x, 1.0);
    }
    EXPECT_NE(EscapeRng(42).uniform(0, 1), c.uniform(0, 1));
}

TEST(Escape, ValidatesConfig) {
    EscapeConfig e;
    e.delta_d = 0.0;
    EXPECT_THROW(e.validate(), ConfigError);
    e = {};
    e.policy = EscapeConfig::AnglePolicy::Fixed;
    e.theta_z = 0.0;
    EXPECT_THROW(e.validate(), ConfigError);
    e.theta_x = 2.0;
    EXPECT_THROW(e.validate(), ConfigError);
}

TEST(LambdaStar, RootOfQuadratic) {
    const auto ls = lambda_star(0.5, 0.8, Vec3(1, 0, 0), Vec3(0.1, 0, 0), Vec3(0.05, 0, 0), 2.0, 0.2);
    ASSERT_FALSE(ls.floored);
    EXPECT_NEAR(ls.ups1 * ls.lambda * ls.lambda + ls.ups2 * ls.lambda + ls.ups3, 0.0, 1e-12);
    EXPECT_GE(ls.lambda, 0.0);
}

TEST(LambdaStar, AtRestIsZero) {
    const auto ls = lambda_star(1.0, 1.0, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 2.0, 0.2);
    EXPECT_EQ(ls.lambda, 0.0);
}

TEST(LambdaStar, FloorsDegenerateLeadingCoefficient) {
    const auto ls = lambda_star(1.0, 0.0, Vec3(1, 0, 0), Vec3::Zero(), Vec3::Zero(), 2.0, 0.2, 0.25);
    EXPECT_TRUE(ls.floored);
    EXPECT_EQ(ls.lambda, 0.25);
}

TEST(LambdaStar, GrowsWithSpeed) {
    double prev = -1.0;
    for (double v : {0.1, 0.5, 1.0, 4.0}) {
        const double l = lambda_star(0.5, 1.0, Vec3(v, 0, 0), Vec3::Zero(), Vec3::Zero(), 2.0, 0.2).lambda;
        EXPECT_GT(l, prev);
        prev = l;
    }
}

TEST(OfflineBounds, GammaWeightForms) {
    OfflineBoundInputs in;
    in.L0 = 50.0;
    EXPECT_NEAR(gamma_io_min_proof(in), 26166.3639066828, 1e-6);
    EXPECT_DOUBLE_EQ(gamma_io_min_statement(in), 3.0 * 1.0 * 50.0 / (2.0 * 0.01) + 0.1);
}

TEST(OfflineBounds, OrderedAndPositive) {
    OfflineBoundInputs in;
    in.L0 = 4.5;
    in.L_obs = 1.0;
    in.L_xhat = 2.0;
    in.delta_d = 0.05;
    const auto b = lambda_offline_bounds(in);
    EXPECT_GT(b.lambda1, 0.0);
    EXPECT_GT(b.lambda3, b.lambda1);  // the escape term only adds
    EXPECT_GT(b.lambda4, b.lambda2);
    EXPECT_EQ(b.max(), std::max({b.lambda1, b.lambda2, b.lambda3, b.lambda4}));
}

TEST(OfflineBounds, LipschitzRatio) {
    OfflineBoundInputs in;
    in.L0 = 4.5;
    EXPECT_NEAR(lambda_offline_bounds(in).L_iof, std::sqrt(13.0 / 8.98), 1e-15);
}

TEST(OfflineBounds, RejectsPhiAboveL0) {
    OfflineBoundInputs in;
    in.L0 = 0.001;
    EXPECT_THROW(lambda_offline_bounds(in), ConfigError);
}
