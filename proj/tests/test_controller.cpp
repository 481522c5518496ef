#include "nsb/controller.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nsb;

namespace {

GainSchedule constant(double k) { return {k, {{k, 0.01, 0.0, 1, 0}}}; }

}  // namespace

TEST(Surface, BranchesAgreeAtPatchBoundaryProperty) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        SlidingParams sp;
        sp.c1 = 0.1 + 3.0 * u(rng);
        sp.c2 = 0.05 + u(rng);
        sp.fttsm.r0 = 0.55 + 0.4 * u(rng);
        sp.fttsm.r1 = (1.05 + 0.9 * u(rng)) / sp.fttsm.r0;
        sp.fttsm.r2 = (0.1 + 0.85 * u(rng)) / sp.fttsm.r0;
        sp.fttsm.phi_s = 1e-3 + 0.2 * u(rng);
        sp.validate();
        const double xt2 = 4.0 * u(rng) - 2.0;
        for (double s : {1.0, -1.0}) {
            const Vec3 e = Vec3::Constant(s * sp.fttsm.phi_s);
            const auto ev = sliding_surface(e, Vec3::Constant(xt2), sp);
            EXPECT_LE((ev.sigma1 - ev.sigma2).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, ev.sigma1.norm()));
        }
    }
}

TEST(Surface, ZeroErrorGivesZeroSurface) {
    const auto ev = sliding_surface(Vec3::Zero(), Vec3::Zero(), SlidingParams{});
    EXPECT_EQ(ev.S, Vec3::Zero());
    EXPECT_EQ(ev.alpha, Vec3::Zero());
}

TEST(Surface, ScalesByVarrho) {
    const SlidingParams sp;
    const auto ev = sliding_surface(Vec3(0.5, -0.3, 2.0), Vec3(0.1, 0.2, -0.4), sp);
    for (int k = 0; k < 3; ++k) {
        ASSERT_FALSE(ev.poly[k]);
        EXPECT_NEAR(ev.S(k), sp.varrho * ev.sigma1(k), 1e-12);
    }
}

TEST(Surface, AlphaDotMatchesFiniteDifference) {
    const SlidingParams sp;
    const Vec3 e(0.3, -0.8, 1.4), ed(0.2, 0.5, -1.0);
    const double h = 1e-7;
    const auto ev = sliding_surface(e, ed, ed, sp);
    const Vec3 fd = (tracking_alpha(e + h * ed, ed, sp) - tracking_alpha(e - h * ed, ed, sp)) / (2 * h);
    EXPECT_NEAR((ev.alpha_dot - fd).norm(), 0.0, 1e-6);
}

TEST(GainScheduleTest, LogisticShape) {
    const auto g = GainSchedule::simple(0.1, 100.0, 0.01, 330.0);
    EXPECT_NEAR(g(330.0), 0.1 + 0.5 * 99.9, 1e-12);
    EXPECT_NEAR(g(0.0), 0.1 + 99.9 / (std::exp(3.3) + 1.0), 1e-12);
    EXPECT_LT(g(1e5), 100.0 + 1e-9);
    double prev = 0.0;
    for (double t = 0.0; t < 2000.0; t += 10.0) {
        EXPECT_GT(g(t), prev);
        prev = g(t);
    }
    EXPECT_EQ(g.upper(), 100.0);
}

TEST(GainScheduleTest, LoweringSegment) {
    GainSchedule g{1.0, {{1.5, 1.0, 10.0, 1, 1}}};
    EXPECT_NO_THROW(g.validate());
    EXPECT_NEAR(g(1000.0), 1.0 - 0.5, 1e-12);
}

TEST(GainScheduleTest, Rejections) {
    EXPECT_THROW((GainSchedule{0.0, {{1.0, 0.1, 0.0, 1, 0}}}.validate()), ConfigError);
    EXPECT_THROW((GainSchedule{1.0, {}}.validate()), ConfigError);
    EXPECT_THROW((GainSchedule{1.0, {{2.0, -0.1, 0.0, 1, 0}}}.validate()), ConfigError);
    EXPECT_THROW((GainSchedule{1.0, {{2.0, 0.1, 5.0, 1, 0}, {3.0, 0.1, 5.0, 1, 0}}}.validate()), ConfigError);
    EXPECT_THROW((GainSchedule{1.0, {{3.0, 0.1, 0.0, 1, 1}}}.validate()), ConfigError);
    EXPECT_THROW((GainSchedule{1.0, {{0.5, 0.1, 0.0, 1, 0}}}.validate()), ConfigError);
}

TEST(ControlStep, ReachingLawExample) {
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    auto st = AdaptiveState::make(3, 0.0, 1.0, 1.0);
    const auto out = control_step(Vec3(1, 0, 0), VecX::Zero(3), 0.0, st, law, 1e-3);
    EXPECT_NEAR((out.u - Vec3(-2, 0, 0)).norm(), 0.0, 1e-15);
    EXPECT_EQ(out.u_nn, Vec3::Zero());
    EXPECT_EQ(out.u_comp, Vec3::Zero());
}

TEST(ControlStep, SignCompensationWithoutLayer) {
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    auto st = AdaptiveState::make(2, 0.5, 1.0, 1.0);
    const auto out = control_step(Vec3(0.2, -3, 0), VecX::Zero(2), 0.0, st, law, 1e-3);
    EXPECT_EQ(out.u_comp, Vec3(-0.5, 0.5, 0.0));
}

TEST(ControlStep, BoundaryLayerIsSmooth) {
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    law.boundary_layer = 0.5;
    auto st = AdaptiveState::make(2, 1.0, 1.0, 0.0);
    const auto out = control_step(Vec3(0.25, 0, 0), VecX::Zero(2), 0.0, st, law, 1e-3);
    EXPECT_NEAR(out.u_comp.x(), -std::tanh(0.5), 1e-15);
    law.layer_per_delta = 2.0;
    EXPECT_DOUBLE_EQ(law.layer_width(1.0), 2.0);
}

TEST(ControlStep, AdaptiveGainIsNondecreasingProperty) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    auto st = AdaptiveState::make(4, 0.0, 2.0, 0.5);
    double prev = st.delta_hat;
    for (int k = 0; k < 1000; ++k) {
        const Vec3 S(n(rng), n(rng), n(rng));
        VecX phi(4);
        phi << n(rng), n(rng), n(rng), n(rng);
        control_step(S, phi, 1e-3 * k, st, law, 1e-3);
        EXPECT_GE(st.delta_hat, prev);
        EXPECT_NEAR(st.delta_hat - prev, 1e-3 * 0.5 * S.lpNorm<1>(), 1e-15);
        prev = st.delta_hat;
    }
}

TEST(ControlStep, WeightUpdateIsOuterProduct) {
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    auto st = AdaptiveState::make(2, 0.0, 3.0, 1.0);
    VecX phi(2);
    phi << 0.5, 2.0;
    control_step(Vec3(1, -1, 2), phi, 0.0, st, law, 0.1);
    MatX expect(2, 3);
    expect << 0.15, -0.15, 0.3, 0.6, -0.6, 1.2;
    EXPECT_NEAR((st.W - expect).norm(), 0.0, 1e-14);
}

TEST(ControlStep, RejectsNonFiniteSurface) {
    ControlLaw law;
    law.k1 = constant(1.0);
    law.k2 = constant(1.0);
    auto st = AdaptiveState::make(1, 0.0, 1.0, 1.0);
    EXPECT_THROW(control_step(Vec3(std::nan(""), 0, 0), VecX::Zero(1), 0.0, st, law, 1e-3), DomainError);
}

TEST(ControlLawTest, ValidatesExponents) {
    ControlLaw law;
    law.k1 = GainSchedule::simple(0.1, 100, 0.01, 330);
    law.k2 = law.k1;
    EXPECT_NO_THROW(law.validate(45.0));
    law.gamma1 = 1.0;
    EXPECT_THROW(law.validate(), ConfigError);
    law.gamma1 = 1.1;
    law.gamma2 = 1.0;
    EXPECT_THROW(law.validate(), ConfigError);
}

TEST(Rbf, FeaturesPeakAtCentres) {
    const auto net = RbfNetwork::uniform_diagonal(7, 15, 4.0, 1.0, 2.0);
    ASSERT_EQ(net.size(), 7u);
    EXPECT_EQ(net.centers[3], VecX::Zero(15));
    const auto phi = rbf_features(VecX::Zero(15), net);
    EXPECT_DOUBLE_EQ(phi(3), 1.0);
    EXPECT_NEAR(phi(4), std::exp(-15.0 / 4.0), 1e-15);
    EXPECT_EQ(phi(2), phi(4));
    EXPECT_THROW(rbf_features(VecX::Zero(3), net), PreconditionError);
}

TEST(Rbf, FeatureVectorLayout) {
    const auto z = feature_vector(Vec3(1, 2, 3), Vec3(4, 5, 6), Vec3(7, 8, 9), Vec3(10, 11, 12), Vec3(13, 14, 15));
    for (int k = 0; k < 15; ++k) EXPECT_EQ(z(k), k + 1.0);
}

TEST(Lemma7, FrozenBounds) {
    const SlidingParams sp;
    const auto small = lemma7_bounds(0.01, sp, 1.0, 0.1, 0.3, 0.3);
    EXPECT_NEAR(small.ds0, 0.031198933749100835, 1e-14);
    EXPECT_NEAR(small.ds1, 2.0697077215537741e-05, 1e-17);
    EXPECT_NEAR(small.ds2, 0.00051512700152720413, 1e-15);
    const auto big = lemma7_bounds(100.0, sp, 1.0, 0.1, 0.3, 0.3);
    EXPECT_NEAR(big.ds0, 1.0310989337491008, 1e-12);
    EXPECT_NEAR(big.ds1, 1.0, 1e-12);
    EXPECT_NEAR(big.ds2, 3.2356639306948591, 1e-12);
    EXPECT_DOUBLE_EQ(big.position(sp.fttsm.phi_s), 1.0);
    EXPECT_DOUBLE_EQ(big.velocity(), big.ds2);
}

TEST(Lemma7, ZeroLayerLimit) {
    const SlidingParams sp;
    const auto b = lemma7_bounds(0.0, sp, 1.0, 0.1, 0.3, 0.3);
    const auto& p = sp.fttsm;
    EXPECT_EQ(b.ds1, 0.0);
    EXPECT_EQ(b.ds2, 0.0);
    EXPECT_NEAR(b.ds0, sp.c1 * p.phi_s + sp.c2 * fttsm_power(p.phi_s, p), 1e-15);
    EXPECT_DOUBLE_EQ(b.position(p.phi_s), p.phi_s);
}

TEST(Lemma7, MonotoneInLayer) {
    const SlidingParams sp;
    Lemma7Bounds prev = lemma7_bounds(0.0, sp, 1.0, 0.1, 0.3, 0.3);
    for (double ds = 1e-3; ds < 1e3; ds *= 3.0) {
        const auto b = lemma7_bounds(ds, sp, 1.0, 0.1, 0.3, 0.3);
        EXPECT_GT(b.ds0, prev.ds0);
        EXPECT_GT(b.ds1, prev.ds1);
        EXPECT_GT(b.ds2, prev.ds2);
        prev = b;
    }
}

TEST(Lemma7, RejectsTildeAboveNominal) {
    const SlidingParams sp;
    EXPECT_THROW(lemma7_bounds(1.0, sp, 3.0, 0.1, 0.3, 0.3), PreconditionError);
    EXPECT_THROW(lemma7_bounds(1.0, sp, 1.0, 0.0, 0.3, 0.3), PreconditionError);
}
