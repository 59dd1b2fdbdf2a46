#include <gtest/gtest.h>

#include <complex>
#include <numbers>
#include <random>

#include "common.hpp"
#include "sfe/filter.hpp"
#include "sfe/plant.hpp"

using namespace sfe;
using sfe::test::sampled;

namespace {

LeadLagShaper rig_G() { return LeadLagShaper(1.7, {{2.84e-5, 1.37e-3}, {2.38e-5, 1.284e-2}}); }

std::vector<LeadLagStage> random_stages(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<LeadLagStage> st(1 + rng() % 4);
    for (auto& s : st) s = {lo * std::pow(hi / lo, U(rng)), lo * std::pow(hi / lo, U(rng))};
    return st;
}

}  // namespace

TEST(InvertShaper, IdentityStaysIdentity) {
    const auto g = invert_shaper(LeadLagShaper(), 1.0);
    EXPECT_EQ(g.a(), 1.0);
    const auto tf = shaper_to_tf(g);
    EXPECT_EQ(tf.num(), Polynomial{1.0});
    EXPECT_EQ(tf.den(), Polynomial{1.0});
}

TEST(InvertShaper, RigCouplingGivesRigG) {
    const auto g = invert_shaper(rig_coupling(), 1.7);
    EXPECT_EQ(g, rig_G());
    EXPECT_DOUBLE_EQ(shaper_to_tf(g).dc_gain(), 1.7);
}

TEST(InvertShaper, HandInversion) {
    const auto g = invert_shaper(LeadLagShaper(2.0, {{1.0, 3.0}}), 4.0);
    EXPECT_EQ(g, LeadLagShaper(2.0, {{3.0, 1.0}}));
    const auto tf = shaper_to_tf(g);
    EXPECT_EQ(tf.num(), (Polynomial{2.0, 6.0}));
    EXPECT_EQ(tf.den(), (Polynomial{1.0, 1.0}));
}

TEST(InvertShaper, RejectsImproperInverseNamingTheStage) {
    try {
        invert_shaper(LeadLagShaper(1.0, {{1.0, 1.0}, {0.0, 0.5}}), 1.0);
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("stage 1"), std::string::npos);
    }
    EXPECT_THROW(invert_shaper(LeadLagShaper(), 0.0), Error);
}

TEST(InversionDuality, UnitResponseAtFiftyFrequencies) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const LeadLagShaper s(0.1 + 5.0 * (rng() % 1000) / 1000.0, random_stages(rng, 1e-5, 1.0));
        const double m = 0.5 + (rng() % 100) / 10.0;
        const auto S = shaper_to_tf(s), G = shaper_to_tf(invert_shaper(s, m));
        for (double w : log_grid(1e-2, 1e6, 50)) ASSERT_NEAR(std::abs(freq_response(G, w) * freq_response(S, w) / m - 1.0), 0.0, 1e-12);
    }
}

TEST(Discretize, UnityIsPassThrough) {
    const auto f = discretize(LeadLagShaper(), 1e-3);
    const auto x = sampled(1e-3, 100, [](double t) { return std::sin(37.0 * t) + t; });
    EXPECT_EQ(apply_filter(f, x), x);
    const auto g = discretize(RationalTF({1.0}, {1.0}), 1e-3);
    EXPECT_EQ(apply_filter(g, x), x);
}

TEST(Discretize, FirstOrderStepResponse) {
    const double tau = 0.05, dt = tau / 100.0;
    const auto f = discretize(RationalTF({1.0}, {1.0, tau}), dt);
    const auto y = apply_filter(f, sampled(dt, 400, [](double) { return 1.0; }));
    for (int m = 1; m <= 3; ++m) {
        const double expect = 1.0 - std::exp(-static_cast<double>(m));
        EXPECT_NEAR(y[static_cast<std::size_t>(100 * m)], expect, 0.01 * expect);
    }
}

TEST(Discretize, RigGMagnitudeWithin2PercentTo50Hz) {
    const auto G = shaper_to_tf(rig_G());
    const auto g = discretize(rig_G(), 1e-3);
    for (int i = 0; i <= 500; ++i) {
        const double w = 2.0 * std::numbers::pi * 50.0 * i / 500.0;
        const double c = std::abs(freq_response(G, w));
        ASSERT_NEAR(std::abs(g.response(w)) / c, 1.0, 0.02) << "at " << w << " rad/s";
    }
}

TEST(Discretize, ShaperAndRationalPathsAgree) {
    const auto a = discretize(rig_G(), 1e-3);
    const auto b = discretize(shaper_to_tf(rig_G()), 1e-3);
    for (double w : log_grid(0.1, 3000.0, 40)) EXPECT_NEAR(std::abs(a.response(w) - b.response(w)), 0.0, 1e-9 * std::abs(a.response(w)));
}

TEST(Discretize, ComplexPolesViaRationalTF) {
    // natural frequency 50 rad/s, damping 0.2
    const RationalTF tf({1.0}, {1.0, 20.0 / 2500.0, 1.0 / 2500.0});
    const auto f = discretize(tf, 1e-3);
    EXPECT_NEAR(f.dc_gain(), 1.0, 1e-12);
    for (double w : {1.0, 10.0, 50.0, 100.0})
        EXPECT_NEAR(std::abs(f.response(w)) / std::abs(freq_response(tf, w)), 1.0, 0.02) << w;
}

TEST(Discretize, RejectsPoleAtOrAboveNyquistNamingTheFrequency) {
    try {
        discretize(rig_coupling(), 1e-3);
        FAIL() << "expected a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_NE(std::string(e.what()).find("rad/s"), std::string::npos);
    }
    EXPECT_NO_THROW(discretize(rig_coupling(), 1e-5));
}

TEST(Discretize, DcGainExactForRandomShapers) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        const LeadLagShaper s(0.05 + (rng() % 1000) / 100.0, random_stages(rng, 2e-3, 2.0));
        const double m = 0.1 + (rng() % 1000) / 50.0;
        const auto G = invert_shaper(s, m);
        const auto g = discretize(G, 1e-3);
        ASSERT_NEAR(g.dc_gain() / (m / s.a()), 1.0, 1e-9);
        ASSERT_NEAR(discretize(s, 1e-3).dc_gain() / s.a(), 1.0, 1e-9);
    }
}

TEST(ApplyFilter, ConstantThroughGSettlesToMOverA) {
    const LeadLagShaper coupling(2.5, {{0.02, 0.004}, {0.01, 0.003}});
    const double m = 3.0, c = 7.0;
    const auto g = discretize(invert_shaper(coupling, m), 1e-3);
    const auto y = apply_filter(g, sampled(1e-3, 2000, [&](double) { return c; }));
    EXPECT_NEAR(y[1999], m / 2.5 * c, 1e-9);
}

TEST(ApplyFilter, RejectsDtMismatch) {
    const auto f = discretize(rig_G(), 1e-3);
    EXPECT_THROW(apply_filter(f, sampled(2e-3, 10, [](double) { return 1.0; })), Error);
}

TEST(ApplyFilter, StartsFromZeroStateEveryCall) {
    const auto f = discretize(rig_G(), 1e-3);
    const auto x = sampled(1e-3, 500, [](double t) { return std::cos(20 * t); });
    EXPECT_EQ(apply_filter(f, x), apply_filter(f, x));
}

TEST(ApplyFilter, RoundTripRecoversBandLimitedInput) {
    const double m = 1.7, dt = 1e-3;
    const LeadLagShaper coupling(1.3, {{0.02, 0.005}, {0.004, 0.015}});
    const auto fwd = discretize(LeadLagShaper(coupling.a() / m, coupling.stages()), dt);
    const auto g = discretize(invert_shaper(coupling, m), dt);
    const auto x = sampled(dt, 5000, [](double t) {
        return std::sin(2 * std::numbers::pi * 4.9 * t) + 0.5 * std::sin(2 * std::numbers::pi * 1.3 * t + 1.0);
    });
    const auto y = apply_filter(g, apply_filter(fwd, x));
    double err = 0.0, ref = 0.0;
    for (std::size_t k = 1000; k < x.size(); ++k) {
        err += (y[k] - x[k]) * (y[k] - x[k]);
        ref += x[k] * x[k];
    }
    EXPECT_LT(std::sqrt(err / ref), 0.01);
}

TEST(ApplyFilter, BoundedNoiseGivesBoundedOutput) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const LeadLagShaper s(0.05 + (rng() % 1000) / 100.0, random_stages(rng, 1e-3, 1.0));
        const auto f = discretize(s, 1e-3);
        const auto y = apply_filter(f, sampled(1e-3, 5000, [&](double) { return U(rng); }));
        double bound = s.a();
        for (const auto& st : s.stages()) bound *= std::max(1.0, st.b / st.c) * 2.0;
        for (double v : y.values()) ASSERT_LE(std::abs(v), bound * 10.0);
    }
}

TEST(DiscreteFilter, SettleGivesSteadyStateOutput) {
    auto f = discretize(rig_G(), 1e-3);
    f.settle(3.0);
    for (int k = 0; k < 50; ++k) ASSERT_NEAR(f.step(3.0), 1.7 * 3.0, 1e-9);
}

TEST(DiscreteFilter, SectionsAreStable) {
    for (const auto& s : discretize(rig_G(), 1e-3).sections()) EXPECT_TRUE(s.stable());
    EXPECT_THROW(DiscreteFilter(1.0, {Section{1, 0, 0, -1.5, 0}}, 1e-3), Error);
}

TEST(FilterSpec, BuildsTheGFilter) {
    const FilterSpec spec{rig_coupling(), 1.7, 1e-3};
    EXPECT_EQ(spec.inverse(), rig_G());
    EXPECT_NEAR(spec.g_filter().dc_gain(), 1.7, 1e-12);
}
