#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "sfe/identification.hpp"
#include "sfe/nelder_mead.hpp"

using namespace sfe;
using sfe::test::sampled;

namespace {

// Shortened default run, shared by several tests.
const Dataset& default_data() {
    static const Dataset ds = [] {
        auto sc = sfe::test::default_scenario();
        sc.sampling.duration = 20.0;
        return sfe::test::simulate(sc);
    }();
    return ds;
}

EstimatorConfig default_config(double L = 20.0) { return sfe::test::default_scenario().estimator_config(L); }

Dataset from_sigma(const TimeSeries& sigma) {
    Dataset ds;
    ds.dt = sigma.dt();
    for (std::size_t k = 0; k < sigma.size(); ++k) ds.t.push_back(static_cast<double>(k) * sigma.dt());
    ds.u.assign(sigma.size(), 0.0);
    ds.sigma_meas = sigma.vector();
    return ds;
}

Dataset sine_motion(double amplitude, double noise, std::uint64_t seed = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise);
    return from_sigma(sampled(1e-3, 12000, [&](double t) { return amplitude * std::sin(std::numbers::pi * t) + n(rng); }));
}

// One slow lead stage, so a short record still constrains every parameter.
Scenario fit_scenario() {
    auto sc = sfe::test::default_scenario();
    sc.plant.coupling = LeadLagShaper(1.2, {{0.02, 0.005}});
    sc.plant.gamma = 100.0;
    sc.plant.noise_std = 0.0;
    sc.load.smoothing = 0.0;
    sc.sampling.duration = 20.0;
    return sc;
}

const Dataset& fit_data() {
    static const Dataset ds = sfe::test::simulate(fit_scenario());
    return ds;
}

ShaperFitOptions fit_options() {
    ShaperFitOptions o;
    o.L = 20.0;
    o.m = 1.7;
    return o;
}

}  // namespace

TEST(EstimateForce, NullLoadGivesSmallForce) {
    auto sc = sfe::test::default_scenario();
    sc.load.amplitude = 0.0;
    sc.load.offset = 0.0;
    sc.control.reference.sines.resize(1);
    sc.sampling.duration = 20.0;
    const auto ds = sfe::test::simulate(sc);
    const auto est = estimate_force(ds, sc.estimator_config(0.1));
    const auto first = static_cast<std::size_t>(est.diagnostics.skip_time / ds.dt);
    ASSERT_LT(first, ds.size());
    double acc = 0.0;
    for (std::size_t k = first; k < ds.size(); ++k) acc += std::abs(est.f2_hat[k]);
    EXPECT_LE(acc / static_cast<double>(ds.size() - first), 0.02 * sc.plant.gamma);
}

TEST(EstimateForce, DefaultScenarioWithin5PercentOfPeak) {
    const auto est = estimate_force(default_data(), default_config());
    const auto m = force_metrics(est.f2_hat, default_data().channel("f2_ref"), est.diagnostics.skip_time);
    EXPECT_LE(m.rmse, 0.05 * m.peak_reference);
    EXPECT_TRUE(est.diagnostics.convergence.converged);
    EXPECT_TRUE(est.diagnostics.warnings.empty());
}

TEST(EstimateForce, DcChainRecoversConstantForce) {
    auto sc = sfe::test::default_scenario();
    sc.plant.coupling = LeadLagShaper();
    sc.plant.gamma = 0.0;
    sc.load.kind = LoadKind::Step;
    sc.load.amplitude = 0.0;
    sc.load.offset = 2500.0;
    sc.load.smoothing = 0.0;
    sc.sampling.duration = 10.0;
    sc.estimator.fir_cutoff_hz = 20.0;
    const auto ds = sfe::test::simulate(sc);
    const auto est = estimate_force(ds, sc.estimator_config());
    double mean = 0.0;
    for (std::size_t k = 5000; k < ds.size(); ++k) mean += est.f2_hat[k];
    mean /= static_cast<double>(ds.size() - 5000);
    EXPECT_NEAR(mean, (*ds.f2_ref)[5000], 0.01 * 2500.0);
}

TEST(EstimateForce, ReportsAllIntermediates) {
    const auto est = estimate_force(default_data(), default_config());
    const auto& d = est.diagnostics;
    const auto n = default_data().size();
    EXPECT_EQ(est.f2_hat.size(), n);
    EXPECT_EQ(d.e.size(), n);
    EXPECT_EQ(d.x2_hat.size(), n);
    EXPECT_EQ(d.chi.size(), n);
    EXPECT_EQ(d.f_nominal.size(), n);
    const auto cfg = default_config();
    for (std::size_t k = 0; k < n; ++k) {
        ASSERT_EQ(d.chi[k], cfg.gains.K2 * sign(d.e[k]));
        ASSERT_EQ(d.f_nominal[k], nominal_accel(default_data().u[k], d.x2_hat[k], cfg.m, cfg.gamma));
    }
    EXPECT_GE(d.skip_time, cfg.g_settling());
}

TEST(EstimateForce, RejectsMissingChannels) {
    Dataset ds = default_data();
    ds.sigma_meas.clear();
    try {
        estimate_force(ds, default_config());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Channel);
        EXPECT_NE(std::string(e.what()).find("sigma_meas"), std::string::npos);
    }
}

TEST(EstimateForce, WarnsWhenConvergenceIsNeverDetected) {
    auto cfg = default_config();
    cfg.convergence_threshold = 1e-12;
    const auto est = estimate_force(default_data(), cfg);
    EXPECT_FALSE(est.diagnostics.convergence.converged);
    EXPECT_FALSE(est.diagnostics.warnings.empty());
}

TEST(EstimateForce, IsDeterministic) {
    const auto a = estimate_force(default_data(), default_config());
    const auto b = estimate_force(default_data(), default_config());
    EXPECT_EQ(a.f2_hat, b.f2_hat);
    EXPECT_EQ(a.diagnostics.e, b.diagnostics.e);
}

TEST(EstimateForce, ScalesWithForceChannelsMassAndFriction) {
    for (double kappa : {2.0, 0.5, 3.0}) {
        Dataset scaled = default_data();
        for (double& u : scaled.u) u *= kappa;
        auto cfg = default_config();
        const auto base = estimate_force(default_data(), cfg);
        cfg.m *= kappa;
        cfg.gamma *= kappa;
        const auto est = estimate_force(scaled, cfg);
        for (std::size_t k = 0; k < est.f2_hat.size(); ++k)
            ASSERT_NEAR(est.f2_hat[k], kappa * base.f2_hat[k], 1e-9 * (1.0 + std::abs(kappa * base.f2_hat[k]))) << k;
    }
}

TEST(ForceMetrics, HandExample) {
    const TimeSeries est(1.0, {9.0, 1.0, 2.0, 3.0});
    const TimeSeries ref(1.0, {0.0, 1.0, 4.0, 3.0});
    const auto m = force_metrics(est, ref, 1.0);
    EXPECT_EQ(m.samples, 3u);
    EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(4.0 / 3.0));
    EXPECT_EQ(m.peak_error, 2.0);
    EXPECT_EQ(m.peak_reference, 4.0);
}

TEST(IdentifyL, SingleElementGrid) {
    const auto rep = identify_L(sine_motion(1.0, 1e-5), {4.2});
    EXPECT_EQ(rep.optimum, std::vector<double>{4.2});
    EXPECT_EQ(rep.trace_objective.size(), 1u);
    EXPECT_EQ(rep.evaluations, 1u);
}

TEST(IdentifyL, ArgminWithinFactorOf3OfTheAccelerationBound) {
    const double L_true = std::numbers::pi * std::numbers::pi;
    const auto grid = log_grid(0.3, 300.0, 40);
    const auto rep = identify_L(sine_motion(1.0, 1e-5), grid);
    const double L = rep.optimum[0];
    EXPECT_GT(L, L_true / 3.0);
    EXPECT_LT(L, L_true * 3.0);
    // tracking loss far below the bound
    EXPECT_GT(rep.trace_objective.front(), 100.0 * rep.objective);
}

TEST(IdentifyL, TiesGoToTheSmallerL) {
    const auto rep = identify_L(from_sigma(sampled(1e-3, 3000, [](double) { return 0.0; })), {5.0, 2.0, 8.0});
    EXPECT_EQ(rep.optimum[0], 2.0);
    EXPECT_EQ(rep.objective, 0.0);
}

TEST(IdentifyL, IgnoresTruthChannels) {
    Dataset stripped = default_data();
    stripped.sigma_true.reset();
    stripped.v_true.reset();
    stripped.f2_ref.reset();
    stripped.xi_true.reset();
    const auto grid = log_grid(1.0, 100.0, 8);
    const auto a = identify_L(default_data(), grid), b = identify_L(stripped, grid);
    EXPECT_EQ(a.trace_objective, b.trace_objective);
    EXPECT_EQ(a.optimum, b.optimum);
}

TEST(IdentifyL, ParallelAndSerialAgree) {
    const auto grid = log_grid(1.0, 100.0, 8);
    const auto a = identify_L(default_data(), grid, {1.0, true});
    const auto b = identify_L(default_data(), grid, {1.0, false});
    EXPECT_EQ(a.trace_objective, b.trace_objective);
}

TEST(IdentifyL, RefiningAroundTheArgminNeverIncreasesTheMinimum) {
    const auto data = sine_motion(1.0, 1e-4);
    auto grid = log_grid(0.5, 200.0, 10);
    const auto coarse = identify_L(data, grid);
    const auto it = std::find(grid.begin(), grid.end(), coarse.optimum[0]);
    const auto i = static_cast<std::size_t>(it - grid.begin());
    if (i > 0) grid.push_back(std::sqrt(grid[i - 1] * grid[i]));
    if (i + 1 < grid.size()) grid.push_back(std::sqrt(grid[i] * grid[i + 1]));
    const auto fine = identify_L(data, grid);
    EXPECT_LE(fine.objective, coarse.objective);
}

TEST(IdentifyL, ReportMinimumIsBelowEveryCurvePoint) {
    const auto rep = identify_L(default_data(), log_grid(0.5, 50.0, 12));
    for (double v : rep.trace_objective) EXPECT_LE(rep.objective, v);
    EXPECT_EQ(rep.trace_points.size(), rep.trace_objective.size());
    EXPECT_EQ(rep.samples, default_data().size() - 1000);
}

TEST(IdentifyL, RejectsBadGrids) {
    EXPECT_THROW(identify_L(default_data(), {}), Error);
    EXPECT_THROW(identify_L(default_data(), {1.0, 0.0}), Error);
    EXPECT_THROW(identify_L(default_data(), {-2.0}), Error);
}

TEST(ShaperFriction, VectorRoundTrip) {
    const ShaperFriction p{rig_coupling(), 160.0};
    const auto v = p.to_vector();
    EXPECT_EQ(v, (std::vector<double>{1.0, 1.37e-3, 1.284e-2, 2.84e-5, 2.38e-5, 160.0}));
    const auto q = ShaperFriction::from_vector(v);
    EXPECT_EQ(q.coupling, p.coupling);
    EXPECT_EQ(q.gamma, p.gamma);
    EXPECT_EQ(ShaperFriction::names(2), (std::vector<std::string>{"a", "b1", "b2", "c1", "c2", "gamma"}));
}

TEST(ShaperFrictionObjective, InadmissibleParametersAreInfinite) {
    const ShaperFrictionObjective f(fit_data(), fit_options());
    EXPECT_TRUE(std::isinf(f(std::vector<double>{1.0, 0.02, -0.005, 100.0})));
    EXPECT_TRUE(std::isinf(f(std::vector<double>{1.0, 1e-6, 0.005, 100.0})));  // G pole above Nyquist
    EXPECT_TRUE(std::isfinite(f(std::vector<double>{1.2, 0.02, 0.005, 100.0})));
}

TEST(IdentifyShaperFriction, RecoversGammaAndGain) {
    const auto sc = fit_scenario();
    const ShaperFriction truth{sc.plant.coupling, sc.plant.gamma};
    auto v = truth.to_vector();
    v[0] *= 1.4;
    v[1] *= 0.6;
    v[2] *= 1.5;
    v[3] *= 0.7;
    const auto rep = identify_shaper_friction(fit_data(), ShaperFriction::from_vector(v), 3000, fit_options());
    const auto fit = ShaperFriction::from_vector(rep.optimum);
    EXPECT_NEAR(fit.gamma / truth.gamma, 1.0, 0.05);
    EXPECT_NEAR(fit.coupling.a() / truth.coupling.a(), 1.0, 0.05);
    EXPECT_TRUE(rep.converged);
}

TEST(IdentifyShaperFriction, InitAtTheTruthStaysThere) {
    const auto sc = fit_scenario();
    const ShaperFriction truth{sc.plant.coupling, sc.plant.gamma};
    const ShaperFrictionObjective f(fit_data(), fit_options());
    const auto rep = identify_shaper_friction(fit_data(), truth, 3000, fit_options());
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.objective, f(truth));
    const auto fit = ShaperFriction::from_vector(rep.optimum);
    EXPECT_NEAR(fit.gamma / truth.gamma, 1.0, 0.02);
    EXPECT_NEAR(fit.coupling.a() / truth.coupling.a(), 1.0, 0.02);
    // residual from the differentiator and filter only: well under 1% of the peak load
    EXPECT_LT(std::sqrt(rep.objective / static_cast<double>(rep.samples)), 0.01 * 6000.0);
}

TEST(IdentifyShaperFriction, BudgetExhaustionIsReported) {
    const ShaperFriction init{LeadLagShaper(2.0, {{0.05, 0.01}}), 300.0};
    const auto rep = identify_shaper_friction(fit_data(), init, 15, fit_options());
    EXPECT_FALSE(rep.converged);
    EXPECT_LE(rep.evaluations, 15u);
    EXPECT_EQ(rep.trace_objective.size(), rep.evaluations);
}

TEST(IdentifyShaperFriction, ReportMinimumIsBelowEveryTracePoint) {
    const ShaperFriction init{LeadLagShaper(2.0, {{0.05, 0.01}}), 300.0};
    const auto rep = identify_shaper_friction(fit_data(), init, 200, fit_options());
    for (double v : rep.trace_objective) EXPECT_LE(rep.objective, v);
    EXPECT_EQ(rep.names, ShaperFriction::names(1));
}

TEST(IdentifyShaperFriction, NeedsTheReferenceChannel) {
    Dataset ds = fit_data();
    ds.f2_ref.reset();
    try {
        identify_shaper_friction(ds, {rig_coupling(), 160.0}, 100, fit_options());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Channel);
    }
    EXPECT_THROW(identify_shaper_friction(fit_data(), {rig_coupling(), 0.0}, 100, fit_options()), Error);
}

TEST(NelderMead, Rosenbrock) {
    auto f = [](const std::vector<double>& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    NelderMeadOptions o;
    o.max_evaluations = 5000;
    const auto r = nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5}, o);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-3);
    EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(NelderMead, NonFiniteValuesAreAvoided) {
    auto f = [](const std::vector<double>& x) {
        return x[0] < 0.0 ? std::nan("") : (x[0] - 2.0) * (x[0] - 2.0);
    };
    const auto r = nelder_mead(f, {0.5}, {1.0}, {});
    EXPECT_NEAR(r.x[0], 2.0, 1e-4);
}
