#pragma once

// Force estimation F̂2 = g(K2 sign(e) − f(u, x̂2)) and the two identification
// procedures built on it: the L sweep over the output error and the simplex
// fit of the coupling shaper and Coulomb level against a reference force.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/filter.hpp"
#include "sfe/nelder_mead.hpp"
#include "sfe/plant.hpp"
#include "sfe/signal.hpp"
#include "sfe/sta.hpp"

namespace sfe {

struct EstimatorConfig {
    StaGains gains = gains_from_L(1.0);
    double m = 1.7;
    double gamma = 160.0;
    LeadLagShaper coupling = rig_coupling();  // S12; the g-filter is m * S12^-1
    std::optional<double> fir_cutoff_hz;      // chattering cut-off, off by default
    std::optional<double> transient_skip;     // s; automatic when unset
    std::optional<double> convergence_threshold;  // σ units; automatic when unset
    double convergence_dwell = 0.2;           // s

    DiscreteFilter g_filter(double dt) const { return discretize(invert_shaper(coupling, m), dt); }

    /// Settling time of the g-filter, ~5 times its slowest time constant.
    double g_settling() const {
        double tmax = 0.0;
        for (const auto& st : coupling.stages()) tmax = std::max(tmax, st.b);
        return 5.0 * tmax;
    }

    void validate() const {
        gains.validate();
        if (!(m > 0.0)) throw validation_error("estimator: m must be > 0");
        if (!(gamma >= 0.0)) throw validation_error("estimator: gamma must be >= 0");
        invert_shaper(coupling, m);
        if (fir_cutoff_hz && !(*fir_cutoff_hz > 0.0)) throw validation_error("estimator: fir cutoff must be > 0");
        if (transient_skip && !(*transient_skip >= 0.0)) throw validation_error("estimator: transient_skip must be >= 0");
        if (convergence_threshold && !(*convergence_threshold > 0.0))
            throw validation_error("estimator: convergence threshold must be > 0");
        if (!(convergence_dwell > 0.0)) throw validation_error("estimator: convergence dwell must be > 0");
    }
};

struct EstimateDiagnostics {
    TimeSeries e;
    TimeSeries x2_hat;
    TimeSeries chi;
    TimeSeries f_nominal;
    Convergence convergence;
    double threshold = 0.0;
    double skip_time = 0.0;  // samples before this are transient
    std::vector<std::string> warnings;
};

struct ForceEstimate {
    TimeSeries f2_hat;
    EstimateDiagnostics diagnostics;
};

/// Default convergence threshold: 5x the robust noise estimate, floored at
/// the discretization chattering level.
inline double default_convergence_threshold(const TimeSeries& sigma, const StaGains& gains) {
    return std::max(5.0 * estimate_noise_std(sigma), 10.0 * gains.K2 * sigma.dt() * sigma.dt());
}

inline ForceEstimate estimate_force(const Dataset& dataset, const EstimatorConfig& config) {
    config.validate();
    dataset.validate();
    const TimeSeries sigma = dataset.channel("sigma_meas");
    const TimeSeries u = dataset.channel("u");
    const double dt = dataset.dt;

    auto diff = differentiate(sigma, config.gains);
    TimeSeries chi = eoi(diff.e, config.gains);

    std::vector<double> f(sigma.size()), r(sigma.size());
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        f[k] = nominal_accel(u[k], diff.x2_hat[k], config.m, config.gamma);
        r[k] = chi[k] - f[k];
    }
    TimeSeries residual(dt, std::move(r));
    if (config.fir_cutoff_hz) residual = fir_lowpass(residual, *config.fir_cutoff_hz);
    TimeSeries f2_hat = apply_filter(config.g_filter(dt), residual);

    EstimateDiagnostics diag;
    diag.threshold = config.convergence_threshold.value_or(default_convergence_threshold(sigma, config.gains));
    diag.convergence = detect_convergence(diff.e, diag.threshold, config.convergence_dwell);
    if (config.transient_skip) {
        diag.skip_time = *config.transient_skip;
    } else {
        diag.skip_time = config.g_settling();
        if (diag.convergence.converged) diag.skip_time = std::max(diag.skip_time, diag.convergence.time);
    }
    if (!diag.convergence.converged)
        diag.warnings.push_back("differentiator convergence not detected (threshold " + std::to_string(diag.threshold) + ")");
    diag.e = std::move(diff.e);
    diag.x2_hat = std::move(diff.x2_hat);
    diag.chi = std::move(chi);
    diag.f_nominal = TimeSeries(dt, std::move(f));
    return {std::move(f2_hat), std::move(diag)};
}

struct ForceMetrics {
    double rmse = 0.0;
    double peak_error = 0.0;
    double peak_reference = 0.0;
    std::size_t samples = 0;
};

/// Post-transient error statistics of an estimate against a reference.
inline ForceMetrics force_metrics(const TimeSeries& estimate, const TimeSeries& reference, double skip_time) {
    if (estimate.size() != reference.size()) throw channel_error("force_metrics: length mismatch");
    const auto first = static_cast<std::size_t>(std::ceil(skip_time / estimate.dt() - 1e-9));
    ForceMetrics m;
    double acc = 0.0;
    for (std::size_t k = first; k < estimate.size(); ++k) {
        const double err = estimate[k] - reference[k];
        acc += err * err;
        m.peak_error = std::max(m.peak_error, std::abs(err));
        m.peak_reference = std::max(m.peak_reference, std::abs(reference[k]));
        ++m.samples;
    }
    if (m.samples == 0) throw validation_error("force_metrics: no samples after the transient window");
    m.rmse = std::sqrt(acc / static_cast<double>(m.samples));
    return m;
}

// ---------------------------------------------------------------------------

struct FitReport {
    std::vector<std::string> names;
    std::vector<double> optimum;
    double objective = 0.0;
    std::vector<std::vector<double>> trace_points;  // parameters per evaluation (or curve point)
    std::vector<double> trace_objective;
    bool converged = false;
    std::size_t evaluations = 0;
    std::size_t samples = 0;  // N in the objective sum
};

struct LSweepOptions {
    double skip_time = 1.0;  // s; common transient window for every grid point
    bool parallel = true;
};

/// Sum of squared output errors of the differentiator over the post-transient window.
inline double output_error_sse(const TimeSeries& sigma, double L, std::size_t first) {
    const auto gains = gains_from_L(L);
    StaState st{sigma[0], 0.0};
    double sse = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        const auto step = sta_step(st, sigma[k], gains, sigma.dt());
        if (k >= first) sse += step.e * step.e;
        st = step.state;
    }
    return sse;
}

/// Grid search for the L minimizing the cumulative squared output error.
/// Ties go to the smaller L.
inline FitReport identify_L(const Dataset& dataset, const std::vector<double>& grid, LSweepOptions opts = {}) {
    if (grid.empty()) throw validation_error("identify_L: empty L grid");
    for (double L : grid)
        if (!(L > 0.0) || !std::isfinite(L)) throw validation_error("identify_L: grid values must be > 0");
    if (!(opts.skip_time >= 0.0)) throw validation_error("identify_L: skip_time must be >= 0");
    const TimeSeries sigma = dataset.channel("sigma_meas");
    const auto first = static_cast<std::size_t>(std::ceil(opts.skip_time / sigma.dt() - 1e-9));
    if (first >= sigma.size()) throw validation_error("identify_L: transient window covers the whole record");

    std::vector<double> sse(grid.size());
    if (opts.parallel && grid.size() > 1) {
        const std::size_t workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < grid.size(); i += workers) sse[i] = output_error_sse(sigma, grid[i], first);
            }));
        }
        for (auto& j : jobs) j.get();
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i) sse[i] = output_error_sse(sigma, grid[i], first);
    }

    FitReport rep;
    rep.names = {"L"};
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        rep.trace_points.push_back({grid[i]});
        rep.trace_objective.push_back(sse[i]);
        if (sse[i] < sse[best] || (sse[i] == sse[best] && grid[i] < grid[best])) best = i;
    }
    rep.optimum = {grid[best]};
    rep.objective = sse[best];
    rep.converged = true;
    rep.evaluations = grid.size();
    rep.samples = sigma.size() - first;
    return rep;
}

// ---------------------------------------------------------------------------

/// Coupling shaper and Coulomb level, the parameters of the simultaneous fit.
struct ShaperFriction {
    LeadLagShaper coupling;
    double gamma = 0.0;

    /// (a, b_1..b_n, c_1..c_n, γ).
    std::vector<double> to_vector() const {
        std::vector<double> v{coupling.a()};
        for (const auto& st : coupling.stages()) v.push_back(st.b);
        for (const auto& st : coupling.stages()) v.push_back(st.c);
        v.push_back(gamma);
        return v;
    }

    static ShaperFriction from_vector(const std::vector<double>& v) {
        if (v.size() < 4 || (v.size() - 2) % 2 != 0) throw validation_error("ShaperFriction: bad parameter vector size");
        const std::size_t n = (v.size() - 2) / 2;
        std::vector<LeadLagStage> stages(n);
        for (std::size_t k = 0; k < n; ++k) stages[k] = {v[1 + k], v[1 + n + k]};
        return {LeadLagShaper(v[0], std::move(stages)), v.back()};
    }

    static std::vector<std::string> names(std::size_t n) {
        std::vector<std::string> out{"a"};
        for (std::size_t k = 1; k <= n; ++k) out.push_back("b" + std::to_string(k));
        for (std::size_t k = 1; k <= n; ++k) out.push_back("c" + std::to_string(k));
        out.push_back("gamma");
        return out;
    }
};

struct ShaperFitOptions {
    double L = 1.0;  // from a prior identify_L run
    double m = 1.7;
    std::optional<double> skip_time;   // s; default max(T_conv, 1 s)
    std::optional<double> fir_cutoff_hz;
    double initial_step = 0.3;         // log-space simplex edge
    NelderMeadOptions simplex;
};

/// Objective Σ (F̂2(θ) − f2_ref)² with the differentiator run once: only the
/// g-filter and the friction level depend on θ.
class ShaperFrictionObjective {
public:
    ShaperFrictionObjective(const Dataset& dataset, const ShaperFitOptions& opts) : m_(opts.m), dt_(dataset.dt) {
        dataset.validate();
        const TimeSeries sigma = dataset.channel("sigma_meas");
        const TimeSeries u = dataset.channel("u");
        const TimeSeries ref = dataset.channel("f2_ref");
        if (!(m_ > 0.0)) throw validation_error("identify_shaper_friction: m must be > 0");
        const auto gains = gains_from_L(opts.L);
        const auto diff = differentiate(sigma, gains);
        std::vector<double> base(sigma.size()), fric(sigma.size());
        for (std::size_t k = 0; k < sigma.size(); ++k) {
            base[k] = gains.K2 * sign(diff.e[k]) - u[k] / m_;
            fric[k] = sign(diff.x2_hat[k]) / m_;
        }
        base_ = TimeSeries(dt_, std::move(base));
        friction_ = TimeSeries(dt_, std::move(fric));
        if (opts.fir_cutoff_hz) {
            base_ = fir_lowpass(base_, *opts.fir_cutoff_hz);
            friction_ = fir_lowpass(friction_, *opts.fir_cutoff_hz);
        }
        ref_ = ref.vector();
        double skip = 1.0;
        if (opts.skip_time) {
            skip = *opts.skip_time;
        } else {
            const auto conv = detect_convergence(diff.e, default_convergence_threshold(sigma, gains), 0.2);
            if (conv.converged) skip = std::max(skip, conv.time);
        }
        first_ = static_cast<std::size_t>(std::ceil(skip / dt_ - 1e-9));
        if (first_ >= ref_.size()) throw validation_error("identify_shaper_friction: transient window covers the record");
    }

    std::size_t samples() const noexcept { return ref_.size() - first_; }

    /// +inf for parameters outside the admissible set.
    double operator()(const ShaperFriction& p) const {
        DiscreteFilter g;
        try {
            g = discretize(invert_shaper(p.coupling, m_), dt_);
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
        const double gamma = p.gamma;
        double sse = 0.0;
        for (std::size_t k = 0; k < ref_.size(); ++k) {
            const double y = g.step(base_[k] + gamma * friction_[k]);
            if (k >= first_) {
                const double err = y - ref_[k];
                sse += err * err;
            }
        }
        return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
    }

    double operator()(const std::vector<double>& theta) const {
        for (double v : theta)
            if (!(v > 0.0) || !std::isfinite(v)) return std::numeric_limits<double>::infinity();
        return (*this)(ShaperFriction::from_vector(theta));
    }

private:
    double m_;
    double dt_;
    TimeSeries base_, friction_;
    std::vector<double> ref_;
    std::size_t first_ = 0;
};

/// Simplex fit of (a, b, c, γ) in log-parameter space.
inline FitReport identify_shaper_friction(const Dataset& dataset, const ShaperFriction& init, std::size_t budget,
                                          ShaperFitOptions opts = {}) {
    if (!dataset.has("f2_ref")) throw channel_error("identify_shaper_friction: dataset has no 'f2_ref' channel");
    const auto x0 = init.to_vector();
    for (double v : x0)
        if (!(v > 0.0) || !std::isfinite(v)) throw validation_error("identify_shaper_friction: initial parameters must all be > 0");
    if (budget == 0) throw validation_error("identify_shaper_friction: evaluation budget must be > 0");

    const ShaperFrictionObjective objective(dataset, opts);
    FitReport rep;
    rep.names = ShaperFriction::names(init.coupling.order());
    rep.samples = objective.samples();

    std::vector<double> log0(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) log0[i] = std::log(x0[i]);
    auto in_log = [&](const std::vector<double>& z) {
        std::vector<double> theta(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) theta[i] = std::exp(z[i]);
        const double f = objective(theta);
        rep.trace_points.push_back(std::move(theta));
        rep.trace_objective.push_back(f);
        return f;
    };
    NelderMeadOptions nm = opts.simplex;
    nm.max_evaluations = budget;
    const auto res = nelder_mead(in_log, log0, std::vector<double>(log0.size(), opts.initial_step), nm);

    rep.optimum.resize(res.x.size());
    for (std::size_t i = 0; i < res.x.size(); ++i) rep.optimum[i] = std::exp(res.x[i]);
    rep.objective = res.fx;
    rep.converged = res.converged;
    rep.evaluations = res.evaluations;
    return rep;
}

}  // namespace sfe
