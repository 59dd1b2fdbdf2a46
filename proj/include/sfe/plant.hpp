#pragma once

// Synthetic two-port plant: a mass with Coulomb friction, driven by the
// actuator force u and by an environmental force F2 that reaches the mass
// through a lead-lag coupling, ξ = m^-1 S12[F2].

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/filter.hpp"
#include "sfe/signal.hpp"

namespace sfe {

/// Coupling identified on the hydraulic rig: S12 = m / G with
/// G = 1.7 (2.84e-5 s + 1)/(1.37e-3 s + 1) * (2.38e-5 s + 1)/(1.284e-2 s + 1).
inline LeadLagShaper rig_coupling() {
    return LeadLagShaper(1.0, {{1.37e-3, 2.84e-5}, {1.284e-2, 2.38e-5}});
}

struct PlantParams {
    double m = 1.7;        // kg
    double gamma = 160.0;  // N, Coulomb level
    LeadLagShaper coupling = rig_coupling();
    double noise_std = 0.0;  // m, on σ measurement

    void validate() const {
        if (!(m > 0.0) || !std::isfinite(m)) throw validation_error("plant.m must be > 0");
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw validation_error("plant.gamma must be >= 0");
        if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw validation_error("plant.noise_std must be >= 0");
        shaper_to_tf(coupling);  // properness
    }
};

inline double coulomb(double v, double gamma) noexcept { return gamma * sign(v); }

/// f = m^-1 (u − γ sign(v)).
inline double nominal_accel(double u, double v, double m, double gamma) noexcept {
    return (u - coulomb(v, gamma)) / m;
}

inline double nominal_accel(double u, double v, const PlantParams& p) noexcept {
    return nominal_accel(u, v, p.m, p.gamma);
}

// ---------------------------------------------------------------------------
// Signals.

/// offset + rate*t + sum_i A_i sin(2π t / P_i + φ_i).
struct Waveform {
    struct Sine {
        double amplitude = 0.0;
        double period = 1.0;
        double phase = 0.0;  // rad
    };

    double offset = 0.0;
    double rate = 0.0;
    std::vector<Sine> sines;

    double value(double t) const noexcept {
        double y = offset + rate * t;
        for (const auto& s : sines) y += s.amplitude * std::sin(2.0 * std::numbers::pi * t / s.period + s.phase);
        return y;
    }

    double derivative(double t) const noexcept {
        double y = rate;
        for (const auto& s : sines) {
            const double w = 2.0 * std::numbers::pi / s.period;
            y += s.amplitude * w * std::cos(w * t + s.phase);
        }
        return y;
    }

    void validate(const std::string& where) const {
        if (!std::isfinite(offset) || !std::isfinite(rate)) throw validation_error(where + ": non-finite offset/rate");
        for (const auto& s : sines) {
            if (!(s.period > 0.0) || !std::isfinite(s.amplitude) || !std::isfinite(s.phase))
                throw validation_error(where + ": sine components need period > 0 and finite amplitude/phase");
        }
    }
};

enum class LoadKind { Saw, Step, Sine, HoldSequence };

struct LoadProfile {
    LoadKind kind = LoadKind::Saw;
    double amplitude = 0.0;  // N
    double period = 1.0;     // s
    double offset = 0.0;     // N
    double duty = 1.0;       // saw: ramp fraction of the period; the rest holds at offset
    double onset = 0.0;      // step: switching time, s
    std::vector<double> levels;  // hold-sequence plateaus, N
    double dwell = 1.0;      // hold-sequence: time per level, s
    double smoothing = 0.0;  // s; 2nd-order load-actuator lag applied in simulate
    double sign = -1.0;      // direction of F2 along σ; -1 pushes against the positive stroke

    /// F_max such that |F2(t)| <= F_max.
    double bound() const {
        if (kind == LoadKind::HoldSequence) {
            double b = 0.0;
            for (double l : levels) b = std::max(b, std::abs(l));
            return b + std::abs(offset);
        }
        return std::abs(amplitude) + std::abs(offset);
    }

    void validate() const {
        if (!std::isfinite(amplitude) || !std::isfinite(offset)) throw validation_error("load: non-finite amplitude/offset");
        if (amplitude < 0.0) throw validation_error("load.amplitude must be >= 0");
        if ((kind == LoadKind::Saw || kind == LoadKind::Sine) && !(period > 0.0))
            throw validation_error("load.period must be > 0 for periodic profiles");
        if (kind == LoadKind::Saw && !(duty > 0.0 && duty <= 1.0)) throw validation_error("load.duty must be in (0, 1]");
        if (kind == LoadKind::HoldSequence) {
            if (levels.empty()) throw validation_error("load.levels must be non-empty for hold-sequence");
            if (!(dwell > 0.0)) throw validation_error("load.dwell must be > 0");
            for (double l : levels)
                if (!std::isfinite(l)) throw validation_error("load.levels must be finite");
        }
        if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw validation_error("load.smoothing must be >= 0");
        if (sign != 1.0 && sign != -1.0) throw validation_error("load.sign must be +1 or -1");
    }

    /// Raw profile value (no smoothing, no sign).
    double value(double t) const {
        switch (kind) {
            case LoadKind::Saw: {
                const double tau = std::fmod(t, period);
                const double ramp = duty * period;
                return tau < ramp ? offset + amplitude * tau / ramp : offset;
            }
            case LoadKind::Step:
                return t < onset ? offset : offset + amplitude;
            case LoadKind::Sine:
                return offset + amplitude * std::sin(2.0 * std::numbers::pi * t / period);
            case LoadKind::HoldSequence: {
                const auto idx = static_cast<std::size_t>(std::floor(t / dwell)) % levels.size();
                return offset + levels[idx];
            }
        }
        return 0.0;
    }
};

inline TimeSeries generate_load(const LoadProfile& load, const SamplingConfig& config) {
    load.validate();
    const std::size_t n = config.sample_count();
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = load.value(static_cast<double>(k) * config.dt);
    return TimeSeries(config.dt, std::move(v));
}

// ---------------------------------------------------------------------------
// Coupling channel.

/// Internal sub-steps per sample so that the coupling poles sit well below
/// the sub-step Nyquist frequency.
inline std::size_t coupling_substeps(const LeadLagShaper& coupling, double dt) {
    double wmax = 0.0;
    for (const auto& st : coupling.stages())
        if (st.c > 0.0) wmax = std::max(wmax, 1.0 / st.c);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(4.0 * wmax * dt / std::numbers::pi)));
}

/// ξ = m^-1 S12[F2], run at a sub-step h.
class CouplingChannel {
public:
    CouplingChannel(const LeadLagShaper& coupling, double m, double h)
        : filter_(discretize(coupling, h)), inv_m_(1.0 / m) {}

    void settle(double f2) noexcept { filter_.settle(f2); }
    double step(double f2) noexcept { return filter_.step(f2) * inv_m_; }

private:
    DiscreteFilter filter_;
    double inv_m_;
};

/// Forward coupling on a sampled force. The filter starts in steady state at
/// f2[0]; between samples the force is interpolated linearly. `substeps` = 0
/// picks coupling_substeps().
inline TimeSeries coupled_disturbance(const TimeSeries& f2, const PlantParams& params, std::size_t substeps = 0) {
    params.validate();
    if (f2.empty()) return TimeSeries(f2.dt(), {});
    const std::size_t n = substeps ? substeps : coupling_substeps(params.coupling, f2.dt());
    CouplingChannel ch(params.coupling, params.m, f2.dt() / static_cast<double>(n));
    std::vector<double> xi(f2.size());
    ch.settle(f2[0]);
    xi[0] = params.coupling.a() * f2[0] / params.m;
    for (std::size_t k = 1; k < f2.size(); ++k) {
        double y = 0.0;
        for (std::size_t j = 1; j <= n; ++j)
            y = ch.step(f2[k - 1] + (f2[k] - f2[k - 1]) * static_cast<double>(j) / static_cast<double>(n));
        xi[k] = y;
    }
    return TimeSeries(f2.dt(), std::move(xi));
}

// ---------------------------------------------------------------------------
// Actuator force.

enum class ControlKind { Tracking, OpenLoop };
enum class Feedback { True, Measured };

/// Tracking: u = kp (r − σ_fb) + kd (ṙ − v). With Feedback::True the law acts
/// on the true position at every sub-step (servo/oil-column stiffness); with
/// Feedback::Measured it is a sampled P(D) law on σ_meas held over the sample.
/// OpenLoop: u = open_loop(t), held over the sample.
struct ControlLaw {
    ControlKind kind = ControlKind::Tracking;
    double kp = 1e6;  // N/m
    double kd = 2e3;  // N s/m
    Feedback feedback = Feedback::True;
    Waveform reference;  // m
    Waveform open_loop;  // N

    void validate() const {
        if (!(kp >= 0.0) || !(kd >= 0.0) || !std::isfinite(kp) || !std::isfinite(kd))
            throw validation_error("control: kp, kd must be >= 0");
        reference.validate("control.reference");
        open_loop.validate("control.u");
    }

    /// Measured feedback is held over each sample, so the PD loop on m must be
    /// stable as a sampled system.
    void validate_for(double m, double dt) const {
        validate();
        if (kind != ControlKind::Tracking || feedback != Feedback::Measured) return;
        const double a11 = 1.0 - kp * dt * dt / (2.0 * m), a12 = dt - kd * dt * dt / (2.0 * m);
        const double a21 = -kp * dt / m, a22 = 1.0 - kd * dt / m;
        const double tr = a11 + a22, det = a11 * a22 - a12 * a21;
        const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det, 0.0));
        const double rho = std::max(std::abs((tr + disc) / 2.0), std::abs((tr - disc) / 2.0));
        if (!(rho < 1.0))
            throw validation_error("control: measured-feedback PD loop is unstable at dt = " + std::to_string(dt) +
                                   " (spectral radius " + std::to_string(rho) + "); lower kp/kd or dt");
    }
};

// ---------------------------------------------------------------------------

/// Aligned channels of a simulation run or a measured record.
struct Dataset {
    double dt = 1e-3;
    std::vector<double> t, u, sigma_meas;
    std::optional<std::vector<double>> sigma_true, v_true, f2_ref, xi_true;

    std::size_t size() const noexcept { return t.size(); }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    /// Channel as a TimeSeries; throws a channel error naming a missing column.
    TimeSeries channel(const std::string& name) const {
        const auto* c = find(name);
        if (!c) throw channel_error("dataset: missing channel '" + name + "'");
        return TimeSeries(dt, *c);
    }

    void validate() const {
        if (!(dt > 0.0)) throw validation_error("dataset: dt must be > 0");
        const std::size_t n = t.size();
        auto check = [&](const std::vector<double>& c, const char* name) {
            if (c.size() != n) throw channel_error(std::string("dataset: channel '") + name + "' length mismatch");
        };
        if (!u.empty()) check(u, "u");
        if (!sigma_meas.empty()) check(sigma_meas, "sigma_meas");
        if (sigma_true) check(*sigma_true, "sigma_true");
        if (v_true) check(*v_true, "v_true");
        if (f2_ref) check(*f2_ref, "f2_ref");
        if (xi_true) check(*xi_true, "xi_true");
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    const std::vector<double>* find(const std::string& name) const {
        if (name == "t") return &t;
        if (name == "u") return u.empty() && !t.empty() ? nullptr : &u;
        if (name == "sigma_meas") return sigma_meas.empty() && !t.empty() ? nullptr : &sigma_meas;
        if (name == "sigma_true") return sigma_true ? &*sigma_true : nullptr;
        if (name == "v_true") return v_true ? &*v_true : nullptr;
        if (name == "f2_ref") return f2_ref ? &*f2_ref : nullptr;
        if (name == "xi_true") return xi_true ? &*xi_true : nullptr;
        return nullptr;
    }
};

struct SimulationOptions {
    std::size_t substeps = 0;  // 0 = automatic
};

namespace detail {

// Semi-implicit Euler step of m v̇ = applied − friction with a sample-wise
// stiction clamp: a stopped mass stays stopped while |applied| <= γ, and a
// velocity reversal within one step under |applied| <= γ ends at rest.
inline double friction_velocity_update(double v, double applied, double m, double gamma, double h) noexcept {
    if (v != 0.0) {
        const double vn = v + h * (applied - coulomb(v, gamma)) / m;
        if (sign(vn) != sign(v) && std::abs(applied) <= gamma) return 0.0;
        return vn;
    }
    if (std::abs(applied) <= gamma) return 0.0;
    return h * (applied - coulomb(applied, gamma)) / m;
}

inline std::size_t loop_substeps(const ControlLaw& law, double m, double dt) {
    if (law.kind != ControlKind::Tracking || law.feedback != Feedback::True) return 1;
    const double w = std::sqrt(law.kp / m) + law.kd / m;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(w * dt / 0.05)));
}

template <class ForceFn>
Dataset integrate(const PlantParams& params, const LoadProfile& load, const SamplingConfig& config,
                  std::size_t substeps, double x0, double v0, ForceFn&& force) {
    const std::size_t n = config.sample_count();
    const double dt = config.dt;
    const double h = dt / static_cast<double>(substeps);
    const double m = params.m;

    CouplingChannel coupling(params.coupling, m, h);
    const double f0 = load.sign * load.value(0.0);
    coupling.settle(f0);
    double xi = params.coupling.a() * f0 / m;
    double lag1 = f0, f2 = f0;
    const double alpha = load.smoothing > 0.0 ? 1.0 - std::exp(-h / load.smoothing) : 1.0;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, params.noise_std > 0.0 ? params.noise_std : 1.0);

    Dataset ds;
    ds.dt = dt;
    ds.t.resize(n);
    ds.u.resize(n);
    ds.sigma_meas.resize(n);
    std::vector<double> sig(n), vel(n), fref(n), xis(n);

    double x = x0, v = v0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) * dt;
        const double meas = x + (params.noise_std > 0.0 ? noise(rng) : 0.0);
        ds.t[k] = tk;
        sig[k] = x;
        vel[k] = v;
        ds.sigma_meas[k] = meas;
        fref[k] = f2;
        xis[k] = xi;

        const double raw_k = load.value(tk);
        const double raw_next = load.value(tk + dt);
        for (std::size_t j = 0; j < substeps; ++j) {
            const double tj = tk + static_cast<double>(j) * h;
            const double u = force(k, j, tj, x, v, meas);
            if (j == 0) ds.u[k] = u;
            if (load.smoothing > 0.0) {
                lag1 += alpha * (load.sign * load.value(tj) - lag1);
                f2 += alpha * (lag1 - f2);
            } else {
                f2 = load.sign * (raw_k + (raw_next - raw_k) * static_cast<double>(j + 1) / static_cast<double>(substeps));
            }
            xi = coupling.step(f2);
            v = friction_velocity_update(v, u + m * xi, m, params.gamma, h);
            x += h * v;
        }
        if (!std::isfinite(x) || !std::isfinite(v))
            throw numerical_error("simulate: state diverged at t = " + std::to_string(tk));
    }
    ds.sigma_true = std::move(sig);
    ds.v_true = std::move(vel);
    ds.f2_ref = std::move(fref);
    ds.xi_true = std::move(xis);
    return ds;
}

}  // namespace detail

/// Open-loop simulation with a measured actuator force series.
inline Dataset simulate(const PlantParams& params, const TimeSeries& u, const LoadProfile& load,
                        const SamplingConfig& config, SimulationOptions opts = {}) {
    params.validate();
    load.validate();
    config.validate();
    if (!same_dt(u.dt(), config.dt)) throw validation_error("simulate: u.dt does not match sampling.dt");
    if (u.size() < config.sample_count()) throw validation_error("simulate: u shorter than the sampling window");
    const std::size_t n = opts.substeps ? opts.substeps : coupling_substeps(params.coupling, config.dt);
    return detail::integrate(params, load, config, n, 0.0, 0.0,
                             [&](std::size_t k, std::size_t, double, double, double, double) { return u[k]; });
}

/// Closed-loop (or waveform open-loop) simulation.
inline Dataset simulate(const PlantParams& params, const ControlLaw& law, const LoadProfile& load,
                        const SamplingConfig& config, SimulationOptions opts = {}) {
    params.validate();
    load.validate();
    config.validate();
    law.validate_for(params.m, config.dt);
    const std::size_t n = opts.substeps ? opts.substeps
                                        : std::max(coupling_substeps(params.coupling, config.dt),
                                                   detail::loop_substeps(law, params.m, config.dt));
    if (law.kind == ControlKind::OpenLoop) {
        double held = 0.0;
        return detail::integrate(params, load, config, n, 0.0, 0.0,
                                 [&](std::size_t, std::size_t j, double t, double, double, double) {
                                     if (j == 0) held = law.open_loop.value(t);
                                     return held;
                                 });
    }
    // Start on the reference at the force balance with the initial load.
    const double v0 = law.reference.derivative(0.0);
    const double x0 = law.reference.value(0.0) +
                      (params.coupling.a() * load.sign * load.value(0.0) - coulomb(v0, params.gamma)) / law.kp;
    if (law.feedback == Feedback::True) {
        return detail::integrate(params, load, config, n, x0, v0,
                                 [&](std::size_t, std::size_t, double t, double x, double v, double) {
                                     return law.kp * (law.reference.value(t) - x) +
                                            law.kd * (law.reference.derivative(t) - v);
                                 });
    }
    double held = 0.0;
    return detail::integrate(params, load, config, n, x0, v0,
                             [&](std::size_t, std::size_t j, double t, double, double v, double meas) {
                                 if (j == 0)
                                     held = law.kp * (law.reference.value(t) - meas) +
                                            law.kd * (law.reference.derivative(t) - v);
                                 return held;
                             });
}

}  // namespace sfe
