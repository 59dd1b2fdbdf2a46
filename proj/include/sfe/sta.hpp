#pragma once

// Super-twisting robust exact differentiator, forward Euler discretized,
// with equivalent output injection and an optional FIR chattering cut-off.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/signal.hpp"

namespace sfe {

struct StaGains {
    double L = 1.0;   // bound on |σ̈|
    double K1 = 0.0;
    double K2 = 0.0;

    void validate() const {
        if (!(L > 0.0) || !(K1 > 0.0) || !(K2 > 0.0) || !std::isfinite(L) || !std::isfinite(K1) ||
            !std::isfinite(K2))
            throw validation_error("StaGains: L, K1, K2 must be finite and > 0");
    }
};

/// K2 = 1.1 L, K1 = 2.028 sqrt(K2).
inline StaGains gains_from_L(double L) {
    if (!(L > 0.0) || !std::isfinite(L)) throw validation_error("gains_from_L: L must be > 0");
    const double k2 = 1.1 * L;
    return StaGains{L, 2.028 * std::sqrt(k2), k2};
}

struct StaState {
    double x1_hat = 0.0;  // estimate of σ
    double x2_hat = 0.0;  // estimate of σ̇
};

struct StaStep {
    StaState state;
    double e = 0.0;  // σ − x̂1, taken before the update
};

inline StaStep sta_step(StaState state, double sigma_meas, const StaGains& gains, double dt) noexcept {
    const double e = sigma_meas - state.x1_hat;
    const double s = sign(e);
    StaState next;
    next.x1_hat = state.x1_hat + dt * (gains.K1 * std::sqrt(std::abs(e)) * s + state.x2_hat);
    next.x2_hat = state.x2_hat + dt * (gains.K2 * s);
    return {next, e};
}

struct Differentiation {
    TimeSeries x2_hat;
    TimeSeries e;
};

/// Runs sta_step over the whole series. Sample k of each output holds the
/// values seen at step k (x̂2 before the update, e before the update).
inline Differentiation differentiate(const TimeSeries& sigma, const StaGains& gains, StaState initial) {
    gains.validate();
    std::vector<double> x2(sigma.size()), e(sigma.size());
    StaState st = initial;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
        const auto step = sta_step(st, sigma[k], gains, sigma.dt());
        x2[k] = st.x2_hat;
        e[k] = step.e;
        st = step.state;
    }
    return {TimeSeries(sigma.dt(), std::move(x2)), TimeSeries(sigma.dt(), std::move(e))};
}

/// Starts the observer on the first sample with zero velocity estimate.
inline Differentiation differentiate(const TimeSeries& sigma, const StaGains& gains) {
    return differentiate(sigma, gains, StaState{sigma.empty() ? 0.0 : sigma[0], 0.0});
}

struct Convergence {
    bool converged = false;
    double time = 0.0;  // T; equals the series duration when not converged
};

/// Earliest T with |e(t)| <= threshold on all of [T, T + dwell].
inline Convergence detect_convergence(const TimeSeries& e, double threshold, double dwell) {
    if (!(threshold > 0.0)) throw validation_error("detect_convergence: threshold must be > 0");
    if (!(dwell > 0.0)) throw validation_error("detect_convergence: dwell must be > 0");
    const auto window = static_cast<std::size_t>(std::llround(dwell / e.dt()));
    std::size_t run_start = 0, run_len = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        if (std::abs(e[k]) <= threshold) {
            if (run_len == 0) run_start = k;
            if (++run_len > window) return {true, e.time(run_start)};
        } else {
            run_len = 0;
        }
    }
    return {false, e.duration()};
}

/// χ = K2 sign(e).
inline TimeSeries eoi(const TimeSeries& e, const StaGains& gains) {
    std::vector<double> chi(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) chi[k] = gains.K2 * sign(e[k]);
    return TimeSeries(e.dt(), std::move(chi));
}

/// Hamming-windowed sinc low-pass kernel, odd length ~4/(cutoff*dt), unity DC.
inline std::vector<double> fir_lowpass_kernel(double cutoff_hz, double dt) {
    const double nyquist = 0.5 / dt;
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist))
        throw validation_error("fir_lowpass: cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, " +
                               std::to_string(nyquist) + ") Hz");
    auto len = static_cast<std::size_t>(std::llround(4.0 / (cutoff_hz * dt)));
    if (len % 2 == 0) ++len;
    len = std::max<std::size_t>(len, 3);
    const double fc = cutoff_hz * dt;  // cycles per sample
    const double mid = static_cast<double>(len - 1) / 2.0;
    std::vector<double> h(len);
    double sum = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
        const double x = static_cast<double>(n) - mid;
        const double sinc = x == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1));
        h[n] = sinc * w;
        sum += h[n];
    }
    for (double& v : h) v /= sum;
    return h;
}

/// Causal FIR low-pass. The first len-1 samples use the truncated kernel,
/// renormalized to unity DC.
inline TimeSeries fir_lowpass(const TimeSeries& x, double cutoff_hz) {
    const auto h = fir_lowpass_kernel(cutoff_hz, x.dt());
    const std::size_t len = h.size();
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const std::size_t taps = std::min(len, k + 1);
        double acc = 0.0, wsum = 0.0;
        for (std::size_t j = 0; j < taps; ++j) {
            acc += h[j] * x[k - j];
            wsum += h[j];
        }
        y[k] = taps == len ? acc : acc / wsum;
    }
    return TimeSeries(x.dt(), std::move(y));
}

/// Robust estimate of white measurement-noise std from second differences.
inline double estimate_noise_std(const TimeSeries& sigma) {
    if (sigma.size() < 4) return 0.0;
    std::vector<double> d2(sigma.size() - 2);
    for (std::size_t k = 0; k + 2 < sigma.size(); ++k) d2[k] = sigma[k + 2] - 2.0 * sigma[k + 1] + sigma[k];
    auto median = [](std::vector<double> v) {
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        return *mid;
    };
    const double med = median(d2);
    for (double& v : d2) v = std::abs(v - med);
    return 1.4826 * median(std::move(d2)) / std::sqrt(6.0);
}

}  // namespace sfe
