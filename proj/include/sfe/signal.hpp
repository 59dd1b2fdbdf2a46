#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sfe/error.hpp"

namespace sfe {

/// Discrete sign with sign(0) = 0.
inline double sign(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct SamplingConfig {
    double dt = 1e-3;  // s
    double duration = 60.0;  // s
    std::uint64_t seed = 1;

    std::size_t sample_count() const {
        validate();
        return static_cast<std::size_t>(std::llround(duration / dt));
    }

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw validation_error("sampling.dt must be > 0");
        if (!(duration > 0.0) || !std::isfinite(duration))
            throw validation_error("sampling.duration must be > 0");
        if (std::llround(duration / dt) < 2)
            throw validation_error("sampling: duration/dt must give at least 2 samples");
    }
};

/// Uniformly sampled scalar signal; sample k sits at t = k*dt.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(double dt, std::vector<double> values) : dt_(dt), values_(std::move(values)) {
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw validation_error("TimeSeries: dt must be > 0");
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (!std::isfinite(values_[k]))
                throw numerical_error("TimeSeries: non-finite sample at index " + std::to_string(k));
        }
    }

    double dt() const noexcept { return dt_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt_; }
    double duration() const noexcept { return static_cast<double>(values_.size()) * dt_; }

    double operator[](std::size_t k) const { return values_[k]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    double dt_ = 1e-3;
    std::vector<double> values_;
};

/// True when two sampling periods agree up to rounding.
inline bool same_dt(double a, double b) noexcept {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

// ---------------------------------------------------------------------------
// Polynomials in s, ascending degree.

using Polynomial = std::vector<double>;

inline Polynomial poly_trim(Polynomial p) {
    while (p.size() > 1 && p.back() == 0.0) p.pop_back();
    return p;
}

inline std::size_t poly_degree(const Polynomial& p) {
    const auto t = poly_trim(p);
    return t.empty() ? 0 : t.size() - 1;
}

inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b) {
    if (a.empty() || b.empty()) return {};
    Polynomial out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline std::complex<double> poly_eval(const Polynomial& p, std::complex<double> x) {
    std::complex<double> acc{0.0, 0.0};
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
    return acc;
}

/// Roots of a polynomial via the eigenvalues of its companion matrix.
inline std::vector<std::complex<double>> poly_roots(const Polynomial& coeffs) {
    const Polynomial p = poly_trim(coeffs);
    const std::size_t n = p.size() - 1;
    if (n == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 1; i < n; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) = -p[i] / p[n];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    const auto ev = solver.eigenvalues();
    std::vector<std::complex<double>> roots(n);
    for (std::size_t i = 0; i < n; ++i) roots[i] = ev(static_cast<Eigen::Index>(i));
    return roots;
}

// ---------------------------------------------------------------------------

/// Proper, stable rational transfer function num(s)/den(s) without free
/// integrators or differentiators.
class RationalTF {
public:
    RationalTF() : num_{1.0}, den_{1.0} {}

    RationalTF(Polynomial num, Polynomial den) : num_(poly_trim(std::move(num))), den_(poly_trim(std::move(den))) {
        if (num_.empty() || den_.empty()) throw validation_error("RationalTF: empty polynomial");
        for (double v : num_)
            if (!std::isfinite(v)) throw validation_error("RationalTF: non-finite numerator coefficient");
        for (double v : den_)
            if (!std::isfinite(v)) throw validation_error("RationalTF: non-finite denominator coefficient");
        if (num_.size() > den_.size()) throw validation_error("RationalTF: improper (deg num > deg den)");
        if (num_.front() == 0.0) throw validation_error("RationalTF: numerator has a free differentiator (zero constant term)");
        if (den_.front() == 0.0) throw validation_error("RationalTF: denominator has a free integrator (zero constant term)");
        for (const auto& r : poly_roots(den_)) {
            if (!(r.real() < 0.0))
                throw validation_error("RationalTF: unstable or marginal pole at s = " + std::to_string(r.real()) +
                                       (r.imag() >= 0 ? "+" : "") + std::to_string(r.imag()) + "j");
        }
    }

    const Polynomial& num() const noexcept { return num_; }
    const Polynomial& den() const noexcept { return den_; }

    double dc_gain() const noexcept { return num_.front() / den_.front(); }

    /// Limit of |H(jω)| for ω → ∞ (zero for strictly proper).
    double high_frequency_gain() const noexcept {
        return num_.size() == den_.size() ? num_.back() / den_.back() : 0.0;
    }

    friend bool operator==(const RationalTF&, const RationalTF&) = default;

private:
    Polynomial num_;
    Polynomial den_;
};

inline std::complex<double> freq_response(const RationalTF& tf, double omega) {
    if (!(omega >= 0.0)) throw validation_error("freq_response: omega must be >= 0");
    const std::complex<double> s{0.0, omega};
    return poly_eval(tf.num(), s) / poly_eval(tf.den(), s);
}

// ---------------------------------------------------------------------------

/// One (b s + 1)/(c s + 1) factor; time constants in seconds.
struct LeadLagStage {
    double b = 0.0;
    double c = 0.0;

    bool identity() const noexcept { return b == 0.0 && c == 0.0; }
    friend bool operator==(const LeadLagStage&, const LeadLagStage&) = default;
};

/// a * prod_k (b_k s + 1)/(c_k s + 1), a > 0, b_k, c_k >= 0, n >= 1.
class LeadLagShaper {
public:
    LeadLagShaper() : a_(1.0), stages_{LeadLagStage{}} {}

    LeadLagShaper(double a, std::vector<LeadLagStage> stages) : a_(a), stages_(std::move(stages)) {
        if (!(a_ > 0.0) || !std::isfinite(a_)) throw validation_error("LeadLagShaper: gain a must be > 0");
        if (stages_.empty()) throw validation_error("LeadLagShaper: at least one stage required");
        for (std::size_t k = 0; k < stages_.size(); ++k) {
            const auto& st = stages_[k];
            if (!(st.b >= 0.0) || !(st.c >= 0.0) || !std::isfinite(st.b) || !std::isfinite(st.c))
                throw validation_error("LeadLagShaper: stage " + std::to_string(k) + " needs b, c >= 0");
        }
    }

    double a() const noexcept { return a_; }
    const std::vector<LeadLagStage>& stages() const noexcept { return stages_; }
    std::size_t order() const noexcept { return stages_.size(); }

    /// a * prod(b_k / c_k) over non-identity stages; only meaningful when proper.
    double high_frequency_gain() const {
        double g = a_;
        std::size_t nb = 0, nc = 0;
        for (const auto& st : stages_) {
            if (st.b > 0.0) { g *= st.b; ++nb; }
            if (st.c > 0.0) { g /= st.c; ++nc; }
        }
        return nb == nc ? g : 0.0;
    }

    friend bool operator==(const LeadLagShaper&, const LeadLagShaper&) = default;

private:
    double a_;
    std::vector<LeadLagStage> stages_;
};

/// Expands the product form into a RationalTF. DC gain is exactly a.
inline RationalTF shaper_to_tf(const LeadLagShaper& shaper) {
    std::size_t nb = 0, nc = 0;
    for (const auto& st : shaper.stages()) {
        nb += st.b > 0.0;
        nc += st.c > 0.0;
    }
    if (nb > nc)
        throw validation_error("shaper_to_tf: stages with c = 0 and b > 0 make the product improper");
    Polynomial num{shaper.a()};
    Polynomial den{1.0};
    for (const auto& st : shaper.stages()) {
        if (st.b > 0.0) num = poly_mul(num, {1.0, st.b});
        if (st.c > 0.0) den = poly_mul(den, {1.0, st.c});
    }
    return RationalTF(std::move(num), std::move(den));
}

/// Log-spaced grid of `count` points in [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo)) throw validation_error("log_grid: need 0 < lo <= hi");
    if (count == 0) return {};
    if (count == 1) return {lo};
    std::vector<double> g(count);
    const double l0 = std::log(lo), l1 = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(count - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

}  // namespace sfe
