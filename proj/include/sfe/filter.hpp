#pragma once

// Bilinear discretization of lead-lag shapers and rational transfer
// functions into cascades of second-order sections, plus shaper inversion.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/signal.hpp"

namespace sfe {

/// One section in z^-1: (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Section {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    double dc_gain() const noexcept { return (b0 + b1 + b2) / (1.0 + a1 + a2); }

    std::complex<double> response(std::complex<double> zinv) const noexcept {
        return (b0 + zinv * (b1 + zinv * b2)) / (1.0 + zinv * (a1 + zinv * a2));
    }

    /// Poles of z^2 + a1 z + a2 inside the unit circle.
    bool stable() const noexcept {
        if (a2 == 0.0) return std::abs(a1) < 1.0;
        const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2, 0.0));
        return std::abs((-a1 + disc) / 2.0) < 1.0 && std::abs((-a1 - disc) / 2.0) < 1.0;
    }
};

/// Cascade of sections with a scalar gain and per-section delay registers.
/// Holds mutable state; one owner per filtering pass.
class DiscreteFilter {
public:
    DiscreteFilter() = default;

    DiscreteFilter(double gain, std::vector<Section> sections, double dt)
        : gain_(gain), sections_(std::move(sections)), dt_(dt), state_(sections_.size()) {
        if (!(dt_ > 0.0)) throw validation_error("DiscreteFilter: dt must be > 0");
        if (!std::isfinite(gain_)) throw validation_error("DiscreteFilter: gain must be finite");
        for (std::size_t i = 0; i < sections_.size(); ++i) {
            if (!sections_[i].stable())
                throw numerical_error("DiscreteFilter: section " + std::to_string(i) + " has a pole on or outside the unit circle");
        }
    }

    double dt() const noexcept { return dt_; }
    double gain() const noexcept { return gain_; }
    const std::vector<Section>& sections() const noexcept { return sections_; }

    double dc_gain() const noexcept {
        double g = gain_;
        for (const auto& s : sections_) g *= s.dc_gain();
        return g;
    }

    /// H(e^{jωdt}).
    std::complex<double> response(double omega) const {
        const std::complex<double> zinv = std::polar(1.0, -omega * dt_);
        std::complex<double> h{gain_, 0.0};
        for (const auto& s : sections_) h *= s.response(zinv);
        return h;
    }

    void reset() noexcept {
        for (auto& st : state_) st = {};
    }

    /// Sets the delay registers to the steady state for a constant input.
    void settle(double input) noexcept {
        double u = gain_ * input;
        for (std::size_t i = 0; i < sections_.size(); ++i) {
            const auto& s = sections_[i];
            const double y = s.dc_gain() * u;
            state_[i].s2 = s.b2 * u - s.a2 * y;
            state_[i].s1 = s.b1 * u - s.a1 * y + state_[i].s2;
            u = y;
        }
    }

    double step(double x) noexcept {
        double y = gain_ * x;
        for (std::size_t i = 0; i < sections_.size(); ++i) {
            const auto& s = sections_[i];
            auto& st = state_[i];
            const double out = s.b0 * y + st.s1;
            st.s1 = s.b1 * y - s.a1 * out + st.s2;
            st.s2 = s.b2 * y - s.a2 * out;
            y = out;
        }
        return y;
    }

private:
    struct Registers {
        double s1 = 0.0, s2 = 0.0;
    };

    double gain_ = 1.0;
    std::vector<Section> sections_;
    double dt_ = 1e-3;
    std::vector<Registers> state_;
};

/// G(s) = m * shaper^-1(s): swaps b_k and c_k and scales the gain to m/a.
inline LeadLagShaper invert_shaper(const LeadLagShaper& shaper, double m) {
    if (!(m > 0.0) || !std::isfinite(m)) throw validation_error("invert_shaper: mass must be > 0");
    std::vector<LeadLagStage> inv;
    inv.reserve(shaper.order());
    for (std::size_t k = 0; k < shaper.order(); ++k) {
        const auto& st = shaper.stages()[k];
        if (st.b == 0.0 && st.c > 0.0)
            throw validation_error("invert_shaper: stage " + std::to_string(k) + " has b = 0 and c = " +
                                   std::to_string(st.c) + "; its inverse would be improper");
        inv.push_back({st.c, st.b});
    }
    return LeadLagShaper(m / shaper.a(), std::move(inv));
}

namespace detail {

// A factor of the form 1 + p1 s (+ p2 s^2), i.e. a Polynomial of size 2 or 3
// with unit constant term.
using SFactor = Polynomial;

inline Polynomial poly_pow_1pw(std::size_t n, double sign_w) {
    Polynomial p{1.0};
    for (std::size_t i = 0; i < n; ++i) p = poly_mul(p, {1.0, sign_w});
    return p;
}

// Bilinear image of q(s) times (1 + w)^deg q, as a polynomial in w = z^-1.
inline Polynomial bilinear_factor(const SFactor& q, double dt) {
    const double K = 2.0 / dt;
    const std::size_t d = q.size() - 1;
    Polynomial out(d + 1, 0.0);
    double kp = 1.0;
    for (std::size_t i = 0; i <= d; ++i) {
        const Polynomial term = poly_mul(poly_pow_1pw(i, -1.0), poly_pow_1pw(d - i, 1.0));
        for (std::size_t j = 0; j < term.size(); ++j) out[j] += q[i] * kp * term[j];
        kp *= K;
    }
    return out;
}

inline double corner_frequency(const SFactor& q) {
    return q.size() == 2 ? 1.0 / q[1] : 1.0 / std::sqrt(q[2]);
}

inline DiscreteFilter discretize_factors(double gain, const std::vector<SFactor>& zeros,
                                         const std::vector<SFactor>& poles, double dt) {
    if (!(dt > 0.0)) throw validation_error("discretize: dt must be > 0");
    const double nyquist = std::numbers::pi / dt;
    std::size_t zdeg = 0, pdeg = 0;
    for (const auto& z : zeros) zdeg += z.size() - 1;
    for (const auto& p : poles) {
        pdeg += p.size() - 1;
        const double wc = corner_frequency(p);
        if (!(wc < nyquist))
            throw validation_error("discretize: pole corner frequency " + std::to_string(wc) +
                                   " rad/s is at or above Nyquist " + std::to_string(nyquist) + " rad/s");
    }
    if (zdeg > pdeg) throw validation_error("discretize: improper transfer function");

    std::vector<Polynomial> num, den;
    for (const auto& z : zeros) num.push_back(bilinear_factor(z, dt));
    for (std::size_t i = 0; i < pdeg - zdeg; ++i) num.push_back({1.0, 1.0});
    for (const auto& p : poles) den.push_back(bilinear_factor(p, dt));
    // Real poles stay first order: pairing two poles near z = 1 into one
    // quadratic loses DC accuracy to cancellation in 1 + a1 + a2.

    std::vector<Section> sections(std::max(num.size(), den.size()));
    for (std::size_t i = 0; i < sections.size(); ++i) {
        Polynomial n = i < num.size() ? num[i] : Polynomial{1.0};
        Polynomial d = i < den.size() ? den[i] : Polynomial{1.0};
        n.resize(3, 0.0);
        d.resize(3, 0.0);
        sections[i] = Section{n[0] / d[0], n[1] / d[0], n[2] / d[0], d[1] / d[0], d[2] / d[0]};
    }
    return DiscreteFilter(gain, std::move(sections), dt);
}

}  // namespace detail

/// Bilinear (Tustin) discretization of a lead-lag shaper, factor by factor.
inline DiscreteFilter discretize(const LeadLagShaper& shaper, double dt) {
    std::vector<detail::SFactor> zeros, poles;
    for (const auto& st : shaper.stages()) {
        if (st.b > 0.0) zeros.push_back({1.0, st.b});
        if (st.c > 0.0) poles.push_back({1.0, st.c});
    }
    return detail::discretize_factors(shaper.a(), zeros, poles, dt);
}

/// Bilinear discretization of a general RationalTF via its roots.
inline DiscreteFilter discretize(const RationalTF& tf, double dt) {
    auto factors = [](const Polynomial& p) {
        std::vector<detail::SFactor> out;
        for (const auto& r : poly_roots(p)) {
            const double mag = std::abs(r);
            if (std::abs(r.imag()) <= 1e-9 * mag) {
                out.push_back({1.0, -1.0 / r.real()});
            } else if (r.imag() > 0.0) {
                out.push_back({1.0, -2.0 * r.real() / (mag * mag), 1.0 / (mag * mag)});
            }
        }
        return out;
    };
    return detail::discretize_factors(tf.dc_gain(), factors(tf.num()), factors(tf.den()), dt);
}

/// Causal filtering from zero initial state.
inline TimeSeries apply_filter(const DiscreteFilter& filter, const TimeSeries& x) {
    if (!same_dt(filter.dt(), x.dt()))
        throw validation_error("apply_filter: filter dt " + std::to_string(filter.dt()) + " != signal dt " +
                               std::to_string(x.dt()));
    DiscreteFilter f = filter;
    f.reset();
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = f.step(x[k]);
    return TimeSeries(x.dt(), std::move(y));
}

/// The g-filter configuration: coupling shaper, mass, and sampling period.
struct FilterSpec {
    LeadLagShaper shaper;
    double m = 1.0;
    double dt = 1e-3;

    LeadLagShaper inverse() const { return invert_shaper(shaper, m); }
    DiscreteFilter g_filter() const { return discretize(inverse(), dt); }

    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

}  // namespace sfe
