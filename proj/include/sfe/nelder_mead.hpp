#pragma once

// Derivative-free simplex minimizer. Non-finite objective values are treated
// as +inf, so constraints can be expressed by rejecting points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "sfe/error.hpp"

namespace sfe {

struct NelderMeadOptions {
    std::size_t max_evaluations = 4000;
    double ftol_rel = 1e-8;   // spread of simplex values relative to |f_best|
    double xtol = 1e-10;      // simplex diameter
    double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

template <class F>
NelderMeadResult nelder_mead(F&& f, const std::vector<double>& x0, const std::vector<double>& step,
                             const NelderMeadOptions& opts = {}) {
    const std::size_t n = x0.size();
    if (n == 0) throw validation_error("nelder_mead: empty parameter vector");
    if (step.size() != n) throw validation_error("nelder_mead: step size mismatch");
    if (opts.max_evaluations == 0) throw validation_error("nelder_mead: max_evaluations must be > 0");

    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    auto budget_left = [&] { return res.evaluations < opts.max_evaluations; };

    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> val(n + 1, std::numeric_limits<double>::infinity());
    val[0] = eval(x0);
    for (std::size_t i = 0; i < n && budget_left(); ++i) {
        pts[i + 1][i] += step[i];
        val[i + 1] = eval(pts[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    auto sort = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    };
    auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
        std::vector<double> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = c[j] + t * (w[j] - c[j]);
        return out;
    };

    while (true) {
        sort();
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
        const double spread = val[worst] - val[best];
        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(pts[i][j] - pts[best][j]));
        if ((std::isfinite(spread) && spread <= opts.ftol_rel * std::abs(val[best])) || diameter <= opts.xtol) {
            res.converged = true;
            break;
        }
        if (!budget_left()) break;
        ++res.iterations;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
        }

        const auto xr = along(centroid, pts[worst], -opts.reflect);
        const double fr = eval(xr);
        if (fr < val[best]) {
            if (!budget_left()) { pts[worst] = xr; val[worst] = fr; break; }
            const auto xe = along(centroid, pts[worst], -opts.reflect * opts.expand);
            const double fe = eval(xe);
            if (fe < fr) { pts[worst] = xe; val[worst] = fe; }
            else { pts[worst] = xr; val[worst] = fr; }
            continue;
        }
        if (fr < val[second]) {
            pts[worst] = xr;
            val[worst] = fr;
            continue;
        }
        if (!budget_left()) break;
        const bool outside = fr < val[worst];
        const auto xc = outside ? along(centroid, xr, opts.contract) : along(centroid, pts[worst], opts.contract);
        const double fc = eval(xc);
        if (fc < (outside ? fr : val[worst])) {
            pts[worst] = xc;
            val[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n && budget_left(); ++i) {
            if (i == best) continue;
            pts[i] = along(pts[best], pts[i], opts.shrink);
            val[i] = eval(pts[i]);
        }
    }

    sort();
    res.x = pts[order.front()];
    res.fx = val[order.front()];
    return res;
}

}  // namespace sfe
