#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sfe/io.hpp"
#include "sfe/plant.hpp"
#include "sfe/signal.hpp"

namespace sfe::test {

inline std::string source_path(const std::string& rel) { return std::string(SFE_SOURCE_DIR) + "/" + rel; }

inline Scenario default_scenario() { return read_scenario(source_path("scenarios/paper-default.json")); }

inline Dataset simulate(const Scenario& sc) { return sfe::simulate(sc.plant, sc.control, sc.load, sc.sampling); }

inline TimeSeries sampled(double dt, std::size_t n, auto&& f) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = f(static_cast<double>(k) * dt);
    return TimeSeries(dt, std::move(v));
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace sfe::test
