#pragma once

// Command implementations behind the CLI. Each returns a process exit status
// so that harnesses can drive them in-process.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/filter.hpp"
#include "sfe/identification.hpp"
#include "sfe/io.hpp"
#include "sfe/plant.hpp"
#include "sfe/plot.hpp"
#include "sfe/signal.hpp"

namespace sfe {

struct GlobalOptions {
    std::string out;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
};

struct EstimateOptions {
    std::string dataset;
    std::string config;           // scenario JSON; its estimator block (plant block for defaults)
    std::optional<double> L;      // overrides estimator.L
    bool emit_plots = false;
    std::string plot_path;        // default: out with .svg extension
};

struct IdentifyOptions {
    std::string mode = "L";       // L or shaper
    std::string dataset;
    std::string config;           // scenario JSON, optional
    double grid_min = 0.5, grid_max = 50.0;
    std::size_t grid_points = 30;
    std::vector<double> grid;     // explicit grid; overrides min/max/points
    double skip = 1.0;
    std::string curve_path;       // default: out stem + "_curve.csv"
    std::string init;             // shaper mode: {a, stages, gamma}, inline or path
    std::size_t budget = 4000;
    std::optional<double> L;
    std::optional<double> m;
};

struct FreqrespOptions {
    std::string spec;             // shaper {a, stages[, m, dt]} or tf {num, den}; inline or path
    double omega_min = 0.1, omega_max = 1e5;
    std::size_t points = 200;
    bool inverse = false;         // plot m * shaper^-1 instead of the shaper
};

namespace detail {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_status();
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Parse);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Numerical);
    }
}

inline void require_out(const GlobalOptions& g) {
    if (g.out.empty()) throw parse_error("--out is required");
}

inline std::string with_suffix(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

inline json load_json_arg(const std::string& arg) {
    const auto first = arg.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && arg[first] == '{') return parse_json_text(arg, "inline json");
    return parse_json_text(read_file(arg), arg);
}

inline double peak_abs(const std::vector<double>& v) {
    double p = 0.0;
    for (double x : v) p = std::max(p, std::abs(x));
    return p;
}

}  // namespace detail

inline int run_simulate(const std::string& scenario_path, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        detail::require_out(g);
        Scenario sc = read_scenario(scenario_path);
        if (g.seed_override) sc.sampling.seed = *g.seed_override;
        const Dataset ds = simulate(sc.plant, sc.control, sc.load, sc.sampling);
        write_dataset_csv(g.out, ds);
        if (!g.quiet) {
            out << "rows " << ds.size() << "\n";
            out << "duration_s " << format_number(static_cast<double>(ds.size()) * ds.dt) << "\n";
            out << "peak_f2_N " << format_number(detail::peak_abs(*ds.f2_ref)) << "\n";
            out << "peak_velocity_m_s " << format_number(detail::peak_abs(*ds.v_true)) << "\n";
        }
        return 0;
    });
}

inline int run_estimate(const EstimateOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        detail::require_out(g);
        const Scenario sc = read_scenario(o.config);
        const EstimatorConfig cfg = sc.estimator_config(o.L);
        const Dataset ds = read_dataset_csv(o.dataset);
        const ForceEstimate est = estimate_force(ds, cfg);
        const auto& d = est.diagnostics;

        std::vector<std::pair<std::string, TimeSeries>> cols{
            {"f2_hat", est.f2_hat}, {"e", d.e}, {"x2_hat", d.x2_hat}, {"chi", d.chi}, {"f_nominal", d.f_nominal}};
        if (ds.f2_ref) cols.emplace_back("f2_ref", ds.channel("f2_ref"));
        write_file(g.out, to_csv(series_table(cols)));

        if (o.emit_plots) {
            std::vector<PlotSeries> series{{"estimated F2", est.f2_hat, "#d62728"}};
            if (ds.f2_ref) series.insert(series.begin(), PlotSeries{"reference F2", ds.channel("f2_ref"), "#1f77b4"});
            const std::string path = o.plot_path.empty() ? detail::with_suffix(g.out, ".svg") : o.plot_path;
            write_file(path, overlay_svg(series, "Estimated versus reference force", "t [s]", "F2 [N]"));
        }

        for (const auto& w : d.warnings) err << "warning: " << w << '\n';
        if (!g.quiet) {
            out << "converged " << (d.convergence.converged ? "yes" : "no") << " at_s " << format_number(d.convergence.time)
                << "\n";
            out << "transient_skip_s " << format_number(d.skip_time) << "\n";
            if (ds.f2_ref) {
                const auto m = force_metrics(est.f2_hat, ds.channel("f2_ref"), d.skip_time);
                out << "rmse_N " << format_number(m.rmse) << " (" << format_number(100.0 * m.rmse / m.peak_reference)
                    << "% of peak " << format_number(m.peak_reference) << ")\n";
                out << "peak_error_N " << format_number(m.peak_error) << "\n";
            }
        }
        return 0;
    });
}

inline int run_identify(const IdentifyOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        detail::require_out(g);
        std::optional<Scenario> sc;
        if (!o.config.empty()) sc = read_scenario(o.config);

        if (o.mode == "L") {
            std::vector<double> grid = o.grid;
            if (grid.empty() && o.grid_points > 0) grid = log_grid(o.grid_min, o.grid_max, o.grid_points);
            const Dataset ds = read_dataset_csv(o.dataset);
            const FitReport rep = identify_L(ds, grid, LSweepOptions{o.skip, true});
            write_file(g.out, to_json(rep).dump(2) + "\n");
            write_file(o.curve_path.empty() ? detail::with_suffix(g.out, "_curve.csv") : o.curve_path,
                       to_csv(l_curve_table(rep)));
            if (!g.quiet) out << "L " << format_number(rep.optimum[0]) << " sse " << format_number(rep.objective) << "\n";
            return 0;
        }
        if (o.mode != "shaper") throw parse_error("--mode must be L or shaper");

        ShaperFriction init;
        if (!o.init.empty()) {
            init = shaper_friction_from_json(detail::load_json_arg(o.init));
        } else if (sc) {
            init.coupling = sc->estimator.coupling.value_or(sc->plant.coupling);
            init.gamma = sc->estimator.gamma.value_or(sc->plant.gamma);
        } else {
            throw validation_error("shaper mode needs --init or --config for the initial guess");
        }
        ShaperFitOptions fo;
        const auto L = o.L ? o.L : (sc ? sc->estimator.L : std::nullopt);
        if (!L) throw validation_error("shaper mode needs L (--L or estimator.L in --config)");
        fo.L = *L;
        fo.m = o.m.value_or(sc ? sc->estimator.m.value_or(sc->plant.m) : fo.m);
        if (sc) fo.fir_cutoff_hz = sc->estimator.fir_cutoff_hz;
        const Dataset ds = read_dataset_csv(o.dataset);
        if (!ds.f2_ref) throw channel_error("dataset: missing channel 'f2_ref' (needed by shaper mode)");
        const FitReport rep = identify_shaper_friction(ds, init, o.budget, fo);
        write_file(g.out, to_json(rep).dump(2) + "\n");
        if (!rep.converged) err << "warning: simplex budget exhausted before convergence\n";
        if (!g.quiet) {
            for (std::size_t i = 0; i < rep.names.size(); ++i)
                out << rep.names[i] << " " << format_number(rep.optimum[i]) << "\n";
            out << "objective " << format_number(rep.objective) << " evaluations " << rep.evaluations << "\n";
        }
        return 0;
    });
}

inline int run_freqresp(const FreqrespOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        detail::require_out(g);
        if (!(o.omega_min > 0.0) || !(o.omega_max > o.omega_min) || o.points < 2)
            throw validation_error("freqresp: need 0 < omega-min < omega-max and at least 2 points");
        const json spec = detail::load_json_arg(o.spec);
        if (!spec.is_object()) throw parse_error("freqresp: spec must be a JSON object");

        RationalTF tf;
        double hf = 0.0;
        std::optional<DiscreteFilter> discrete;
        if (spec.contains("num") || spec.contains("den")) {
            JsonBlock b(spec, "tf");
            Polynomial num, den;
            b.get("num", num);
            b.get("den", den);
            std::optional<double> dt;
            b.get("dt", dt);
            b.finish();
            tf = RationalTF(num, den);
            hf = tf.high_frequency_gain();
            if (dt) discrete = discretize(tf, *dt);
        } else {
            JsonBlock b(spec, "shaper");
            LeadLagShaper shaper = shaper_fields(b, "shaper");
            std::optional<double> m, dt;
            b.get("m", m);
            b.get("dt", dt);
            b.finish();
            if (o.inverse) shaper = invert_shaper(shaper, m.value_or(1.0));
            tf = shaper_to_tf(shaper);
            hf = shaper.high_frequency_gain();
            if (dt) discrete = discretize(shaper, *dt);
        }

        Table t;
        std::vector<double> w = log_grid(o.omega_min, o.omega_max, o.points), mag, ph, dmag, dph;
        for (double omega : w) {
            const auto h = freq_response(tf, omega);
            mag.push_back(std::abs(h));
            ph.push_back(std::arg(h) * 180.0 / std::numbers::pi);
            if (discrete) {
                // zero above Nyquist, where the discrete response is not defined
                const bool below = omega < std::numbers::pi / discrete->dt();
                const auto hd = below ? discrete->response(omega) : std::complex<double>{};
                dmag.push_back(std::abs(hd));
                dph.push_back(below ? std::arg(hd) * 180.0 / std::numbers::pi : 0.0);
            }
        }
        t.add("omega", std::move(w));
        t.add("magnitude", std::move(mag));
        t.add("phase_deg", std::move(ph));
        if (discrete) {
            t.add("discrete_magnitude", std::move(dmag));
            t.add("discrete_phase_deg", std::move(dph));
        }
        write_file(g.out, to_csv(t));
        if (!g.quiet) {
            out << "dc_gain " << format_number(tf.dc_gain()) << "\n";
            out << "hf_gain " << format_number(hf) << "\n";
        }
        return 0;
    });
}

}  // namespace sfe
