#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "sfe/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Interactive force estimation: simulation, estimation, identification, frequency response"};
    app.require_subcommand(1);
    app.fallthrough();

    sfe::GlobalOptions g;
    std::uint64_t seed = 0;
    app.add_option("--out,-o", g.out, "Output file");
    auto* seed_opt = app.add_option("--seed-override", seed, "Replace sampling.seed of the scenario");
    app.add_flag("--quiet,-q", g.quiet, "Suppress summary output");

    std::string scenario;
    auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write the dataset CSV");
    sim->add_option("scenario", scenario, "Scenario JSON")->required();

    sfe::EstimateOptions est;
    double est_L = 0.0;
    auto* estc = app.add_subcommand("estimate", "Estimate the interactive force from a dataset");
    estc->add_option("dataset", est.dataset, "Dataset CSV")->required();
    estc->add_option("--config,-c", est.config, "Scenario JSON with the estimator block")->required();
    auto* est_L_opt = estc->add_option("--L", est_L, "Override the differentiator bound L");
    estc->add_flag("--plots", est.emit_plots, "Write an SVG overlay of estimate and reference");
    estc->add_option("--plot", est.plot_path, "SVG path (default: <out>.svg)");

    sfe::IdentifyOptions id;
    double id_L = 0.0, id_m = 0.0;
    auto* idc = app.add_subcommand("identify", "Identify L or the coupling shaper with friction");
    idc->add_option("dataset", id.dataset, "Dataset CSV")->required();
    idc->add_option("--mode", id.mode, "L or shaper")->check(CLI::IsMember({"L", "shaper"}))->default_val("L");
    idc->add_option("--config,-c", id.config, "Scenario JSON (initial guess, m, L)");
    idc->add_option("--grid-min", id.grid_min, "Smallest L")->default_val(0.5);
    idc->add_option("--grid-max", id.grid_max, "Largest L")->default_val(50.0);
    idc->add_option("--grid-points", id.grid_points, "Log-spaced grid size")->default_val(30);
    idc->add_option("--grid", id.grid, "Explicit L grid")->delimiter(',');
    idc->add_option("--skip", id.skip, "Transient window excluded from the SSE, s")->default_val(1.0);
    idc->add_option("--curve", id.curve_path, "L-curve CSV (default: <out>_curve.csv)");
    idc->add_option("--init", id.init, "Initial {a, stages, gamma}, inline JSON or path");
    idc->add_option("--budget", id.budget, "Objective evaluation budget")->default_val(4000);
    auto* id_L_opt = idc->add_option("--L", id_L, "Differentiator bound for shaper mode");
    auto* id_m_opt = idc->add_option("--m", id_m, "Nominal mass for shaper mode");

    sfe::FreqrespOptions fr;
    auto* frc = app.add_subcommand("freqresp", "Frequency response of a shaper or transfer function");
    frc->add_option("spec", fr.spec, "Shaper {a, stages[, m, dt]} or {num, den[, dt]}, inline JSON or path")->required();
    frc->add_option("--omega-min", fr.omega_min, "rad/s")->default_val(0.1);
    frc->add_option("--omega-max", fr.omega_max, "rad/s")->default_val(1e5);
    frc->add_option("--points", fr.points, "Log grid size")->default_val(200);
    frc->add_flag("--inverse", fr.inverse, "Use m * shaper^-1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(sfe::ErrorKind::Parse);
    }
    if (*seed_opt) g.seed_override = seed;

    if (*sim) return sfe::run_simulate(scenario, g, std::cout, std::cerr);
    if (*estc) {
        if (*est_L_opt) est.L = est_L;
        return sfe::run_estimate(est, g, std::cout, std::cerr);
    }
    if (*idc) {
        if (*id_L_opt) id.L = id_L;
        if (*id_m_opt) id.m = id_m;
        return sfe::run_identify(id, g, std::cout, std::cerr);
    }
    return sfe::run_freqresp(fr, g, std::cout, std::cerr);
}
