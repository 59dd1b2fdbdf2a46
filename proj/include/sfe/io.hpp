#pragma once

// CSV and JSON serialization: datasets, time series, scenarios, filter
// specifications and fit reports.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sfe/error.hpp"
#include "sfe/filter.hpp"
#include "sfe/identification.hpp"
#include "sfe/plant.hpp"
#include "sfe/signal.hpp"

namespace sfe {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Named columns sharing one row count; `t` is written first.
struct Table {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    void add(std::string name, std::vector<double> values) {
        names.push_back(std::move(name));
        columns.push_back(std::move(values));
    }

    const std::vector<double>* find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return &columns[i];
        return nullptr;
    }

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

inline std::string to_csv(const Table& table) {
    for (const auto& c : table.columns)
        if (c.size() != table.rows()) throw channel_error("csv: columns differ in length");
    std::string out;
    for (std::size_t i = 0; i < table.names.size(); ++i) out += (i ? "," : "") + table.names[i];
    out += '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            if (i) out += ',';
            out += format_number(table.columns[i][r]);
        }
        out += '\n';
    }
    return out;
}

inline Table parse_csv(const std::string& text, const std::string& source = "csv") {
    std::istringstream in(text);
    std::string line;
    Table table;
    if (!std::getline(in, line)) throw parse_error(source + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::istringstream hs(line);
        std::string name;
        while (std::getline(hs, name, ',')) {
            if (name.empty()) throw parse_error(source + ": empty column name in header");
            for (const auto& n : table.names)
                if (n == name) throw parse_error(source + ": duplicate column '" + name + "'");
            table.names.push_back(name);
        }
    }
    if (table.names.empty()) throw parse_error(source + ": missing header row");
    table.columns.resize(table.names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col >= table.names.size())
                throw parse_error(source + ": line " + std::to_string(row) + " has too many fields");
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cell.size())
                throw parse_error(source + ": line " + std::to_string(row) + ", column '" + table.names[col] +
                                  "': not a number: '" + cell + "'");
            table.columns[col++].push_back(v);
        }
        if (col != table.names.size())
            throw parse_error(source + ": line " + std::to_string(row) + " has " + std::to_string(col) + " fields, expected " +
                              std::to_string(table.names.size()));
    }
    return table;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw channel_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw channel_error("cannot write '" + path + "'");
    f << content;
    if (!f) throw channel_error("write failed for '" + path + "'");
}

/// Uniform sampling period from a time column, rounded to 9 significant digits.
inline double infer_dt(const std::vector<double>& t, const std::string& source) {
    if (t.size() < 2) throw validation_error(source + ": need at least 2 rows to infer dt");
    const double dt = std::stod(format_number((t.back() - t.front()) / static_cast<double>(t.size() - 1)));
    if (!(dt > 0.0)) throw validation_error(source + ": time column must be increasing");
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double step = t[k] - t[k - 1];
        if (std::abs(step - dt) > 1e-3 * dt)
            throw validation_error(source + ": non-uniform sampling at row " + std::to_string(k + 1));
    }
    return dt;
}

inline Table dataset_table(const Dataset& ds) {
    Table t;
    t.add("t", ds.t);
    t.add("u", ds.u);
    t.add("sigma_meas", ds.sigma_meas);
    if (ds.sigma_true) t.add("sigma_true", *ds.sigma_true);
    if (ds.v_true) t.add("v_true", *ds.v_true);
    if (ds.f2_ref) t.add("f2_ref", *ds.f2_ref);
    if (ds.xi_true) t.add("xi_true", *ds.xi_true);
    return t;
}

/// Reads the dataset channels from a table; unrelated columns are ignored.
inline Dataset dataset_from_table(const Table& table, const std::string& source = "dataset") {
    if (table.names.empty() || table.names.front() != "t") throw channel_error(source + ": first column must be 't'");
    Dataset ds;
    ds.t = *table.find("t");
    ds.dt = infer_dt(ds.t, source);
    if (const auto* c = table.find("u")) ds.u = *c;
    if (const auto* c = table.find("sigma_meas")) ds.sigma_meas = *c;
    auto opt = [&](const char* name, std::optional<std::vector<double>>& dst) {
        if (const auto* c = table.find(name)) dst = *c;
    };
    opt("sigma_true", ds.sigma_true);
    opt("v_true", ds.v_true);
    opt("f2_ref", ds.f2_ref);
    opt("xi_true", ds.xi_true);
    for (const auto& col : table.columns)
        for (double v : col)
            if (!std::isfinite(v)) throw numerical_error(source + ": non-finite value");
    ds.validate();
    return ds;
}

inline void write_dataset_csv(const std::string& path, const Dataset& ds) { write_file(path, to_csv(dataset_table(ds))); }

inline Dataset read_dataset_csv(const std::string& path) { return dataset_from_table(parse_csv(read_file(path), path), path); }

/// Series with a shared dt as columns t, names...
inline Table series_table(const std::vector<std::pair<std::string, TimeSeries>>& series) {
    Table t;
    if (series.empty()) return t;
    const auto& first = series.front().second;
    std::vector<double> time(first.size());
    for (std::size_t k = 0; k < time.size(); ++k) time[k] = first.time(k);
    t.add("t", std::move(time));
    for (const auto& [name, s] : series) {
        if (s.size() != first.size() || !same_dt(s.dt(), first.dt()))
            throw channel_error("series '" + name + "' does not share the time base");
        t.add(name, s.vector());
    }
    return t;
}

inline TimeSeries series_from_table(const Table& table, const std::string& channel, const std::string& source = "csv") {
    if (table.names.empty() || table.names.front() != "t") throw channel_error(source + ": first column must be 't'");
    const auto* c = table.find(channel);
    if (!c) throw channel_error(source + ": missing channel '" + channel + "'");
    return TimeSeries(infer_dt(*table.find("t"), source), *c);
}

// ---------------------------------------------------------------------------
// JSON schema helpers

/// Reads keys from one JSON object and rejects any it did not consume.
class JsonBlock {
public:
    JsonBlock(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw parse_error(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).template get<T>();
        } catch (const json::exception& e) {
            throw parse_error(path_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    void get(const std::string& key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        get(key, v);
        out = v;
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw validation_error(path_ + ": unknown key '" + key + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error(source + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Shapers and filter specs

inline json to_json(const LeadLagShaper& s) {
    json stages = json::array();
    for (const auto& st : s.stages()) stages.push_back({{"b", st.b}, {"c", st.c}});
    return {{"a", s.a()}, {"stages", stages}};
}

inline std::vector<LeadLagStage> stages_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw parse_error(path + ": expected an array");
    std::vector<LeadLagStage> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        JsonBlock b(j[i], path + "[" + std::to_string(i) + "]");
        LeadLagStage st;
        b.get("b", st.b);
        b.get("c", st.c);
        b.finish();
        out.push_back(st);
    }
    return out;
}

/// Reads a and stages from a block that may carry other keys.
inline LeadLagShaper shaper_fields(JsonBlock& b, const std::string& path) {
    double a = 1.0;
    b.get("a", a);
    const json* st = b.child("stages");
    if (!st) throw validation_error(path + ": missing 'stages'");
    return LeadLagShaper(a, stages_from_json(*st, path + ".stages"));
}

inline LeadLagShaper shaper_from_json(const json& j, const std::string& path = "shaper") {
    JsonBlock b(j, path);
    auto s = shaper_fields(b, path);
    b.finish();
    return s;
}

inline json to_json(const FilterSpec& f) {
    json j = to_json(f.shaper);
    j["m"] = f.m;
    j["dt"] = f.dt;
    return j;
}

inline FilterSpec filter_spec_from_json(const json& j, const std::string& path = "filter") {
    JsonBlock b(j, path);
    FilterSpec f;
    f.shaper = shaper_fields(b, path);
    b.get("m", f.m);
    b.get("dt", f.dt);
    b.finish();
    if (!(f.m > 0.0)) throw validation_error(path + ".m must be > 0");
    if (!(f.dt > 0.0)) throw validation_error(path + ".dt must be > 0");
    return f;
}

// ---------------------------------------------------------------------------
// Scenario

struct EstimatorSettings {
    std::optional<double> L;
    std::optional<double> m, gamma;
    std::optional<LeadLagShaper> coupling;
    std::optional<double> fir_cutoff_hz, transient_skip, convergence_threshold;
    double convergence_dwell = 0.2;
};

struct Scenario {
    PlantParams plant;
    LoadProfile load;
    ControlLaw control;
    SamplingConfig sampling;
    EstimatorSettings estimator;

    void validate() const {
        plant.validate();
        load.validate();
        sampling.validate();
        control.validate_for(plant.m, sampling.dt);
    }

    /// Estimator configuration; unset plant-model entries default to the plant block.
    EstimatorConfig estimator_config(std::optional<double> L_override = std::nullopt) const {
        const auto L = L_override ? L_override : estimator.L;
        if (!L) throw validation_error("estimator.L is required (or pass --L)");
        EstimatorConfig c;
        c.gains = gains_from_L(*L);
        c.m = estimator.m.value_or(plant.m);
        c.gamma = estimator.gamma.value_or(plant.gamma);
        c.coupling = estimator.coupling.value_or(plant.coupling);
        c.fir_cutoff_hz = estimator.fir_cutoff_hz;
        c.transient_skip = estimator.transient_skip;
        c.convergence_threshold = estimator.convergence_threshold;
        c.convergence_dwell = estimator.convergence_dwell;
        c.validate();
        return c;
    }
};

inline Waveform waveform_from_json(const json& j, const std::string& path) {
    JsonBlock b(j, path);
    Waveform w;
    b.get("offset", w.offset);
    b.get("rate", w.rate);
    if (const json* s = b.child("sines")) {
        if (!s->is_array()) throw parse_error(path + ".sines: expected an array");
        for (std::size_t i = 0; i < s->size(); ++i) {
            JsonBlock sb((*s)[i], path + ".sines[" + std::to_string(i) + "]");
            Waveform::Sine sine;
            sb.get("amplitude", sine.amplitude);
            sb.get("period", sine.period);
            sb.get("phase", sine.phase);
            sb.finish();
            w.sines.push_back(sine);
        }
    }
    b.finish();
    return w;
}

inline json to_json(const Waveform& w) {
    json sines = json::array();
    for (const auto& s : w.sines) sines.push_back({{"amplitude", s.amplitude}, {"period", s.period}, {"phase", s.phase}});
    return {{"offset", w.offset}, {"rate", w.rate}, {"sines", sines}};
}

inline LoadKind load_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "saw") return LoadKind::Saw;
    if (s == "step") return LoadKind::Step;
    if (s == "sine") return LoadKind::Sine;
    if (s == "hold") return LoadKind::HoldSequence;
    throw validation_error(path + ": unknown load kind '" + s + "' (saw, step, sine, hold)");
}

inline std::string to_string(LoadKind k) {
    switch (k) {
        case LoadKind::Saw: return "saw";
        case LoadKind::Step: return "step";
        case LoadKind::Sine: return "sine";
        case LoadKind::HoldSequence: return "hold";
    }
    return "saw";
}

inline Scenario scenario_from_json(const json& j) {
    JsonBlock root(j, "scenario");
    Scenario sc;

    if (const json* p = root.child("plant")) {
        JsonBlock b(*p, "plant");
        b.get("m", sc.plant.m);
        b.get("gamma", sc.plant.gamma);
        b.get("noise_std", sc.plant.noise_std);
        if (const json* c = b.child("coupling")) sc.plant.coupling = shaper_from_json(*c, "plant.coupling");
        b.finish();
    }

    if (const json* l = root.child("load")) {
        JsonBlock b(*l, "load");
        std::string kind = "saw";
        b.get("kind", kind);
        sc.load.kind = load_kind_from_string(kind, "load.kind");
        b.get("amplitude", sc.load.amplitude);
        b.get("period", sc.load.period);
        b.get("offset", sc.load.offset);
        b.get("duty", sc.load.duty);
        b.get("onset", sc.load.onset);
        b.get("levels", sc.load.levels);
        b.get("dwell", sc.load.dwell);
        b.get("smoothing", sc.load.smoothing);
        b.get("sign", sc.load.sign);
        b.finish();
    }

    if (const json* c = root.child("control")) {
        JsonBlock b(*c, "control");
        std::string kind = "tracking", feedback = "true";
        b.get("kind", kind);
        if (kind == "tracking") sc.control.kind = ControlKind::Tracking;
        else if (kind == "open_loop") sc.control.kind = ControlKind::OpenLoop;
        else throw validation_error("control.kind: unknown '" + kind + "' (tracking, open_loop)");
        b.get("feedback", feedback);
        if (feedback == "true") sc.control.feedback = Feedback::True;
        else if (feedback == "measured") sc.control.feedback = Feedback::Measured;
        else throw validation_error("control.feedback: unknown '" + feedback + "' (true, measured)");
        b.get("kp", sc.control.kp);
        b.get("kd", sc.control.kd);
        if (const json* r = b.child("reference")) sc.control.reference = waveform_from_json(*r, "control.reference");
        if (const json* o = b.child("open_loop")) sc.control.open_loop = waveform_from_json(*o, "control.open_loop");
        b.finish();
    }

    if (const json* s = root.child("sampling")) {
        JsonBlock b(*s, "sampling");
        b.get("dt", sc.sampling.dt);
        b.get("duration", sc.sampling.duration);
        b.get("seed", sc.sampling.seed);
        b.finish();
    }

    if (const json* e = root.child("estimator")) {
        JsonBlock b(*e, "estimator");
        b.get("L", sc.estimator.L);
        b.get("m", sc.estimator.m);
        b.get("gamma", sc.estimator.gamma);
        if (const json* c = b.child("coupling")) sc.estimator.coupling = shaper_from_json(*c, "estimator.coupling");
        b.get("fir_cutoff_hz", sc.estimator.fir_cutoff_hz);
        b.get("transient_skip", sc.estimator.transient_skip);
        b.get("convergence_threshold", sc.estimator.convergence_threshold);
        b.get("convergence_dwell", sc.estimator.convergence_dwell);
        b.finish();
    }
    root.finish();
    sc.validate();
    return sc;
}

inline json to_json(const Scenario& sc) {
    json j;
    j["plant"] = {{"m", sc.plant.m}, {"gamma", sc.plant.gamma}, {"coupling", to_json(sc.plant.coupling)},
                  {"noise_std", sc.plant.noise_std}};
    j["load"] = {{"kind", to_string(sc.load.kind)}, {"amplitude", sc.load.amplitude}, {"period", sc.load.period},
                 {"offset", sc.load.offset},        {"duty", sc.load.duty},           {"onset", sc.load.onset},
                 {"levels", sc.load.levels},        {"dwell", sc.load.dwell},         {"smoothing", sc.load.smoothing},
                 {"sign", sc.load.sign}};
    j["control"] = {{"kind", sc.control.kind == ControlKind::Tracking ? "tracking" : "open_loop"},
                    {"feedback", sc.control.feedback == Feedback::True ? "true" : "measured"},
                    {"kp", sc.control.kp},
                    {"kd", sc.control.kd},
                    {"reference", to_json(sc.control.reference)},
                    {"open_loop", to_json(sc.control.open_loop)}};
    j["sampling"] = {{"dt", sc.sampling.dt}, {"duration", sc.sampling.duration}, {"seed", sc.sampling.seed}};
    json e = json::object();
    const auto& es = sc.estimator;
    if (es.L) e["L"] = *es.L;
    if (es.m) e["m"] = *es.m;
    if (es.gamma) e["gamma"] = *es.gamma;
    if (es.coupling) e["coupling"] = to_json(*es.coupling);
    if (es.fir_cutoff_hz) e["fir_cutoff_hz"] = *es.fir_cutoff_hz;
    if (es.transient_skip) e["transient_skip"] = *es.transient_skip;
    if (es.convergence_threshold) e["convergence_threshold"] = *es.convergence_threshold;
    e["convergence_dwell"] = es.convergence_dwell;
    j["estimator"] = e;
    return j;
}

inline Scenario read_scenario(const std::string& path) { return scenario_from_json(parse_json_text(read_file(path), path)); }

// ---------------------------------------------------------------------------
// Fit reports

inline json to_json(const FitReport& r) {
    json optimum = json::object();
    for (std::size_t i = 0; i < r.names.size() && i < r.optimum.size(); ++i) optimum[r.names[i]] = r.optimum[i];
    json trace = json::array();
    for (std::size_t i = 0; i < r.trace_points.size(); ++i)
        trace.push_back({{"params", r.trace_points[i]}, {"objective", r.trace_objective[i]}});
    return {{"parameters", r.names}, {"optimum", optimum},         {"objective", r.objective}, {"converged", r.converged},
            {"evaluations", r.evaluations}, {"samples", r.samples}, {"trace", trace}};
}

inline FitReport fit_report_from_json(const json& j) {
    FitReport r;
    try {
        r.names = j.at("parameters").get<std::vector<std::string>>();
        for (const auto& n : r.names) r.optimum.push_back(j.at("optimum").at(n).get<double>());
        r.objective = j.at("objective").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.evaluations = j.at("evaluations").get<std::size_t>();
        r.samples = j.at("samples").get<std::size_t>();
        for (const auto& t : j.at("trace")) {
            r.trace_points.push_back(t.at("params").get<std::vector<double>>());
            r.trace_objective.push_back(t.at("objective").is_null() ? std::numeric_limits<double>::infinity()
                                                                    : t.at("objective").get<double>());
        }
    } catch (const json::exception& e) {
        throw parse_error(std::string("fit report: ") + e.what());
    }
    return r;
}

/// L-vs-SSE curve as columns L, sse.
inline Table l_curve_table(const FitReport& r) {
    Table t;
    std::vector<double> L, sse;
    for (std::size_t i = 0; i < r.trace_points.size(); ++i) {
        L.push_back(r.trace_points[i].at(0));
        sse.push_back(r.trace_objective[i]);
    }
    t.add("L", std::move(L));
    t.add("sse", std::move(sse));
    return t;
}

/// Shaper and friction level from {a, stages, gamma}.
inline ShaperFriction shaper_friction_from_json(const json& j, const std::string& path = "init") {
    JsonBlock b(j, path);
    ShaperFriction sf;
    sf.coupling = shaper_fields(b, path);
    b.get("gamma", sf.gamma);
    b.finish();
    return sf;
}

}  // namespace sfe
