// Copyright 2026 The msgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * Scenario files: JSON documents describing one virtual experiment.
 *
 * Frequencies are given in Hz (cycles per second) and times in microseconds;
 * both are converted to rad/s and seconds while parsing. Unknown keys are
 * rejected with a ConfigError naming the full key path.
 *
 *   {
 *     "physics":    {"nu": 1.23e6, "epsilon": 2e4, "eta": 0.044, "xi": 0.05,
 *                    "omega": "gate", "delta_ac": "balanced", "calibrate": true},
 *     "pulse":      {"shape": "blackman", "t_slope_us": 2.5},
 *     "motional":   {"fock": 0},
 *     "integrator": {"tol": 1e-9},
 *     "experiment": {"type": "evolve", "sample_every_us": 1.0},
 *     "output":     {"dir": "out"},
 *     "seed":       1
 *   }
 *
 * Requires nlohmann/json.
 */
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "msgate/errors.hpp"
#include "msgate/experiments.hpp"
#include "msgate/fitting.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/integrator.hpp"
#include "msgate/thermal.hpp"

namespace msgate {

inline constexpr const char *kVersion = "0.1.0";

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class ExperimentKind { Evolve, DetuningScan, ParityScan, Ramsey, MultiGate, ThermalPopulations, Fit };

inline const char *to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Evolve: return "evolve";
        case ExperimentKind::DetuningScan: return "detuning_scan";
        case ExperimentKind::ParityScan: return "parity_scan";
        case ExperimentKind::Ramsey: return "ramsey";
        case ExperimentKind::MultiGate: return "multi_gate";
        case ExperimentKind::ThermalPopulations: return "thermal_populations";
        case ExperimentKind::Fit: return "fit";
    }
    return "";
}

/// CLI subcommand that runs an experiment kind.
inline const char *subcommand_for(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Evolve: return "simulate";
        case ExperimentKind::DetuningScan: return "scan";
        case ExperimentKind::ParityScan: return "parity";
        case ExperimentKind::Ramsey: return "ramsey";
        case ExperimentKind::MultiGate: return "multi-gate";
        case ExperimentKind::ThermalPopulations: return "thermal";
        case ExperimentKind::Fit: return "fit";
    }
    return "";
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Evolve;
    double sample_every = 1e-6;          ///< evolve, s
    std::vector<double> grid;            ///< detuning rad/s, phase rad, wait s
    std::optional<int> shots;
    double residual_shift = 0.0;         ///< ramsey, rad/s
    int n_gates = 21;
    int trials = 200;
    NoiseModel noise;
    std::string thermal_method = "closed_form";
    int samples = 41;
    std::string fit_model;
    std::filesystem::path fit_data;
};

struct Scenario {
    GateParams params;
    bool omega_from_gate_condition = true;
    bool delta_ac_balanced = false;
    bool delta_global_sideband = false;
    bool calibrate = false;
    PulseEnvelope envelope;
    Motional motion = FockMotion{};
    IntegratorOptions integrator;
    ExperimentConfig experiment;
    std::filesystem::path out_dir = "out";
    bool write_csv = true;
    bool write_json = true;
    std::uint64_t seed = 0;
};

namespace detail {

/// Reads one JSON object, remembering which keys were consumed.
class ObjectReader {
  public:
    ObjectReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string &key) const { return j_.contains(key); }

    const Json &raw(const std::string &key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string key_path(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string &key) {
        if (!has(key)) throw ConfigError(key_path(key), "required key missing");
        const Json &v = raw(key);
        if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(key_path(key), "must be finite");
        return x;
    }

    double number(const std::string &key, double fallback) { return has(key) ? number(key) : fallback; }

    long integer(const std::string &key, long fallback) {
        if (!has(key)) return fallback;
        const Json &v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
        return v.get<long>();
    }

    bool boolean(const std::string &key, bool fallback) {
        if (!has(key)) return fallback;
        const Json &v = raw(key);
        if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string &key, const std::string &fallback, const std::set<std::string> &allowed = {}) {
        if (!has(key)) return fallback;
        const Json &v = raw(key);
        if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
        const std::string s = v.get<std::string>();
        if (!allowed.empty() && !allowed.count(s)) {
            std::string list;
            for (const auto &a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(key_path(key), "unknown value '" + s + "' (expected one of " + list + ")");
        }
        return s;
    }

    std::vector<double> numbers(const std::string &key) {
        const Json &v = raw(key);
        if (!v.is_array() || v.empty()) throw ConfigError(key_path(key), "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto &e : v) {
            if (!e.is_number()) throw ConfigError(key_path(key), "expected a non-empty array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
        }
    }

  private:
    const Json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline constexpr double kHz = kTwoPi;  // Hz -> rad/s
inline constexpr double kUs = 1e-6;    // us -> s

inline std::vector<double> linspace(double a, double b, long n) {
    std::vector<double> out;
    if (n == 1) return {a};
    for (long i = 0; i < n; ++i) out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

inline long positive(ObjectReader &r, const std::string &key, long fallback) {
    const long v = r.integer(key, fallback);
    if (v < 1) throw ConfigError(r.key_path(key), "must be >= 1");
    return v;
}

}  // namespace detail

/// Validates and converts a scenario document. `base_dir` resolves relative data paths.
inline Scenario parse_scenario(const Json &doc, const std::filesystem::path &base_dir = ".") {
    using detail::kHz;
    using detail::kUs;
    Scenario s;
    detail::ObjectReader root(doc, "");

    // physics
    if (!root.has("physics")) throw ConfigError("physics", "required section missing");
    {
        detail::ObjectReader r(root.raw("physics"), "physics");
        GateParams &p = s.params;
        p.nu = kHz * r.number("nu");
        p.epsilon = kHz * r.number("epsilon");
        p.eta = r.number("eta");
        if (r.has("omega") && r.raw("omega").is_string()) {
            r.string("omega", "gate", {"gate"});
        } else if (r.has("omega")) {
            p.omega = kHz * r.number("omega");
            s.omega_from_gate_condition = false;
        }
        const double scale = r.number("omega_scale", 1.0);
        if (!(scale > 0.0)) throw ConfigError("physics.omega_scale", "must be > 0");
        if (s.omega_from_gate_condition) {
            if (p.epsilon == 0.0) throw ConfigError("physics.epsilon", "must be non-zero");
            if (!(p.eta > 0.0)) throw ConfigError("physics.eta", "must be > 0");
            p.omega = gate_rabi_frequency(p.epsilon, p.eta);
        }
        p.omega *= scale;
        p.xi = r.number("xi", 0.0);
        p.zeta = r.number("zeta", 0.0);
        p.coupling_ratio = r.number("coupling_ratio", 1.0);
        if (r.has("delta_ac") && r.raw("delta_ac").is_string()) {
            r.string("delta_ac", "balanced", {"balanced"});
            s.delta_ac_balanced = true;
        } else {
            p.delta_ac = kHz * r.number("delta_ac", 0.0);
        }
        if (r.has("delta_global") && r.raw("delta_global").is_string()) {
            r.string("delta_global", "sideband", {"sideband"});
            s.delta_global_sideband = true;
        } else {
            p.delta_global = kHz * r.number("delta_global", 0.0);
        }
        s.calibrate = r.boolean("calibrate", false);
        r.finish();
        if (p.epsilon == 0.0) throw ConfigError("physics.epsilon", "must be non-zero");
        if (p.nu - p.epsilon == 0.0) throw ConfigError("physics.epsilon", "must differ from nu");
        try {
            p.validate();
        } catch (const DomainError &e) {
            throw ConfigError("physics", e.what());
        }
        if (s.delta_ac_balanced) p.delta_ac = balanced_dipole_shift(p);
    }

    // pulse
    {
        const DerivedParams d = derived_params(s.params);
        const Json empty = Json::object();
        detail::ObjectReader r(root.has("pulse") ? root.raw("pulse") : empty, "pulse");
        const std::string shape = r.string("shape", "blackman", {"blackman", "rectangular"});
        const double t_gate = kUs * r.number("t_gate_us", d.t_gate / kUs);
        const double t_slope = kUs * r.number("t_slope_us", 2.5);
        r.finish();
        s.envelope = shape == "rectangular" ? PulseEnvelope::rectangular(t_gate) : PulseEnvelope::blackman(t_gate, t_slope);
        try {
            s.envelope.validate();
        } catch (const DomainError &e) {
            throw ConfigError("pulse", e.what());
        }
    }

    // motional
    {
        const Json empty = Json::object();
        detail::ObjectReader r(root.has("motional") ? root.raw("motional") : empty, "motional");
        if (r.has("fock") && r.has("thermal")) throw ConfigError("motional", "give either fock or thermal, not both");
        if (r.has("thermal")) {
            detail::ObjectReader t(r.raw("thermal"), "motional.thermal");
            ThermalSpec spec;
            spec.nbar = t.number("nbar");
            spec.weight_cutoff = t.number("cutoff", spec.weight_cutoff);
            spec.window = static_cast<int>(t.integer("window", spec.window));
            spec.auto_window = t.boolean("auto_window", true);
            t.finish();
            try {
                spec.validate();
            } catch (const DomainError &e) {
                throw ConfigError("motional.thermal", e.what());
            }
            s.motion = spec;
        } else {
            const long n = r.integer("fock", 0);
            if (n < 0) throw ConfigError("motional.fock", "must be >= 0");
            s.motion = FockMotion{static_cast<int>(n), 12};
        }
        r.finish();
    }
    if (s.delta_global_sideband) {
        const auto *f = std::get_if<FockMotion>(&s.motion);
        if (!f) throw ConfigError("physics.delta_global", "'sideband' needs a Fock motional state");
    }

    // integrator
    {
        const Json empty = Json::object();
        detail::ObjectReader r(root.has("integrator") ? root.raw("integrator") : empty, "integrator");
        s.integrator.tol = r.number("tol", 1e-9);
        s.integrator.fixed_step = kUs * r.number("fixed_step_us", 0.0);
        r.finish();
        try {
            s.integrator.validate();
        } catch (const DomainError &e) {
            throw ConfigError("integrator", e.what());
        }
    }

    s.seed = static_cast<std::uint64_t>(root.integer("seed", 0));

    // experiment
    if (!root.has("experiment")) throw ConfigError("experiment", "required section missing");
    {
        detail::ObjectReader r(root.raw("experiment"), "experiment");
        ExperimentConfig &e = s.experiment;
        const std::string type = r.string("type", "", {"evolve", "detuning_scan", "parity_scan", "ramsey", "multi_gate",
                                                        "thermal_populations", "fit"});
        if (type.empty()) throw ConfigError("experiment.type", "required key missing");
        auto read_shots = [&] {
            if (r.has("shots")) e.shots = static_cast<int>(detail::positive(r, "shots", 1));
        };
        if (type == "evolve") {
            e.kind = ExperimentKind::Evolve;
            e.sample_every = kUs * r.number("sample_every_us", 1.0);
            if (!(e.sample_every > 0.0)) throw ConfigError("experiment.sample_every_us", "must be > 0");
        } else if (type == "detuning_scan") {
            e.kind = ExperimentKind::DetuningScan;
            if (r.has("grid_hz")) {
                for (double v : r.numbers("grid_hz")) e.grid.push_back(kHz * v);
            } else {
                const double a = r.number("start_hz"), b = r.number("stop_hz");
                e.grid = detail::linspace(kHz * a, kHz * b, detail::positive(r, "points", 11));
            }
            read_shots();
        } else if (type == "parity_scan") {
            e.kind = ExperimentKind::ParityScan;
            const long n = detail::positive(r, "points", 24);
            if (n < 5) throw ConfigError("experiment.points", "need at least 5 phases");
            for (long i = 0; i < n; ++i) e.grid.push_back(kPi * static_cast<double>(i) / static_cast<double>(n));
            read_shots();
        } else if (type == "ramsey") {
            e.kind = ExperimentKind::Ramsey;
            e.residual_shift = kHz * r.number("residual_shift_hz", 0.0);
            const double a = r.number("wait_start_us", 0.0), b = r.number("wait_stop_us");
            if (!(b > a) || a < 0.0) throw ConfigError("experiment.wait_stop_us", "need 0 <= wait_start_us < wait_stop_us");
            const long n = detail::positive(r, "points", 61);
            if (n < 6) throw ConfigError("experiment.points", "need at least 6 waits");
            e.grid = detail::linspace(kUs * a, kUs * b, n);
        } else if (type == "multi_gate") {
            e.kind = ExperimentKind::MultiGate;
            e.n_gates = static_cast<int>(detail::positive(r, "n_gates", 21));
            e.trials = static_cast<int>(detail::positive(r, "trials", 200));
            e.noise.coupling_rel_sigma = r.number("coupling_rel_sigma", 0.0);
            e.noise.carrier_error_per_gate = r.number("carrier_error_per_gate", 0.0);
            e.noise.detuning_rms = kHz * r.number("detuning_rms_hz", 0.0);
            try {
                e.noise.validate();
            } catch (const DomainError &err) {
                throw ConfigError("experiment", err.what());
            }
        } else if (type == "thermal_populations") {
            e.kind = ExperimentKind::ThermalPopulations;
            e.thermal_method = r.string("method", "closed_form", {"closed_form", "numeric"});
            e.samples = static_cast<int>(detail::positive(r, "samples", 41));
            if (e.samples < 2) throw ConfigError("experiment.samples", "need at least 2 samples");
        } else {
            e.kind = ExperimentKind::Fit;
            e.fit_model = r.string("model", "", {"nbar", "sinusoid", "quadratic", "oscillation"});
            if (e.fit_model.empty()) throw ConfigError("experiment.model", "required key missing");
            if (!r.has("data")) throw ConfigError("experiment.data", "required key missing");
            const std::string data = r.string("data", "");
            e.fit_data = std::filesystem::path(data).is_absolute() ? std::filesystem::path(data) : base_dir / data;
        }
        r.finish();
        if ((e.kind == ExperimentKind::DetuningScan) && e.grid.size() < 5) {
            throw ConfigError("experiment", "detuning scan needs at least 5 points");
        }
    }

    // output
    {
        const Json empty = Json::object();
        detail::ObjectReader r(root.has("output") ? root.raw("output") : empty, "output");
        s.out_dir = r.string("dir", "out");
        if (r.has("formats")) {
            const Json &f = r.raw("formats");
            if (!f.is_array()) throw ConfigError("output.formats", "expected an array");
            s.write_csv = s.write_json = false;
            for (const auto &v : f) {
                if (v == "csv") s.write_csv = true;
                else if (v == "json") s.write_json = true;
                else throw ConfigError("output.formats", "unknown format " + v.dump());
            }
        }
        r.finish();
    }
    root.finish();
    return s;
}

inline Scenario parse_scenario_text(const std::string &text, const std::filesystem::path &base_dir = ".") {
    Json doc;
    try {
        doc = Json::parse(text, nullptr, true, true);
    } catch (const Json::parse_error &e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(doc, base_dir);
}

inline Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------------------
// Running

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct ScenarioResult {
    Table table;
    OrderedJson results = OrderedJson::object();
    std::optional<OrderedJson> fit;
    GateParams params;  ///< after calibration and shifts
};

inline OrderedJson to_json(const FitResult &f) {
    OrderedJson j;
    j["model"] = f.model;
    OrderedJson p = OrderedJson::object(), e = OrderedJson::object();
    for (const auto &[k, v] : f.params) p[k] = v;
    for (const auto &[k, v] : f.std_error) e[k] = v;
    j["params"] = p;
    j["std_error"] = e;
    j["rms_residual"] = f.rms_residual;
    j["warnings"] = f.warnings;
    return j;
}

/// Echo of the scenario in SI units (rad/s, s).
inline OrderedJson normalized_config(const Scenario &s, const GateParams &p) {
    OrderedJson c;
    c["physics"] = {{"nu_rad_s", p.nu},
                    {"epsilon_rad_s", p.epsilon},
                    {"eta", p.eta},
                    {"omega_rad_s", p.omega},
                    {"xi", p.xi},
                    {"zeta_rad", p.zeta},
                    {"delta_ac_rad_s", p.delta_ac},
                    {"delta_global_rad_s", p.delta_global},
                    {"coupling_ratio", p.coupling_ratio},
                    {"calibrated", s.calibrate}};
    c["pulse"] = {{"shape", s.envelope.kind == PulseShape::Rectangular ? "rectangular" : "blackman"},
                  {"t_pulse_s", s.envelope.t_pulse},
                  {"t_slope_s", s.envelope.t_slope}};
    if (const auto *f = std::get_if<FockMotion>(&s.motion)) {
        c["motional"] = {{"fock", f->n}};
    } else {
        const auto &t = std::get<ThermalSpec>(s.motion);
        c["motional"] = {{"thermal", {{"nbar", t.nbar}, {"cutoff", t.weight_cutoff}, {"window", t.window}}}};
    }
    c["integrator"] = {{"tol", s.integrator.tol}, {"fixed_step_s", s.integrator.fixed_step}};
    c["experiment"] = {{"type", to_string(s.experiment.kind)}};
    c["seed"] = s.seed;
    return c;
}

inline OrderedJson derived_json(const GateParams &p) {
    const DerivedParams d = derived_params(p);
    return {{"delta_rad_s", d.delta},   {"t_gate_s", d.t_gate},     {"lambda_rad_s", d.lambda},
            {"chi", d.chi},             {"omega_b_rad_s", d.omega_b}, {"omega_r_rad_s", d.omega_r}};
}

namespace detail {

inline int calibration_level(const Motional &m) {
    if (const auto *f = std::get_if<FockMotion>(&m)) return f->n;
    return static_cast<int>(std::lround(std::get<ThermalSpec>(m).nbar));
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path &path, std::vector<std::string> &header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("experiment.data", "cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    auto split = [](const std::string &l) {
        std::vector<std::string> out;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < l.size(); ++i) {
            const char c = l[i];
            if (quoted) {
                if (c == '"' && i + 1 < l.size() && l[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cell += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                out.push_back(cell);
                cell.clear();
            } else if (c != '\r') {
                cell += c;
            }
        }
        out.push_back(cell);
        return out;
    };
    if (!std::getline(in, line)) throw ConfigError("experiment.data", "empty data file");
    header = split(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line != "\r") rows.push_back(split(line));
    }
    return rows;
}

inline std::vector<double> column(const std::vector<std::vector<std::string>> &rows,
                                  const std::vector<std::string> &header, const std::string &name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("experiment.data", "missing column " + name);
    const auto idx = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (const auto &r : rows) {
        if (idx >= r.size()) throw ConfigError("experiment.data", "short row");
        try {
            out.push_back(std::stod(r[idx]));
        } catch (const std::exception &) {
            throw ConfigError("experiment.data", "non-numeric value '" + r[idx] + "' in column " + name);
        }
    }
    return out;
}

}  // namespace detail

/// Runs the scenario's experiment. Integration and fit failures propagate.
inline ScenarioResult run_scenario(const Scenario &s, int jobs = 1) {
    ScenarioResult out;
    GateParams p = s.params;
    if (s.calibrate) {
        p = calibrate_rabi(p, s.envelope, s.integrator, s.delta_ac_balanced, detail::calibration_level(s.motion));
    }
    if (s.delta_global_sideband) p.delta_global = sideband_stark_shift(p, std::get<FockMotion>(s.motion).n);
    out.params = p;
    const ExperimentConfig &e = s.experiment;
    const PulseEnvelope &env = s.envelope;
    const double us = 1e-6;

    switch (e.kind) {
        case ExperimentKind::Evolve: {
            out.table.header = {"t_us", "p0", "p1", "p2"};
            IntegratorOptions o = s.integrator;
            o.sample_every = e.sample_every;
            const auto members = ensemble_members(p, s.motion);
            std::vector<EvolveReport> runs(members.size());
            parallel_for(members.size(), jobs, [&](std::size_t i) {
                runs[i] = evolve(initial_state(members[i]), p, env, 0.0, env.t_pulse, o);
            });
            Operator rho = Operator::Zero(4, 4);
            double drift = 0.0;
            long steps = 0;
            for (std::size_t i = 0; i < members.size(); ++i) {
                rho += members[i].weight * runs[i].qubit_density;
                drift = std::max(drift, runs[i].norm_drift);
                steps += runs[i].steps_taken;
            }
            for (std::size_t k = 0; k < runs.front().samples.size(); ++k) {
                double p0 = 0, p1 = 0, p2 = 0;
                for (std::size_t i = 0; i < members.size(); ++i) {
                    p0 += members[i].weight * runs[i].samples[k].p0;
                    p1 += members[i].weight * runs[i].samples[k].p1;
                    p2 += members[i].weight * runs[i].samples[k].p2;
                }
                out.table.rows.push_back({runs.front().samples[k].t / us, p0, p1, p2});
            }
            const Populations pop = populations_binned(rho);
            out.results["bell_fidelity"] = parity_fidelity(rho);
            out.results["overlap_fidelity"] = overlap_fidelity(rho, ideal_gate_output());
            out.results["parity_amplitude"] = parity_amplitude(rho);
            out.results["p0"] = pop.p0;
            out.results["p1"] = pop.p1;
            out.results["p2"] = pop.p2;
            out.results["norm_drift"] = drift;
            out.results["steps_taken"] = steps;
            break;
        }
        case ExperimentKind::DetuningScan: {
            out.table.header = {"detuning_hz", "p0", "p1", "p2", "fidelity"};
            ScanSpec spec{ScanVariable::GlobalDetuning, e.grid, e.shots, s.seed};
            const auto rows = run_scan(spec, p, env, s.motion, {s.integrator, jobs});
            std::vector<double> x, y;
            for (const auto &r : rows) {
                out.table.rows.push_back({r.value / kTwoPi, r.p0, r.p1, r.p2, *r.fidelity});
                x.push_back(r.value / kTwoPi);
                y.push_back(*r.fidelity);
            }
            const FitResult f = fit_quadratic_detuning(x, y);
            out.fit = to_json(f);
            out.results["curvature_per_hz2"] = f["curvature"];
            out.results["center_hz"] = f["center"];
            out.results["f_max"] = f["f_max"];
            out.results["error_at_160hz_rms"] = std::abs(f["curvature"]) * 160.0 * 160.0;
            break;
        }
        case ExperimentKind::ParityScan: {
            out.table.header = {"phi_rad", "parity"};
            ScanSpec spec{ScanVariable::AnalysisPhase, e.grid, e.shots, s.seed};
            const auto rows = run_scan(spec, p, env, s.motion, {s.integrator, jobs});
            std::vector<double> x, y;
            for (const auto &r : rows) {
                out.table.rows.push_back({r.value, *r.parity});
                x.push_back(r.value);
                y.push_back(*r.parity);
            }
            const FitResult f = fit_sinusoid(x, y);
            out.fit = to_json(f);
            const Populations pop = populations_binned(gate_density(p, env, s.motion, s.integrator, jobs));
            const double amp = std::min(f["A"], 1.0);
            out.results["parity_amplitude"] = f["A"];
            out.results["p0"] = pop.p0;
            out.results["p2"] = pop.p2;
            out.results["bell_fidelity"] = bell_fidelity(std::clamp(pop.p0, 0.0, 1.0), std::clamp(pop.p2, 0.0, 1.0), amp);
            break;
        }
        case ExperimentKind::Ramsey: {
            out.table.header = {"wait_us", "p0", "p2"};
            const int n = detail::calibration_level(s.motion);
            const RamseyResult r = ramsey_scan(p, env, e.residual_shift, e.grid, {s.integrator, jobs}, n);
            for (const auto &row : r.rows) out.table.rows.push_back({row.value / us, row.p0, row.p2});
            OrderedJson f;
            f["p0"] = to_json(r.fit_p0);
            f["p2"] = to_json(r.fit_p2);
            out.fit = f;
            out.results["period_us"] = r.period / us;
            out.results["residual_shift_hz"] = r.residual_shift / kTwoPi;
            break;
        }
        case ExperimentKind::MultiGate: {
            out.table.header = {"n_gates", "fidelity", "parity_amplitude"};
            NoiseModel noise = e.noise;
            noise.seed = s.seed;
            const MultiGateResult r = multi_gate(e.n_gates, p, env, noise, e.trials, jobs);
            for (const auto &row : r.rows) out.table.rows.push_back({double(row.n_gates), row.fidelity, row.parity_amplitude});
            out.results["final_fidelity"] = r.rows.back().fidelity;
            out.results["final_parity_amplitude"] = r.rows.back().parity_amplitude;
            if (r.rows.size() >= 3) {
                OrderedJson f;
                f["amplitude_gaussian"] = to_json(r.amplitude_gaussian);
                f["amplitude_linear"] = to_json(r.amplitude_linear);
                f["population_linear"] = to_json(r.population_linear);
                out.fit = f;
                out.results["gaussian_over_linear_residual_ratio"] =
                    r.amplitude_linear.rms_residual / std::max(r.amplitude_gaussian.rms_residual, 1e-300);
            }
            break;
        }
        case ExperimentKind::ThermalPopulations: {
            out.table.header = {"t_us", "p0", "p1", "p2"};
            const auto *spec = std::get_if<ThermalSpec>(&s.motion);
            if (!spec) throw ConfigError("motional", "thermal_populations needs a thermal motional state");
            const std::vector<double> times = detail::linspace(0.0, env.t_pulse, e.samples);
            if (e.thermal_method == "closed_form") {
                for (double t : times) {
                    const AnalyticFactors f = env.kind == PulseShape::Rectangular ? analytic_factors(s.params, t)
                                                                                 : shaped_factors(s.params, env, t);
                    const ThermalPopulations tp = populations_thermal(f, spec->nbar);
                    out.table.rows.push_back({t / us, tp.p0, tp.p1, tp.p2});
                }
            } else {
                IntegratorOptions o = s.integrator;
                o.sample_times = times;
                const EvolveReport r = evolve_thermal(p, env, *spec, 0.0, env.t_pulse, o, jobs);
                for (const auto &x : r.samples) out.table.rows.push_back({x.t / us, x.p0, x.p1, x.p2});
                out.results["norm_drift"] = r.norm_drift;
            }
            double p1_max = 0.0;
            for (const auto &row : out.table.rows) p1_max = std::max(p1_max, row[2]);
            out.results["method"] = e.thermal_method;
            out.results["p1_max"] = p1_max;
            out.results["p1_final"] = out.table.rows.back()[2];
            out.results["weights"] = thermal_weights(*spec).size();
            break;
        }
        case ExperimentKind::Fit: {
            std::vector<std::string> header;
            const auto rows = detail::read_csv(e.fit_data, header);
            FitResult f;
            if (e.fit_model == "nbar") {
                const auto t = detail::column(rows, header, "t_us"), p0 = detail::column(rows, header, "p0"),
                           p1 = detail::column(rows, header, "p1"), p2 = detail::column(rows, header, "p2");
                std::vector<PopulationPoint> pts;
                for (std::size_t i = 0; i < t.size(); ++i) pts.push_back({t[i] * us, p0[i], p1[i], p2[i]});
                f = env.kind == PulseShape::Rectangular ? fit_nbar(pts, s.params) : fit_nbar(pts, s.params, env);
            } else if (e.fit_model == "sinusoid") {
                f = fit_sinusoid(detail::column(rows, header, "phi_rad"), detail::column(rows, header, "parity"));
            } else if (e.fit_model == "quadratic") {
                f = fit_quadratic_detuning(detail::column(rows, header, "detuning_hz"),
                                           detail::column(rows, header, "fidelity"));
            } else {
                const auto w = detail::column(rows, header, "wait_us");
                f = fit_oscillation(w, detail::column(rows, header, "p2"));
            }
            out.table.header = {"param", "value", "std_error"};
            out.fit = to_json(f);
            for (const auto &[k, v] : f.params) out.results[k] = v;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

/// RFC 4180 field: quoted when it contains a comma, quote or line break.
inline std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string format_number(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

inline void write_table_csv(const std::filesystem::path &path, const Table &t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << csv_field(t.header[i]);
    out << "\r\n";
    for (const auto &row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(format_number(row[i]));
        out << "\r\n";
    }
}

/// Fit tables list parameters by name instead of numeric rows.
inline void write_fit_csv(const std::filesystem::path &path, const OrderedJson &fit) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "param,value,std_error\r\n";
    for (auto it = fit["params"].begin(); it != fit["params"].end(); ++it) {
        const double err = fit["std_error"].contains(it.key()) ? fit["std_error"][it.key()].get<double>() : 0.0;
        out << csv_field(it.key()) << "," << format_number(it.value().get<double>()) << "," << format_number(err)
            << "\r\n";
    }
}

inline void write_summary(const std::filesystem::path &path, const OrderedJson &summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << summary.dump(2) << "\n";
}

}  // namespace msgate
