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
 * Command-line front end.
 *
 *   msgate simulate --config run.json [--out DIR] [--jobs N] [--seed S]
 *   msgate thermal --repro thermal-populations
 *   msgate validate --config run.json
 *
 * Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
 * (integration or fit). On a numerical failure summary.json still records
 * the error. Requires CLI11 and nlohmann/json.
 */
#pragma once

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "msgate/errors.hpp"
#include "msgate/parallel.hpp"
#include "msgate/scenario.hpp"

namespace msgate {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

using ReproTable = std::span<const std::pair<std::string_view, std::string_view>>;

struct CliOptions {
    std::string config;
    std::string out;
    std::string repro;
    int jobs = default_jobs();
    std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string summary_line(const std::string &command, const OrderedJson &results, double wall,
                                const std::filesystem::path &dir) {
    std::ostringstream os;
    os << "msgate " << command << ": ok";
    for (auto it = results.begin(); it != results.end(); ++it) {
        if (it.value().is_number_float()) {
            os << " " << it.key() << "=" << std::setprecision(6) << it.value().get<double>();
        } else if (it.value().is_number() || it.value().is_string()) {
            os << " " << it.key() << "=" << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump());
        }
    }
    os << " wall=" << std::setprecision(3) << wall << "s out=" << dir.string();
    return os.str();
}

inline Scenario load_for(const CliOptions &o, ReproTable repro) {
    if (!o.repro.empty() && !o.config.empty()) throw ConfigError("--repro", "give either --config or --repro, not both");
    if (!o.repro.empty()) {
        for (const auto &[name, text] : repro) {
            if (name == o.repro) return parse_scenario_text(std::string(text));
        }
        std::string names;
        for (const auto &r : repro) names += (names.empty() ? "" : ", ") + std::string(r.first);
        throw ConfigError("--repro", "unknown name '" + o.repro + "' (available: " + names + ")");
    }
    if (o.config.empty()) throw ConfigError("--config", "a config file or --repro name is required");
    return load_scenario(o.config);
}

inline OrderedJson error_json(const std::string &kind, const std::exception &e) {
    OrderedJson j;
    j["kind"] = kind;
    j["message"] = e.what();
    if (const auto *ie = dynamic_cast<const IntegrationError *>(&e)) {
        j["stiffness"] = ie->stiffness();
    }
    return j;
}

}  // namespace detail

/**
 * Runs one command. `out` receives the summary line, `err` diagnostics.
 * `repro` lists the canned scenarios reachable with --repro.
 */
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err, ReproTable repro = {}) {
    CLI::App app{"Simulator for the bichromatic two-ion entangling gate", "msgate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    CliOptions opt;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "evolve one gate pulse and report the Bell fidelity"},
        {"scan", "scan the global laser detuning"},
        {"ramsey", "two pulses separated by a variable wait"},
        {"parity", "scan the analysis-pulse phase"},
        {"multi-gate", "repeated gates with quasi-static noise"},
        {"thermal", "populations for a thermal motional state"},
        {"fit", "fit a model to a CSV data file"},
        {"validate", "check a scenario file without running it"},
    };
    for (const auto &[name, help] : commands) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "scenario file (JSON)");
        sub->add_option("--out", opt.out, "output directory (overrides output.dir)");
        sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "random seed (overrides the scenario)");
        sub->add_option("--repro", opt.repro, "run a canned scenario by name");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion &e) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "msgate: " << e.what() << "\n";
        return kExitConfig;
    }
    const CLI::App *sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    Scenario s;
    try {
        s = detail::load_for(opt, repro);
        if (command != "validate" && command != subcommand_for(s.experiment.kind)) {
            throw ConfigError("experiment.type", std::string("'") + to_string(s.experiment.kind) +
                                                     "' runs under 'msgate " + subcommand_for(s.experiment.kind) +
                                                     "', not '" + command + "'");
        }
    } catch (const ConfigError &e) {
        err << "msgate: config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (command == "validate") {
        out << "msgate validate: ok experiment=" << to_string(s.experiment.kind) << "\n";
        return kExitOk;
    }
    if (opt.seed) s.seed = *opt.seed;
    if (!opt.out.empty()) s.out_dir = opt.out;

    OrderedJson summary;
    summary["version"] = kVersion;
    summary["command"] = command;
    summary["config"] = normalized_config(s, s.params);
    summary["derived"] = derived_json(s.params);

    const auto start = std::chrono::steady_clock::now();
    auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    std::optional<ScenarioResult> result;
    int code = kExitOk;
    try {
        result = run_scenario(s, opt.jobs);
    } catch (const ConfigError &e) {
        err << "msgate: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IntegrationError &e) {
        summary["error"] = detail::error_json("integration", e);
        code = kExitNumerical;
    } catch (const FitError &e) {
        summary["error"] = detail::error_json("fit", e);
        code = kExitNumerical;
    } catch (const TruncationError &e) {
        summary["error"] = detail::error_json("truncation", e);
        code = kExitNumerical;
    } catch (const std::exception &e) {
        summary["error"] = detail::error_json("numerical", e);
        code = kExitNumerical;
    }
    const double wall_time = wall();

    try {
        std::filesystem::create_directories(s.out_dir);
        if (result) {
            summary["config"] = normalized_config(s, result->params);
            summary["derived"] = derived_json(result->params);
            summary["results"] = result->results;
            if (result->fit) summary["fit"] = *result->fit;
            if (s.write_csv) {
                if (s.experiment.kind == ExperimentKind::Fit) {
                    write_fit_csv(s.out_dir / "result.csv", *result->fit);
                } else {
                    write_table_csv(s.out_dir / "result.csv", result->table);
                }
            }
        }
        summary["wall_time_s"] = wall_time;
        if (s.write_json) write_summary(s.out_dir / "summary.json", summary);
    } catch (const std::exception &e) {
        err << "msgate: " << e.what() << "\n";
        return kExitConfig;
    }

    if (code != kExitOk) {
        err << "msgate " << command << ": failed: " << summary["error"]["message"].get<std::string>() << "\n";
        return code;
    }
    out << detail::summary_line(command, result->results, wall_time, s.out_dir) << "\n";
    return kExitOk;
}

}  // namespace msgate
