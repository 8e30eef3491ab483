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
 * Virtual experiments built on the integrator: state preparation and
 * analysis pulses, fidelity estimators, scans over detuning, analysis phase,
 * waiting time, gate count and time, and the repeated-gate noise model.
 *
 * Sequences of several gate pulses restart the pulse clock for every pulse
 * and keep the motional state; single-ion operations are instantaneous.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "msgate/errors.hpp"
#include "msgate/fitting.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/hilbert.hpp"
#include "msgate/integrator.hpp"
#include "msgate/parallel.hpp"
#include "msgate/propagator.hpp"
#include "msgate/thermal.hpp"

namespace msgate {

// ---------------------------------------------------------------------------
// Pulses and states

/// exp(-i theta/2 (cos(phi) S_x + sin(phi) S_y)) on both ions.
inline Operator carrier_pulse(double theta, double phi) {
    return collective_rotation(theta, pauli::in_plane(phi));
}

/// Phase flip of ion 1 (sigma_z (x) 1).
inline Operator single_ion_phase_flip() { return kron(pauli::z(), pauli::identity()); }

/// pi/2 on both ions, pi phase shift on ion 1, pi/2 on both: |dd> -> |du>.
inline Operator prepare_downup() {
    const Operator half = carrier_pulse(0.5 * kPi, -0.5 * kPi);
    return half * single_ion_phase_flip() * half;
}

/// U|dd> with a fraction eps_prep spread evenly over the orthogonal complement.
inline Operator prepared_density(const Operator &prep, double eps_prep = 0.0) {
    if (eps_prep < 0.0 || eps_prep > 1.0) throw InputError("prepared_density: eps_prep must be in [0, 1]");
    const Vector psi = prep * qubit_basis(Qubits::DownDown);
    const Operator pure = density(psi);
    return (1.0 - eps_prep) * pure + (eps_prep / 3.0) * (Operator::Identity(4, 4) - pure);
}

/// (|dd> + i|uu>)/sqrt(2).
inline Vector bell_state() {
    Vector v = Vector::Zero(4);
    v(3) = 1.0 / std::sqrt(2.0);
    v(0) = kI / std::sqrt(2.0);
    return v;
}

/// exp(i pi/8 S_y^2)|dd> = (|dd> - i|uu>)/sqrt(2) in the library's conventions.
inline Vector ideal_gate_output() {
    Vector v = Vector::Zero(4);
    v(3) = 1.0 / std::sqrt(2.0);
    v(0) = -kI / std::sqrt(2.0);
    return v;
}

struct Populations {
    double p0;  ///< |uu>, no ion fluoresces
    double p1;  ///< |ud> + |du>
    double p2;  ///< |dd>, both ions fluoresce
};

inline Populations populations_binned(const Operator &rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw InputError("populations_binned: expected 4x4 density");
    return {std::real(rho(0, 0)), std::real(rho(1, 1) + rho(2, 2)), std::real(rho(3, 3))};
}

inline Populations populations_binned(const StateVector &s) { return populations_binned(reduced_qubits(s)); }

inline Populations populations_binned(const Vector &qubits) {
    if (qubits.size() != 4) throw InputError("populations_binned: expected 4 amplitudes");
    return populations_binned(density(qubits));
}

/// (p0 + p2)/2 + A/2 with A the parity fringe amplitude.
inline double bell_fidelity(double p0, double p2, double parity_amplitude) {
    for (double v : {p0, p2, parity_amplitude}) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("bell_fidelity: inputs must lie in [0, 1]");
    }
    if (p0 + p2 > 1.0 + 1e-12) throw InputError("bell_fidelity: p0 + p2 > 1");
    return 0.5 * (p0 + p2) + 0.5 * parity_amplitude;
}

/// 2 |rho_{dd,uu}|, the amplitude of the parity fringe.
inline double parity_amplitude(const Operator &rho) { return 2.0 * std::abs(rho(3, 0)); }

/// Fidelity measured by populations plus parity fringe: (rho_uu + rho_dd)/2 + |rho_{dd,uu}|.
inline double parity_fidelity(const Operator &rho) {
    return 0.5 * std::real(rho(0, 0) + rho(3, 3)) + std::abs(rho(3, 0));
}

/// <target| rho |target>.
inline double overlap_fidelity(const Operator &rho, const Vector &target) {
    return std::real(target.dot(rho * target));
}

/// sum_n p_n(phi) over the parity fringe: p0 + p2 - p1 after a pi/2 analysis pulse of phase phi.
inline double parity_after_analysis(const Operator &rho, double phi) {
    const Operator u = carrier_pulse(0.5 * kPi, phi);
    const Populations p = populations_binned(Operator(u * rho * u.adjoint()));
    return p.p0 + p.p2 - p.p1;
}

// ---------------------------------------------------------------------------
// Motional ensembles

struct FockMotion {
    int n = 0;
    int window = 12;
};

using Motional = std::variant<FockMotion, ThermalSpec>;

struct EnsembleMember {
    int n;
    double weight;
    FockWindow window;
};

inline std::vector<EnsembleMember> ensemble_members(const GateParams &p, const Motional &m) {
    std::vector<EnsembleMember> out;
    if (const auto *f = std::get_if<FockMotion>(&m)) {
        if (f->n < 0) throw DomainError("FockMotion: n must be >= 0");
        ThermalSpec s;
        s.window = f->window;
        out.push_back({f->n, 1.0, thermal_window(p, s, f->n)});
    } else {
        const auto &s = std::get<ThermalSpec>(m);
        for (const auto &w : thermal_weights(s)) out.push_back({w.n, w.weight, thermal_window(p, s, w.n)});
    }
    return out;
}

inline StateVector initial_state(const EnsembleMember &e, Qubits q = Qubits::DownDown) {
    return product_state(q, e.n, e.window.n_fock, e.window.offset);
}

/// Qubit operator applied to a qubit (x) Fock state.
inline void apply_qubit_operator(const Operator &u, StateVector &s) {
    const int n = s.n_fock;
    Eigen::Map<Eigen::MatrixXcd> blocks(s.amplitudes.data(), n, 4);
    const Eigen::MatrixXcd next = blocks * u.transpose();
    blocks = next;
}

/// Free precession between pulses: exp(-i c S_z tau), c = -Delta_global / 2.
inline void apply_wait(const GateParams &p, double tau, StateVector &s) {
    const double c = -0.5 * p.delta_global;
    Operator u = Operator::Zero(4, 4);
    u(0, 0) = std::exp(-kI * (2.0 * c * tau));
    u(1, 1) = 1.0;
    u(2, 2) = 1.0;
    u(3, 3) = std::exp(kI * (2.0 * c * tau));
    apply_qubit_operator(u, s);
}

/// One full pulse on `s`.
inline void apply_gate(const GateHamiltonian &h, StateVector &s, const IntegratorOptions &opt) {
    IntegratorOptions o = opt;
    o.sample_every = 0.0;
    o.sample_times.clear();
    EvolveReport r = evolve(s, h, 0.0, h.envelope().t_pulse, o);
    s = std::move(*r.final_state);
}

/// Qubit density after one pulse, averaged over the motional ensemble.
inline Operator gate_density(const GateParams &p, const PulseEnvelope &env, const Motional &m,
                             const IntegratorOptions &opt, int jobs = 1) {
    const auto members = ensemble_members(p, m);
    std::vector<Operator> rho(members.size());
    parallel_for(members.size(), jobs, [&](std::size_t i) {
        StateVector s = initial_state(members[i]);
        apply_gate(GateHamiltonian(p, env, s.n_fock, s.fock_offset), s, opt);
        rho[i] = reduced_qubits(s);
    });
    Operator out = Operator::Zero(4, 4);
    for (std::size_t i = 0; i < members.size(); ++i) out += members[i].weight * rho[i];
    return out;
}

/**
 * Scales Omega so that p0 = p2 after a pulse from |dd> with the given motion, compensating the
 * reduction of the effective coupling by off-resonant carrier excitation.
 * With `rebalance_stark` the dipole shift is re-matched to the imbalance xi
 * at every trial Omega.
 */
inline GateParams calibrate_rabi(const GateParams &p, const PulseEnvelope &env, const IntegratorOptions &opt,
                                 bool rebalance_stark, const Motional &motion, int jobs = 1) {
    auto trial = [&](double scale) {
        GateParams q = p;
        q.omega = p.omega * scale;
        if (rebalance_stark) q.delta_ac = balanced_dipole_shift(q);
        return q;
    };
    auto imbalance = [&](double scale) {
        const Populations pop = populations_binned(gate_density(trial(scale), env, motion, opt, jobs));
        return pop.p0 - pop.p2;
    };
    double a = 0.95, b = 1.08;
    double fa = imbalance(a), fb = imbalance(b);
    if (fa * fb > 0.0) throw FitError("calibrate_rabi: p0 - p2 does not change sign in [0.95, 1.08]", fa);
    // Illinois variant of regula falsi.
    int side = 0;
    double c = a;
    for (int it = 0; it < 60 && std::abs(b - a) > 1e-10; ++it) {
        c = (a * fb - b * fa) / (fb - fa);
        const double fc = imbalance(c);
        if (std::abs(fc) < 1e-12) break;
        if (fc * fb > 0.0) {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
        }
    }
    return trial(c);
}

inline GateParams calibrate_rabi(const GateParams &p, const PulseEnvelope &env, const IntegratorOptions &opt,
                                 bool rebalance_stark = true, int n = 0) {
    return calibrate_rabi(p, env, opt, rebalance_stark, FockMotion{n, 12});
}

// ---------------------------------------------------------------------------
// Scans

enum class ScanVariable { GlobalDetuning, AnalysisPhase, WaitTime, GateCount, Time };

inline const char *to_string(ScanVariable v) {
    switch (v) {
        case ScanVariable::GlobalDetuning: return "global_detuning";
        case ScanVariable::AnalysisPhase: return "analysis_phase";
        case ScanVariable::WaitTime: return "wait_time";
        case ScanVariable::GateCount: return "gate_count";
        case ScanVariable::Time: return "time";
    }
    return "";
}

/// Grid units: rad/s (global_detuning), rad (analysis_phase), s (wait_time, time), count (gate_count).
struct ScanSpec {
    ScanVariable variable = ScanVariable::Time;
    std::vector<double> grid;
    std::optional<int> shots;
    std::uint64_t seed = 0;

    void validate() const {
        if (grid.empty()) throw InputError("ScanSpec: empty grid");
        const bool up = grid.size() < 2 || grid[1] > grid[0];
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
                throw InputError("ScanSpec: grid must be strictly monotone");
            }
        }
        if (shots && *shots < 1) throw InputError("ScanSpec: shots must be >= 1");
        if (variable == ScanVariable::GateCount) {
            for (double g : grid) {
                if (g < 1.0 || g != std::floor(g)) throw InputError("ScanSpec: gate counts must be positive integers");
            }
        }
        if (variable == ScanVariable::WaitTime || variable == ScanVariable::Time) {
            for (double g : grid) {
                if (g < 0.0) throw InputError("ScanSpec: times must be >= 0");
            }
        }
    }
};

struct ScanRow {
    double value;
    double p0;
    double p1;
    double p2;
    std::optional<double> parity;
    std::optional<double> fidelity;
};

/// Per-point random stream, independent of evaluation order.
inline std::mt19937_64 point_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Multinomial draw of `shots` detection events, returned as frequencies.
inline Populations sample_populations(const Populations &p, int shots, std::mt19937_64 &rng) {
    auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const double q0 = clamp01(p.p0);
    const int k0 = std::binomial_distribution<int>(shots, q0)(rng);
    const double rest = 1.0 - q0;
    const double q1 = rest > 0.0 ? clamp01(p.p1 / rest) : 0.0;
    const int k1 = std::binomial_distribution<int>(shots - k0, q1)(rng);
    const int k2 = shots - k0 - k1;
    const double s = static_cast<double>(shots);
    return {k0 / s, k1 / s, k2 / s};
}

struct ScanOptions {
    IntegratorOptions integrator;
    int jobs = 1;
};

namespace detail {

inline IntegrationError annotate(const IntegrationError &e, ScanVariable v, double value) {
    return IntegrationError(e.kind(), std::string("scan ") + to_string(v) + " = " + std::to_string(value) + ": " +
                                          e.what());
}

}  // namespace detail

/**
 * Runs the sequence selected by `spec.variable` at every grid point:
 *
 *   global_detuning  one pulse with Delta_global shifted by the grid value
 *   analysis_phase   one pulse, then pi/2 analysis pulses of phase phi
 *   wait_time        pulse, free precession for tau, pulse
 *   gate_count       N consecutive pulses
 *   time             populations at times inside one pulse
 *
 * Rows carry populations and, where meaningful, parity and fidelity. With
 * shots set, populations are resampled from a stream seeded by (seed, index).
 */
inline std::vector<ScanRow> run_scan(const ScanSpec &spec, const GateParams &p, const PulseEnvelope &env,
                                     const Motional &motion, const ScanOptions &opt = {}) {
    spec.validate();
    p.validate();
    env.validate();
    const auto members = ensemble_members(p, motion);
    const std::size_t m = spec.grid.size();
    std::vector<ScanRow> rows(m);

    if (spec.variable == ScanVariable::Time) {
        IntegratorOptions o = opt.integrator;
        o.sample_every = 0.0;
        o.sample_times.clear();
        for (double t : spec.grid) {
            if (t > env.t_pulse * (1.0 + 1e-12)) throw InputError("run_scan: time beyond pulse end");
            o.sample_times.push_back(std::min(t, env.t_pulse));
        }
        const double t_end = *std::max_element(o.sample_times.begin(), o.sample_times.end());
        std::vector<std::vector<PopulationSample>> runs(members.size());
        try {
            parallel_for(members.size(), opt.jobs, [&](std::size_t i) {
                runs[i] = evolve(initial_state(members[i]), p, env, 0.0, t_end, o).samples;
            });
        } catch (const IntegrationError &e) {
            throw detail::annotate(e, spec.variable, t_end);
        }
        for (std::size_t k = 0; k < m; ++k) {
            const double t = std::min(spec.grid[k], env.t_pulse);
            ScanRow r{spec.grid[k], 0.0, 0.0, 0.0, std::nullopt, std::nullopt};
            for (std::size_t i = 0; i < members.size(); ++i) {
                const auto it = std::min_element(runs[i].begin(), runs[i].end(), [&](const auto &a, const auto &b) {
                    return std::abs(a.t - t) < std::abs(b.t - t);
                });
                r.p0 += members[i].weight * it->p0;
                r.p1 += members[i].weight * it->p1;
                r.p2 += members[i].weight * it->p2;
            }
            rows[k] = r;
        }
    } else {
        // Qubit densities per grid point; analysis_phase shares one gate run.
        std::vector<Operator> rho(m, Operator::Zero(4, 4));
        if (spec.variable == ScanVariable::AnalysisPhase) {
            const Operator g = gate_density(p, env, motion, opt.integrator, opt.jobs);
            for (auto &r : rho) r = g;
        } else if (spec.variable == ScanVariable::GlobalDetuning) {
            std::vector<Operator> part(m * members.size());
            try {
                parallel_for(part.size(), opt.jobs, [&](std::size_t idx) {
                    const std::size_t k = idx / members.size(), i = idx % members.size();
                    GateParams q = p;
                    q.delta_global += spec.grid[k];
                    StateVector s = initial_state(members[i]);
                    try {
                        apply_gate(GateHamiltonian(q, env, s.n_fock, s.fock_offset), s, opt.integrator);
                    } catch (const IntegrationError &e) {
                        throw detail::annotate(e, spec.variable, spec.grid[k]);
                    }
                    part[idx] = reduced_qubits(s);
                });
            } catch (...) {
                throw;
            }
            for (std::size_t idx = 0; idx < part.size(); ++idx) {
                rho[idx / members.size()] += members[idx % members.size()].weight * part[idx];
            }
        } else if (spec.variable == ScanVariable::WaitTime) {
            // First pulse once per member, then wait + second pulse per grid point.
            std::vector<StateVector> after_first(members.size());
            parallel_for(members.size(), opt.jobs, [&](std::size_t i) {
                StateVector s = initial_state(members[i]);
                apply_gate(GateHamiltonian(p, env, s.n_fock, s.fock_offset), s, opt.integrator);
                after_first[i] = std::move(s);
            });
            std::vector<Operator> part(m * members.size());
            parallel_for(part.size(), opt.jobs, [&](std::size_t idx) {
                const std::size_t k = idx / members.size(), i = idx % members.size();
                StateVector s = after_first[i];
                apply_wait(p, spec.grid[k], s);
                try {
                    apply_gate(GateHamiltonian(p, env, s.n_fock, s.fock_offset), s, opt.integrator);
                } catch (const IntegrationError &e) {
                    throw detail::annotate(e, spec.variable, spec.grid[k]);
                }
                part[idx] = reduced_qubits(s);
            });
            for (std::size_t idx = 0; idx < part.size(); ++idx) {
                rho[idx / members.size()] += members[idx % members.size()].weight * part[idx];
            }
        } else {  // GateCount
            std::vector<std::size_t> order(m);
            for (std::size_t k = 0; k < m; ++k) order[k] = k;
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return spec.grid[a] < spec.grid[b]; });
            std::vector<std::vector<Operator>> part(members.size(), std::vector<Operator>(m));
            parallel_for(members.size(), opt.jobs, [&](std::size_t i) {
                StateVector s = initial_state(members[i]);
                const GateHamiltonian h(p, env, s.n_fock, s.fock_offset);
                int done = 0;
                for (std::size_t k : order) {
                    const int target = static_cast<int>(spec.grid[k]);
                    try {
                        for (; done < target; ++done) apply_gate(h, s, opt.integrator);
                    } catch (const IntegrationError &e) {
                        throw detail::annotate(e, spec.variable, spec.grid[k]);
                    }
                    part[i][k] = reduced_qubits(s);
                }
            });
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t k = 0; k < m; ++k) rho[k] += members[i].weight * part[i][k];
            }
        }

        for (std::size_t k = 0; k < m; ++k) {
            ScanRow r{spec.grid[k], 0.0, 0.0, 0.0, std::nullopt, std::nullopt};
            if (spec.variable == ScanVariable::AnalysisPhase) {
                const Operator u = carrier_pulse(0.5 * kPi, spec.grid[k]);
                const Populations pop = populations_binned(Operator(u * rho[k] * u.adjoint()));
                r.p0 = pop.p0;
                r.p1 = pop.p1;
                r.p2 = pop.p2;
                r.parity = pop.p0 + pop.p2 - pop.p1;
            } else {
                const Populations pop = populations_binned(rho[k]);
                r.p0 = pop.p0;
                r.p1 = pop.p1;
                r.p2 = pop.p2;
                r.fidelity = parity_fidelity(rho[k]);
            }
            rows[k] = r;
        }
    }

    if (spec.shots) {
        for (std::size_t k = 0; k < m; ++k) {
            auto rng = point_rng(spec.seed, k);
            const Populations s = sample_populations({rows[k].p0, rows[k].p1, rows[k].p2}, *spec.shots, rng);
            rows[k].p0 = s.p0;
            rows[k].p1 = s.p1;
            rows[k].p2 = s.p2;
            if (rows[k].parity) rows[k].parity = s.p0 + s.p2 - s.p1;
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ramsey measurement of a residual light shift

struct RamseyResult {
    std::vector<ScanRow> rows;
    FitResult fit_p0;
    FitResult fit_p2;
    double period = 0.0;          ///< s, mean of the p0 and p2 fits
    double residual_shift = 0.0;  ///< rad/s, pi / period
};

/**
 * Two pulses separated by waits; the qubit is shifted by `residual_shift`
 * (rad/s) relative to the laser during pulses and waits. p0 and p2 oscillate
 * at twice the shift.
 */
inline RamseyResult ramsey_scan(const GateParams &p, const PulseEnvelope &env, double residual_shift,
                                const std::vector<double> &waits, const ScanOptions &opt = {}, int n = 0) {
    GateParams q = p;
    q.delta_global = p.delta_global - residual_shift;
    ScanSpec spec;
    spec.variable = ScanVariable::WaitTime;
    spec.grid = waits;
    RamseyResult r;
    r.rows = run_scan(spec, q, env, FockMotion{n, 12}, opt);
    std::vector<double> x, y0, y2;
    for (const auto &row : r.rows) {
        x.push_back(row.value);
        y0.push_back(row.p0);
        y2.push_back(row.p2);
    }
    r.fit_p0 = fit_oscillation(x, y0);
    r.fit_p2 = fit_oscillation(x, y2);
    r.period = 0.5 * (r.fit_p0["period"] + r.fit_p2["period"]);
    r.residual_shift = kPi / r.period;
    return r;
}

// ---------------------------------------------------------------------------
// Pulse-shaping diagnostics

/// Populations of the first `times` of a pulse, averaged over `n_zeta` equally spaced start phases.
inline std::vector<PopulationSample> zeta_averaged_populations(const GateParams &p, const PulseEnvelope &env,
                                                               const std::vector<double> &times, int n_zeta,
                                                               const IntegratorOptions &opt, int n = 0,
                                                               int jobs = 1) {
    if (n_zeta < 1) throw DomainError("zeta_averaged_populations: n_zeta must be >= 1");
    if (times.empty()) throw DomainError("zeta_averaged_populations: no sample times");
    IntegratorOptions o = opt;
    o.sample_every = 0.0;
    o.sample_times = times;
    const double t_end = *std::max_element(times.begin(), times.end());
    std::vector<std::vector<PopulationSample>> runs(n_zeta);
    parallel_for(static_cast<std::size_t>(n_zeta), jobs, [&](std::size_t k) {
        GateParams q = p;
        q.zeta = p.zeta + kTwoPi * static_cast<double>(k) / n_zeta;
        const EnsembleMember e = ensemble_members(q, FockMotion{n, 12}).front();
        runs[k] = evolve(initial_state(e), q, env, 0.0, t_end, o).samples;
    });
    std::vector<PopulationSample> out = runs.front();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].p0 = out[i].p1 = out[i].p2 = 0.0;
        for (const auto &r : runs) {
            out[i].p0 += r[i].p0 / n_zeta;
            out[i].p1 += r[i].p1 / n_zeta;
            out[i].p2 += r[i].p2 / n_zeta;
        }
    }
    return out;
}

/**
 * Peak-to-peak of the fast component of uniformly sampled populations: each
 * series minus its running mean over one `period`, largest of p0, p1, p2.
 * Samples within half a period of either end are excluded.
 */
inline double fast_oscillation_amplitude(const std::vector<PopulationSample> &s, double period) {
    if (s.size() < 3) throw DomainError("fast_oscillation_amplitude: need at least 3 samples");
    const double dt = s[1].t - s[0].t;
    const int half = static_cast<int>(std::lround(0.5 * period / dt));
    if (half < 1 || 2 * half + 1 > static_cast<int>(s.size())) {
        throw DomainError("fast_oscillation_amplitude: period not resolved by the samples");
    }
    double best = 0.0;
    for (int which = 0; which < 3; ++which) {
        auto val = [&](int i) { return which == 0 ? s[i].p0 : which == 1 ? s[i].p1 : s[i].p2; };
        double lo = 1e300, hi = -1e300;
        for (int i = half; i + half < static_cast<int>(s.size()); ++i) {
            double mean = 0.0;
            for (int j = i - half; j <= i + half; ++j) mean += val(j);
            mean /= (2 * half + 1);
            lo = std::min(lo, val(i) - mean);
            hi = std::max(hi, val(i) - mean);
        }
        best = std::max(best, hi - lo);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Repeated gates with noise

struct MultiGateRow {
    int n_gates;
    double fidelity;
    double parity_amplitude;
    double p0;
    double p1;
    double p2;
};

struct MultiGateResult {
    std::vector<MultiGateRow> rows;
    FitResult amplitude_gaussian;  ///< A(N) = A0 exp(-(N/N0)^2)
    FitResult amplitude_linear;    ///< A(N) = a + b N
    FitResult population_linear;   ///< p0 + p2 = a + b N
};

/// S^2 phase of one pulse from the closed-form factors of its envelope.
inline double gate_phase(const GateParams &p, const PulseEnvelope &env) {
    if (env.kind == PulseShape::Rectangular) return analytic_factors(p, env.t_pulse).gamma;
    return shaped_factors(p, env, env.t_pulse).gamma;
}

/**
 * Bell-state fidelity after 1, 3, 5, ... <= n_gates pulses from |dd>.
 *
 * Each pulse is the ideal exp(i gamma S_y^2) with gamma scaled by (1 + d)^2,
 * d a quasi-static relative Rabi offset drawn once per trial (normal, cut at
 * 4 sigma), optionally followed by a static detuning precession, then mixed
 * with the fully mixed state at weight `carrier_error_per_gate`. Densities
 * are averaged over trials before the fidelity is evaluated.
 */
inline MultiGateResult multi_gate(int n_gates, const GateParams &p, const PulseEnvelope &env, const NoiseModel &noise,
                                  int trials, int jobs = 1) {
    if (n_gates < 1) throw DomainError("multi_gate: n_gates must be >= 1");
    if (trials < 1) throw DomainError("multi_gate: trials must be >= 1");
    noise.validate();
    const double gamma0 = gate_phase(p, env);
    const Operator sy2 = [] {
        const Operator s = collective_spin(Axis::Y);
        return Operator(s * s);
    }();
    const Operator sz = collective_spin(Axis::Z);
    const Operator mixed = 0.25 * Operator::Identity(4, 4);
    const double w = noise.carrier_error_per_gate;

    std::vector<int> counts;
    for (int k = 1; k <= n_gates; k += 2) counts.push_back(k);

    std::vector<std::vector<Operator>> per_trial(trials);
    parallel_for(static_cast<std::size_t>(trials), jobs, [&](std::size_t tr) {
        auto rng = point_rng(noise.seed, tr);
        std::normal_distribution<double> gauss(0.0, 1.0);
        double z = 0.0;
        do {
            z = gauss(rng);
        } while (std::abs(z) > 4.0);
        const double d = noise.coupling_rel_sigma * z;
        const double det = noise.detuning_rms > 0.0 ? noise.detuning_rms * gauss(rng) : 0.0;
        const Operator gen = gamma0 * (1.0 + d) * (1.0 + d) * sy2 - 0.5 * det * env.t_pulse * sz;
        Eigen::SelfAdjointEigenSolver<Operator> eig(gen);
        const Operator u = eig.eigenvectors() *
                           (kI * eig.eigenvalues().cast<cplx>().array()).exp().matrix().asDiagonal() *
                           eig.eigenvectors().adjoint();
        Operator rho = density(qubit_basis(Qubits::DownDown));
        std::vector<Operator> out;
        int done = 0;
        for (int target : counts) {
            for (; done < target; ++done) rho = (1.0 - w) * (u * rho * u.adjoint()) + w * mixed;
            out.push_back(rho);
        }
        per_trial[tr] = std::move(out);
    });

    MultiGateResult res;
    std::vector<double> x, amp, pops;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        Operator rho = Operator::Zero(4, 4);
        for (const auto &t : per_trial) rho += t[k];
        rho /= static_cast<double>(trials);
        const Populations pop = populations_binned(rho);
        res.rows.push_back({counts[k], parity_fidelity(rho), parity_amplitude(rho), pop.p0, pop.p1, pop.p2});
        x.push_back(counts[k]);
        amp.push_back(parity_amplitude(rho));
        pops.push_back(pop.p0 + pop.p2);
    }
    if (counts.size() >= 3) {
        res.amplitude_gaussian = fit_gaussian_decay(x, amp);
        res.amplitude_linear = fit_linear(x, amp);
        res.population_linear = fit_linear(x, pops);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Error budget

/// Fidelity loss Gamma_h t_gate / 2 from motional heating at rate Gamma_h (quanta/s).
inline double heating_error(double heating_rate, double t_gate) {
    if (heating_rate < 0.0 || t_gate < 0.0) throw InputError("heating_error: inputs must be >= 0");
    return 0.5 * heating_rate * t_gate;
}

/// Bell fidelity after one pulse from |dd>|n>, measured by populations and parity.
inline double simulated_bell_fidelity(const GateParams &p, const PulseEnvelope &env, const IntegratorOptions &opt,
                                      int n = 0) {
    return parity_fidelity(gate_density(p, env, FockMotion{n, 12}, opt));
}

/// Fidelity deficit when ion 1 sees Omega sqrt(ratio) and ion 2 Omega / sqrt(ratio).
inline double coupling_imbalance_error(double ratio, const GateParams &p, const PulseEnvelope &env,
                                       const IntegratorOptions &opt) {
    if (!(ratio > 0.0)) throw InputError("coupling_imbalance_error: ratio must be > 0");
    GateParams ref = p;
    ref.coupling_ratio = 1.0;
    GateParams q = p;
    q.coupling_ratio = ratio;
    return simulated_bell_fidelity(ref, env, opt) - simulated_bell_fidelity(q, env, opt);
}

}  // namespace msgate
