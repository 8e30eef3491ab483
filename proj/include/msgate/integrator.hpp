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
 * Schroedinger evolution under the full bichromatic Hamiltonian.
 *
 * Dormand-Prince 5(4) with FSAL and a PI step controller. The step is capped
 * at a twentieth of the trap period so the e^{i nu t} rotation of the
 * Lamb-Dicke factor is always resolved.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "msgate/errors.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/hilbert.hpp"
#include "msgate/parallel.hpp"
#include "msgate/thermal.hpp"

namespace msgate {

struct PopulationSample {
    double t;
    double p0;  ///< |uu>
    double p1;  ///< |ud> + |du>
    double p2;  ///< |dd>
};

struct EvolveReport {
    std::optional<StateVector> final_state;  ///< empty for ensemble runs
    Operator qubit_density;                  ///< 4x4, ensemble-averaged for thermal runs
    std::vector<PopulationSample> samples;
    double norm_drift = 0.0;
    long steps_taken = 0;
};

struct IntegratorOptions {
    double tol = 1e-9;
    /// Sample spacing; 0 records only t0 and t1.
    double sample_every = 0.0;
    /// Extra sample times inside [t0, t1], merged with the regular grid.
    std::vector<double> sample_times;
    /// Classical RK4 with step <= fixed_step instead of adaptive control (0 = adaptive).
    double fixed_step = 0.0;
    double max_norm_drift = 1e-6;

    void validate() const {
        if (!(tol >= 1e-12 && tol <= 1e-6)) throw DomainError("IntegratorOptions: tol must be in [1e-12, 1e-6]");
        if (sample_every < 0.0) throw DomainError("IntegratorOptions: sample_every must be >= 0");
        if (fixed_step < 0.0) throw DomainError("IntegratorOptions: fixed_step must be >= 0");
    }
};

/// Binned populations of a 4x4 qubit density matrix.
inline PopulationSample binned_populations(double t, const Operator &rho) {
    return {t, std::real(rho(0, 0)), std::real(rho(1, 1) + rho(2, 2)), std::real(rho(3, 3))};
}

namespace detail {

inline std::vector<double> sample_grid(double t0, double t1, const IntegratorOptions &opt) {
    std::vector<double> grid{t0};
    if (opt.sample_every > 0.0) {
        const long n = static_cast<long>(std::floor((t1 - t0) / opt.sample_every + 1e-9));
        for (long i = 1; i <= n; ++i) grid.push_back(t0 + i * opt.sample_every);
    }
    for (double t : opt.sample_times) {
        if (t < t0 || t > t1) throw DomainError("evolve: sample time outside t_span");
        grid.push_back(t);
    }
    grid.push_back(t1);
    std::sort(grid.begin(), grid.end());
    const double merge = 1e-12 * std::max(std::abs(t1), std::abs(t1 - t0));
    std::vector<double> out;
    for (double t : grid) {
        if (out.empty() || t - out.back() > merge) out.push_back(t);
        else out.back() = std::max(out.back(), t);
    }
    return out;
}

/// max |err_i| / (atol + rtol max(|y_i|, |y_new_i|)).
inline double error_norm(const Vector &err, const Vector &y, const Vector &y_new, double tol) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = tol + tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
        worst = std::max(worst, std::abs(err(i)) / sc);
    }
    return worst;
}

/// dpsi/dt = -i H(t) psi.
inline void schroedinger_rhs(const GateHamiltonian &h, double t, const Vector &psi, Vector &out) {
    h.apply(t, psi, out);
    out *= -kI;
}

}  // namespace detail

/**
 * Integrates i dpsi/dt = H(t) psi from t0 to t1 (hbar = 1, H in rad/s).
 *
 * Throws IntegrationError(StepUnderflow) when the controller asks for a step
 * below 1e-4 / nu and IntegrationError(NormDrift) when |psi| leaves 1 by more
 * than `max_norm_drift`.
 */
inline EvolveReport evolve(const StateVector &psi0, const GateHamiltonian &h, double t0, double t1,
                           const IntegratorOptions &opt) {
    opt.validate();
    if (psi0.dim() != h.dim() || psi0.n_fock != h.n_fock() || psi0.fock_offset != h.window_offset()) {
        throw DomainError("evolve: state and Hamiltonian windows differ");
    }
    const double norm0 = psi0.norm();
    if (std::abs(norm0 - 1.0) > opt.max_norm_drift) throw DomainError("evolve: psi0 not normalised");
    if (!(t1 >= t0)) throw DomainError("evolve: need t1 >= t0");

    const GateParams &p = h.params();
    const double h_max = kTwoPi / p.nu / 20.0;
    const double h_min = 1e-4 / p.nu;
    // Per-step tolerance; global error over a gate then stays near tol.
    const double local_tol = 0.1 * opt.tol;
    const std::vector<double> grid = detail::sample_grid(t0, t1, opt);

    EvolveReport rep;
    Vector y = psi0.amplitudes;
    const int n = psi0.n_fock;
    double max_drift = 0.0;

    auto record = [&](double t) {
        StateVector s{y, n, psi0.fock_offset};
        rep.samples.push_back(binned_populations(t, reduced_qubits(s)));
        max_drift = std::max(max_drift, std::abs(y.norm() - norm0));
        if (max_drift > opt.max_norm_drift) {
            throw IntegrationError(IntegrationError::Kind::NormDrift,
                                   "evolve: norm drift " + std::to_string(max_drift) + " at t = " +
                                       std::to_string(t));
        }
    };
    record(grid.front());

    if (opt.fixed_step > 0.0) {
        Vector k1, k2, k3, k4, tmp;
        for (std::size_t g = 1; g < grid.size(); ++g) {
            const double a = grid[g - 1], b = grid[g];
            const long m = std::max(1L, static_cast<long>(std::ceil((b - a) / opt.fixed_step - 1e-9)));
            const double dt = (b - a) / m;
            for (long i = 0; i < m; ++i) {
                const double t = a + i * dt;
                detail::schroedinger_rhs(h, t, y, k1);
                tmp = y + 0.5 * dt * k1;
                detail::schroedinger_rhs(h, t + 0.5 * dt, tmp, k2);
                tmp = y + 0.5 * dt * k2;
                detail::schroedinger_rhs(h, t + 0.5 * dt, tmp, k3);
                tmp = y + dt * k3;
                detail::schroedinger_rhs(h, t + dt, tmp, k4);
                y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                ++rep.steps_taken;
            }
            record(b);
        }
    } else {
        // Dormand-Prince tableau.
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                         a65 = -5103.0 / 18656;
        constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                         b6 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                         e6 = 22.0 / 525, e7 = -1.0 / 40;
        constexpr double beta = 0.04, expo = 0.2 - 0.75 * beta, safety = 0.9;

        Vector k1, k2, k3, k4, k5, k6, k7, tmp, y_new, err;
        double t = t0;
        double step = h_max / 8.0;
        double err_old = 1e-4;
        detail::schroedinger_rhs(h, t, y, k1);
        for (std::size_t g = 1; g < grid.size(); ++g) {
            const double target = grid[g];
            while (t < target) {
                bool clipped = false;
                double dt = std::min(step, h_max);
                if (t + dt >= target - 1e-12 * dt) {
                    dt = target - t;
                    clipped = true;
                }
                tmp = y + dt * a21 * k1;
                detail::schroedinger_rhs(h, t + c2 * dt, tmp, k2);
                tmp = y + dt * (a31 * k1 + a32 * k2);
                detail::schroedinger_rhs(h, t + c3 * dt, tmp, k3);
                tmp = y + dt * (a41 * k1 + a42 * k2 + a43 * k3);
                detail::schroedinger_rhs(h, t + c4 * dt, tmp, k4);
                tmp = y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
                detail::schroedinger_rhs(h, t + c5 * dt, tmp, k5);
                tmp = y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
                detail::schroedinger_rhs(h, t + dt, tmp, k6);
                y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
                detail::schroedinger_rhs(h, t + dt, y_new, k7);
                err = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                const double en = detail::error_norm(err, y, y_new, local_tol);

                if (en <= 1.0) {
                    t = clipped ? target : t + dt;
                    y.swap(y_new);
                    k1.swap(k7);
                    ++rep.steps_taken;
                    double fac = en > 0.0 ? safety * std::pow(en, -expo) * std::pow(err_old, beta) : 5.0;
                    fac = std::clamp(fac, 0.2, 5.0);
                    if (!clipped || dt * fac > step) step = dt * fac;
                    err_old = std::max(en, 1e-4);
                } else {
                    const double fac = std::max(0.2, safety * std::pow(en, -0.2));
                    step = dt * fac;
                }
                if (step < h_min && t < target) {
                    throw IntegrationError(IntegrationError::Kind::StepUnderflow,
                                           "evolve: step size " + std::to_string(step) + " below " +
                                               std::to_string(h_min) + " at t = " + std::to_string(t));
                }
            }
            record(target);
        }
    }

    rep.norm_drift = max_drift;
    StateVector fin{y, n, psi0.fock_offset};
    rep.qubit_density = reduced_qubits(fin);
    rep.final_state = std::move(fin);
    return rep;
}

inline EvolveReport evolve(const StateVector &psi0, const GateParams &p, const PulseEnvelope &env,
                           double t0, double t1, const IntegratorOptions &opt) {
    const GateHamiltonian h(p, env, psi0.n_fock, psi0.fock_offset);
    return evolve(psi0, h, t0, t1, opt);
}

inline EvolveReport evolve(const StateVector &psi0, const GateParams &p, const PulseEnvelope &env,
                           double t0, double t1, double tol, double sample_every) {
    IntegratorOptions opt;
    opt.tol = tol;
    opt.sample_every = sample_every;
    return evolve(psi0, p, env, t0, t1, opt);
}

/// Largest |2 alpha| the gate can reach: 4 eta Omega_max / |eps|, for any envelope bounded by 1.
inline double max_displacement(const GateParams &p) {
    if (p.epsilon == 0.0) throw DomainError("max_displacement: epsilon = 0");
    const double r = std::sqrt(p.coupling_ratio);
    const double ion = std::max(r, 1.0 / r);
    return 4.0 * p.eta * p.omega * (1.0 + std::abs(p.xi)) * ion / std::abs(p.epsilon);
}

/// Half-width that keeps |n> displaced by up to b inside the window, with 3 spare levels.
inline int required_window(const GateParams &p, int n) {
    const double b = max_displacement(p);
    return static_cast<int>(std::ceil(2.0 * b * std::sqrt(n + 1.0) + b * b)) + 3;
}

struct FockWindow {
    int offset;
    int n_fock;
};

/// [max(0, n - w), n + w] with w widened to `required_window` when auto_window is set.
inline FockWindow thermal_window(const GateParams &p, const ThermalSpec &spec, int n) {
    const int need = required_window(p, n);
    int w = spec.window;
    if (w < need) {
        if (!spec.auto_window) {
            throw TruncationError("thermal window " + std::to_string(w) + " too small for n = " +
                                  std::to_string(n) + ", need " + std::to_string(need));
        }
        w = need;
    }
    const int lo = std::max(0, n - w);
    return {lo, n + w - lo + 1};
}

/**
 * Weighted average over |dd>|n> runs, one per thermal Fock level above the
 * cutoff. Runs are spread over `jobs` threads and reduced in ascending n, so
 * the result does not depend on scheduling.
 */
inline EvolveReport evolve_thermal(const GateParams &p, const PulseEnvelope &env, const ThermalSpec &spec,
                                   double t0, double t1, const IntegratorOptions &opt, int jobs = 1) {
    spec.validate();
    opt.validate();
    const std::vector<FockWeight> weights = thermal_weights(spec);
    std::vector<FockWindow> windows;
    for (const auto &w : weights) windows.push_back(thermal_window(p, spec, w.n));

    std::vector<EvolveReport> runs(weights.size());
    parallel_for(weights.size(), jobs, [&](std::size_t i) {
        const FockWindow &fw = windows[i];
        runs[i] = evolve(product_state(Qubits::DownDown, weights[i].n, fw.n_fock, fw.offset), p, env, t0, t1, opt);
        runs[i].final_state.reset();
    });

    EvolveReport out;
    out.qubit_density = Operator::Zero(4, 4);
    out.samples = runs.front().samples;
    for (auto &s : out.samples) s.p0 = s.p1 = s.p2 = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const double w = weights[i].weight;
        out.qubit_density += w * runs[i].qubit_density;
        for (std::size_t k = 0; k < out.samples.size(); ++k) {
            out.samples[k].p0 += w * runs[i].samples[k].p0;
            out.samples[k].p1 += w * runs[i].samples[k].p1;
            out.samples[k].p2 += w * runs[i].samples[k].p2;
        }
        out.norm_drift = std::max(out.norm_drift, runs[i].norm_drift);
        out.steps_taken += runs[i].steps_taken;
    }
    return out;
}

inline EvolveReport evolve_thermal(const GateParams &p, const PulseEnvelope &env, const ThermalSpec &spec,
                                   double t0, double t1, double tol, double sample_every, int jobs = 1) {
    IntegratorOptions opt;
    opt.tol = tol;
    opt.sample_every = sample_every;
    return evolve_thermal(p, env, spec, t0, t1, opt, jobs);
}

}  // namespace msgate
