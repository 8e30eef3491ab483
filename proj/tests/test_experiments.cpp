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

#include <gtest/gtest.h>

#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "msgate/experiments.hpp"

namespace msgate {
namespace {

constexpr double kKHz = kTwoPi * 1e3;

GateParams gate_params(double eps_khz = 20.0) {
    GateParams p;
    p.nu = 1230.0 * kKHz;
    p.epsilon = eps_khz * kKHz;
    p.eta = 0.044;
    p.omega = gate_rabi_frequency(p.epsilon, p.eta);
    return p;
}

double max_abs(const Operator &m) { return m.cwiseAbs().maxCoeff(); }

/// |<a|b>|^2 for normalised vectors.
double overlap(const Vector &a, const Vector &b) { return std::norm(a.dot(b)); }

Vector random_state(std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    Vector v(4);
    for (int i = 0; i < 4; ++i) v(i) = cplx(g(rng), g(rng));
    return v.normalized();
}

std::vector<double> uniform_phases(int m) {
    std::vector<double> phi(m);
    for (int i = 0; i < m; ++i) phi[i] = kPi * i / m;
    return phi;
}

TEST(CarrierPulse, ZeroAngleIsIdentity) {
    EXPECT_LT(max_abs(carrier_pulse(0.0, 0.7) - Operator::Identity(4, 4)), 1e-15);
}

TEST(CarrierPulse, FactorisesIntoSingleIonRotations) {
    for (double theta : {0.5 * kPi, kPi, 2.0 * kPi}) {
        for (double phi : {0.0, 0.4, -0.5 * kPi}) {
            const Operator gen = -kI * (0.5 * theta) * pauli::in_plane(phi);
            const Operator r = gen.exp();
            EXPECT_LT(max_abs(carrier_pulse(theta, phi) - kron(r, r)), 1e-12) << theta << " " << phi;
            if (theta == 2.0 * kPi) {
                EXPECT_LT(max_abs(r + Operator::Identity(2, 2)), 1e-12);
            }
        }
    }
}

// An analysis pulse of phase phi measures sigma_{phi - pi/2} (x) sigma_{phi - pi/2}.
TEST(CarrierPulse, AnalysedBellStateMatchesThermalParity) {
    const GateParams p = gate_params();
    const double tg = derived_params(p).t_gate;
    const Operator rho = density(ideal_gate_output());
    for (double phi : {0.0, 0.3, 0.9, 2.2}) {
        EXPECT_NEAR(parity_after_analysis(rho, phi), parity_thermal(phi - 0.5 * kPi, p, 0.0, tg), 1e-12) << phi;
        EXPECT_NEAR(parity_after_analysis(rho, phi), -parity_thermal(phi, p, 0.0, tg), 1e-12) << phi;
    }
}

TEST(PrepareDownUp, MapsDownDownToDownUp) {
    const Vector out = prepare_downup() * qubit_basis(Qubits::DownDown);
    EXPECT_NEAR(std::norm(out(static_cast<int>(Qubits::DownUp))), 1.0, 1e-14);
    EXPECT_NEAR(out.norm(), 1.0, 1e-14);
}

TEST(PrepareDownUp, PreparationError) {
    const Operator rho = prepared_density(prepare_downup(), 0.036);
    EXPECT_NEAR(overlap_fidelity(rho, qubit_basis(Qubits::DownUp)), 0.964, 1e-12);
    EXPECT_NEAR(std::real(rho.trace()), 1.0, 1e-14);
    EXPECT_THROW(prepared_density(prepare_downup(), 1.5), InputError);
}

TEST(PrepareDownUp, SequenceMapsGateOutputToEvenParity) {
    const double s = 1.0 / std::sqrt(2.0);
    Vector in = Vector::Zero(4), target = Vector::Zero(4);
    in(static_cast<int>(Qubits::UpDown)) = s;
    in(static_cast<int>(Qubits::DownUp)) = kI * s;
    target(static_cast<int>(Qubits::UpUp)) = s;
    target(static_cast<int>(Qubits::DownDown)) = kI * s;
    EXPECT_NEAR(overlap(prepare_downup() * in, target), 1.0, 1e-14);
}

TEST(PrepareDownUp, GateOnDownUpGivesOddBellState) {
    const GateParams p = gate_params();
    const Operator u = propagator_ms(p, derived_params(p).t_gate, 10);
    Vector in = Vector::Zero(40);
    in(static_cast<int>(Qubits::DownUp) * 10) = 1.0;
    const StateVector out{u * in, 10, 0};
    const Operator rho = reduced_qubits(out);
    EXPECT_NEAR(std::real(rho(1, 1)), 0.5, 1e-10);
    EXPECT_NEAR(std::real(rho(2, 2)), 0.5, 1e-10);
    EXPECT_NEAR(std::abs(rho(1, 2)), 0.5, 1e-10);
}

TEST(PopulationsBinned, Examples) {
    const Populations dd = populations_binned(qubit_basis(Qubits::DownDown));
    EXPECT_EQ(dd.p0, 0.0);
    EXPECT_EQ(dd.p1, 0.0);
    EXPECT_EQ(dd.p2, 1.0);
    const Populations bell = populations_binned(bell_state());
    EXPECT_NEAR(bell.p0, 0.5, 1e-15);
    EXPECT_NEAR(bell.p1, 0.0, 1e-15);
    EXPECT_NEAR(bell.p2, 0.5, 1e-15);
    const Populations du = populations_binned(qubit_basis(Qubits::DownUp));
    EXPECT_EQ(du.p1, 1.0);
    const Populations motion = populations_binned(product_state(Qubits::UpUp, 3, 8));
    EXPECT_NEAR(motion.p0, 1.0, 1e-15);
    EXPECT_THROW(populations_binned(Vector(Vector::Zero(3))), InputError);
}

TEST(BellFidelity, Examples) {
    EXPECT_DOUBLE_EQ(bell_fidelity(0.5, 0.5, 1.0), 1.0);
    EXPECT_NEAR(bell_fidelity(0.4925, 0.4925, 0.964), 0.9745, 1e-12);
    EXPECT_DOUBLE_EQ(bell_fidelity(0.3, 0.6, 0.0), 0.45);
    EXPECT_THROW(bell_fidelity(1.2, 0.0, 0.5), InputError);
    EXPECT_THROW(bell_fidelity(0.5, 0.5, -0.1), InputError);
    EXPECT_THROW(bell_fidelity(0.7, 0.7, 0.1), InputError);
}

TEST(BellFidelity, ParityMetricOnBellStates) {
    EXPECT_NEAR(parity_fidelity(density(bell_state())), 1.0, 1e-15);
    EXPECT_NEAR(parity_fidelity(density(ideal_gate_output())), 1.0, 1e-15);
    EXPECT_NEAR(overlap_fidelity(density(ideal_gate_output()), bell_state()), 0.0, 1e-15);
}

TEST(ParityRelation, FittedAmplitudeIsTwiceCoherence) {
    std::mt19937_64 rng(17);
    const std::vector<double> phi = uniform_phases(24);
    for (int trial = 0; trial < 20; ++trial) {
        const Operator rho = density(random_state(rng));
        std::vector<double> y;
        for (double f : phi) y.push_back(parity_after_analysis(rho, f));
        EXPECT_NEAR(fit_sinusoid(phi, y)["A"], parity_amplitude(rho), 1e-9) << trial;
    }
}

TEST(ShotNoise, BinomialSpreadOverSeeds) {
    const Populations p{0.3, 0.2, 0.5};
    const int shots = 100, seeds = 1000;
    double s0 = 0.0, s00 = 0.0, s2 = 0.0, s22 = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
        auto rng = point_rng(static_cast<std::uint64_t>(seed), 0);
        const Populations x = sample_populations(p, shots, rng);
        EXPECT_NEAR(x.p0 + x.p1 + x.p2, 1.0, 1e-12);
        s0 += x.p0;
        s00 += x.p0 * x.p0;
        s2 += x.p2;
        s22 += x.p2 * x.p2;
    }
    auto sd = [&](double s, double ss) { return std::sqrt((ss - s * s / seeds) / (seeds - 1)); };
    EXPECT_NEAR(sd(s0, s00) / std::sqrt(0.3 * 0.7 / shots), 1.0, 0.1);
    EXPECT_NEAR(sd(s2, s22) / std::sqrt(0.5 * 0.5 / shots), 1.0, 0.1);
    EXPECT_NEAR(s0 / seeds, 0.3, 0.01);
}

TEST(ShotNoise, StreamsDependOnSeedAndIndexOnly) {
    auto a = point_rng(5, 3), b = point_rng(5, 3), c = point_rng(5, 4);
    EXPECT_EQ(a(), b());
    EXPECT_NE(point_rng(5, 3)(), c());
}

TEST(RunScan, RejectsInvalidSpecs) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    EXPECT_THROW(run_scan(s, p, env, FockMotion{}), InputError);
    s.grid = {0.0, 1.0, 1.0};
    EXPECT_THROW(run_scan(s, p, env, FockMotion{}), InputError);
    s.variable = ScanVariable::GateCount;
    s.grid = {1.0, 2.5};
    EXPECT_THROW(run_scan(s, p, env, FockMotion{}), InputError);
    s.variable = ScanVariable::Time;
    s.grid = {0.0, 2.0 * env.t_pulse};
    EXPECT_THROW(run_scan(s, p, env, FockMotion{}), InputError);
}

TEST(RunScan, ParityScanFitsIdealAmplitude) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    s.variable = ScanVariable::AnalysisPhase;
    s.grid = uniform_phases(16);
    ScanOptions o;
    o.integrator.tol = 1e-9;
    const auto rows = run_scan(s, p, env, FockMotion{0, 12}, o);
    std::vector<double> phi, y;
    for (const auto &r : rows) {
        ASSERT_TRUE(r.parity.has_value());
        EXPECT_NEAR(*r.parity, r.p0 + r.p2 - r.p1, 1e-14);
        phi.push_back(r.value);
        y.push_back(*r.parity);
    }
    EXPECT_GT(fit_sinusoid(phi, y)["A"], 0.98);
}

TEST(RunScan, ShotsAreDeterministic) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    s.variable = ScanVariable::AnalysisPhase;
    s.grid = uniform_phases(8);
    s.shots = 100;
    s.seed = 42;
    ScanOptions serial, threaded;
    threaded.jobs = 3;
    const auto a = run_scan(s, p, env, FockMotion{}, serial);
    const auto b = run_scan(s, p, env, FockMotion{}, threaded);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].p0, b[k].p0);
        EXPECT_EQ(a[k].p1, b[k].p1);
        EXPECT_EQ(a[k].p2, b[k].p2);
        EXPECT_EQ(a[k].p0 * 100.0, std::round(a[k].p0 * 100.0));
    }
    s.seed = 43;
    const auto c = run_scan(s, p, env, FockMotion{}, serial);
    bool differs = false;
    for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].p0 != c[k].p0;
    EXPECT_TRUE(differs);
}

TEST(RunScan, GateCountSwapsEvenCounts) {
    const GateParams p = calibrate_rabi(gate_params(), PulseEnvelope::rectangular(50e-6), IntegratorOptions{}, false);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    s.variable = ScanVariable::GateCount;
    s.grid = {1.0, 2.0, 3.0};
    const auto rows = run_scan(s, p, env, FockMotion{}, {});
    EXPECT_GT(*rows[0].fidelity, 0.99);
    EXPECT_GT(rows[1].p0, 0.99);
    EXPECT_GT(*rows[2].fidelity, 0.99);
}

TEST(RunScan, GateCountAlgebraOfIdealGate) {
    const GateParams p = gate_params();
    const Operator u = propagator_ms(p, derived_params(p).t_gate, 8);
    Vector s = Vector::Zero(32);
    s(static_cast<int>(Qubits::DownDown) * 8) = 1.0;
    for (int k = 1; k <= 6; ++k) {
        s = u * s;
        const Operator rho = reduced_qubits(StateVector{s, 8, 0});
        if (k % 2 == 1) {
            EXPECT_NEAR(parity_fidelity(rho), 1.0, 1e-12) << k;
        } else {
            const Qubits expected = k % 4 == 2 ? Qubits::UpUp : Qubits::DownDown;
            EXPECT_NEAR(std::real(rho(static_cast<int>(expected), static_cast<int>(expected))), 1.0, 1e-12) << k;
        }
    }
}

TEST(RunScan, TimeScanMatchesSingleRun) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    s.variable = ScanVariable::Time;
    s.grid = {0.0, 10e-6, 25e-6, env.t_pulse};
    const auto rows = run_scan(s, p, env, FockMotion{}, {});
    IntegratorOptions o;
    o.sample_times = {10e-6, 25e-6};
    const EvolveReport r = evolve(product_state(Qubits::DownDown, 0, 13), p, env, 0.0, env.t_pulse, o);
    ASSERT_EQ(r.samples.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(rows[k].p1, r.samples[k].p1, 1e-14);
        EXPECT_NEAR(rows[k].p2, r.samples[k].p2, 1e-14);
    }
}

double p1_minimum(const std::vector<ScanRow> &rows) {
    std::size_t k = 1;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        if (rows[i].p1 < rows[k].p1) k = i;
    }
    const double y0 = rows[k - 1].p1, y1 = rows[k].p1, y2 = rows[k + 1].p1;
    const double h = rows[k + 1].value - rows[k].value;
    return rows[k].value + 0.5 * h * (y0 - y2) / (y0 - 2.0 * y1 + y2);
}

/// Position of the p1 minimum of a 25-point scan centred on `centre` (rad/s).
double p1_minimum_near(const GateParams &p, double centre) {
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ScanSpec s;
    s.variable = ScanVariable::GlobalDetuning;
    for (int i = -12; i <= 12; ++i) s.grid.push_back(centre + i * 1.0 * kKHz);
    ScanOptions o;
    o.integrator.tol = 1e-8;
    return p1_minimum(run_scan(s, p, env, FockMotion{}, o));
}

// The uncalibrated short gate is not symmetric in detuning, so shifts are
// measured against a reference scan.
TEST(RunScan, DipoleShiftMovesDetuningPattern) {
    GateParams p = gate_params(40.0);
    const double ref = p1_minimum_near(p, -9.5 * kKHz);
    p.delta_ac = 4.0 * kKHz;
    EXPECT_NEAR(p1_minimum_near(p, ref + p.delta_ac) - ref, p.delta_ac, 1e-3 * p.delta_ac);
}

TEST(RunScan, ImbalanceShiftsPatternAndDipoleShiftRestoresIt) {
    GateParams p = gate_params(40.0);
    const double ref = p1_minimum_near(p, -9.5 * kKHz);
    p.xi = 0.02;
    const double shift = carrier_stark_shift(p);
    EXPECT_NEAR(p1_minimum_near(p, ref + shift) - ref, shift, 0.05 * std::abs(shift));
    p.delta_ac = balanced_dipole_shift(p);
    EXPECT_NEAR(p1_minimum_near(p, ref) - ref, 0.0, 0.05 * std::abs(shift));
}

TEST(MultiGate, NoiseFreeSingleGateIsPerfect) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    const MultiGateResult r = multi_gate(5, p, env, NoiseModel{}, 3);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_EQ(r.rows[0].n_gates, 1);
    EXPECT_EQ(r.rows[2].n_gates, 5);
    for (const auto &row : r.rows) EXPECT_GT(row.fidelity, 1.0 - 1e-3);
    EXPECT_NEAR(r.rows[0].fidelity, 1.0, 1e-12);
}

TEST(MultiGate, NoisyDecayAndGaussianShape) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    NoiseModel noise;
    noise.coupling_rel_sigma = 1.4e-2;
    noise.carrier_error_per_gate = 2e-3;
    noise.seed = 7;
    const MultiGateResult r = multi_gate(21, p, env, noise, 400, 2);
    ASSERT_EQ(r.rows.back().n_gates, 21);
    EXPECT_GE(r.rows.back().fidelity, 0.78);
    EXPECT_LE(r.rows.back().fidelity, 0.88);
    EXPECT_GT(r.amplitude_linear.rms_residual / r.amplitude_gaussian.rms_residual, 2.0);
    for (std::size_t k = 1; k < r.rows.size(); ++k) EXPECT_LT(r.rows[k].fidelity, r.rows[k - 1].fidelity);
    EXPECT_LT(r.population_linear["slope"], 0.0);
}

TEST(MultiGate, ReproducibleAcrossThreadCounts) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    NoiseModel noise;
    noise.coupling_rel_sigma = 0.02;
    noise.detuning_rms = 0.1 * kKHz;
    noise.seed = 3;
    const MultiGateResult a = multi_gate(9, p, env, noise, 50, 1), b = multi_gate(9, p, env, noise, 50, 4);
    for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].fidelity, b.rows[k].fidelity);
    EXPECT_THROW(multi_gate(0, p, env, noise, 5), DomainError);
    EXPECT_THROW(multi_gate(3, p, env, noise, 0), DomainError);
}

TEST(ErrorBudget, HeatingError) {
    EXPECT_NEAR(heating_error(3.0, 50e-6), 7.5e-5, 1e-18);
    EXPECT_EQ(heating_error(0.0, 50e-6), 0.0);
    EXPECT_DOUBLE_EQ(heating_error(3.0, 100e-6), 2.0 * heating_error(3.0, 50e-6));
    EXPECT_THROW(heating_error(-1.0, 1e-6), InputError);
}

TEST(ErrorBudget, CouplingImbalance) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    IntegratorOptions o;
    o.tol = 1e-10;
    EXPECT_LT(std::abs(coupling_imbalance_error(1.0, p, env, o)), 1e-6);
    EXPECT_LT(coupling_imbalance_error(1.04, p, env, o), 1e-4);
    double last = -1.0;
    for (double ratio : {1.0, 1.05, 1.1, 1.15, 1.2}) {
        const double d = coupling_imbalance_error(ratio, p, env, o);
        EXPECT_GT(d, last) << ratio;
        last = d;
    }
    EXPECT_THROW(coupling_imbalance_error(0.0, p, env, o), InputError);
}

}  // namespace
}  // namespace msgate
