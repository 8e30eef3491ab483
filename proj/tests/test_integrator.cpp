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

#include "msgate/experiments.hpp"
#include "msgate/integrator.hpp"
#include "msgate/propagator.hpp"
#include "msgate/thermal.hpp"

namespace msgate {
namespace {

constexpr double kKHz = kTwoPi * 1e3;

GateParams gate_params() {
    GateParams p;
    p.nu = 1230.0 * kKHz;
    p.epsilon = 20.0 * kKHz;
    p.eta = 0.044;
    p.omega = gate_rabi_frequency(p.epsilon, p.eta);
    return p;
}

/// Balanced AC shift with the sideband shift of |n> taken out.
GateParams shifted_params(int n) {
    GateParams p = gate_params();
    p.delta_ac = balanced_dipole_shift(p);
    p.delta_global = sideband_stark_shift(p, n);
    return p;
}

TEST(Evolve, ZeroDriveLeavesStateUnchanged) {
    GateParams p = gate_params();
    p.omega = 0.0;
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(gate_params()).t_gate);
    const StateVector s0 = product_state(Qubits::DownDown, 2, 10);
    const EvolveReport r = evolve(s0, p, env, 0.0, env.t_pulse, 1e-10, 5e-6);
    EXPECT_LT((r.final_state->amplitudes - s0.amplitudes).norm(), 1e-12);
    for (const auto &s : r.samples) {
        EXPECT_NEAR(s.p2, 1.0, 1e-12);
        EXPECT_NEAR(s.p0 + s.p1, 0.0, 1e-12);
    }
}

TEST(Evolve, ZeroDriveStarkPhaseIsExact) {
    GateParams p = gate_params();
    p.omega = 0.0;
    p.delta_global = 3.0 * kKHz;
    const PulseEnvelope env = PulseEnvelope::rectangular(40e-6);
    const int n = 4;
    Vector q(4);
    q << 0.5, 0.5, 0.5, 0.5;
    Vector amp = Vector::Zero(4 * n);
    for (int i = 0; i < 4; ++i) amp(i * n + 1) = q(i);
    const StateVector s0{amp, n, 0};
    const double t = env.t_pulse;
    const EvolveReport r = evolve(s0, p, env, 0.0, t, 1e-10, 0.0);
    // H = -delta_global/2 S_z.
    const double sz[4] = {2.0, 0.0, 0.0, -2.0};
    for (int i = 0; i < 4; ++i) {
        const cplx expected = q(i) * std::exp(kI * 0.5 * p.delta_global * sz[i] * t);
        EXPECT_LT(std::abs(r.final_state->amplitudes(i * n + 1) - expected), 1e-8) << i;
    }
}

TEST(Evolve, NormDriftBelowBound) {
    const GateParams p = shifted_params(0);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    const EvolveReport r = evolve(product_state(Qubits::DownDown, 0, 13), p, env, 0.0, env.t_pulse, 1e-10, 0.0);
    EXPECT_LT(r.norm_drift, 1e-8);
    EXPECT_GT(r.steps_taken, 0);
}

TEST(Evolve, ToleranceHalvingConverges) {
    const GateParams p = shifted_params(0);
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    const StateVector s0 = product_state(Qubits::DownDown, 0, 13);
    for (double tol : {1e-7, 1e-8, 1e-9}) {
        const Operator a = evolve(s0, p, env, 0.0, env.t_pulse, tol, 0.0).qubit_density;
        const Operator b = evolve(s0, p, env, 0.0, env.t_pulse, tol / 2.0, 0.0).qubit_density;
        for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(a(i, i) - b(i, i)), 10.0 * tol) << tol;
    }
}

TEST(Evolve, AdaptiveAgreesWithFixedStep) {
    const GateParams p = shifted_params(1);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    const StateVector s0 = product_state(Qubits::DownDown, 1, 14);
    IntegratorOptions fixed;
    fixed.fixed_step = kTwoPi / p.nu / 200.0;
    const Vector a = evolve(s0, p, env, 0.0, env.t_pulse, 1e-10, 0.0).final_state->amplitudes;
    const Vector b = evolve(s0, p, env, 0.0, env.t_pulse, fixed).final_state->amplitudes;
    EXPECT_LT((a - b).norm(), 1e-7);
}

TEST(Evolve, MatchesEffectivePropagatorForShapedPulse) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    const int n_fock = 14;
    const StateVector s0 = product_state(Qubits::DownDown, 0, n_fock);
    const EvolveReport r = evolve(s0, p, env, 0.0, env.t_pulse, 1e-10, 0.0);
    const Vector oracle = propagator_from_factors(shaped_factors(p, env, env.t_pulse), n_fock) * s0.amplitudes;
    EXPECT_GT(std::norm(oracle.dot(r.final_state->amplitudes)), 1.0 - 1e-3);
}

TEST(Evolve, MatchesEffectivePropagatorWithShiftRemoved) {
    for (int n : {0, 1, 5}) {
        const GateParams p = shifted_params(n);
        const double tg = derived_params(p).t_gate;
        const int n_fock = n + 14;
        const StateVector s0 = product_state(Qubits::DownDown, n, n_fock);
        const EvolveReport r = evolve(s0, p, PulseEnvelope::rectangular(tg), 0.0, tg, 1e-10, 0.0);
        const Vector oracle = propagator_ms(p, tg, n_fock) * s0.amplitudes;
        // Lamb-Dicke corrections grow with n.
        EXPECT_GT(std::norm(oracle.dot(r.final_state->amplitudes)), 1.0 - 2e-3 * (1.0 + n / 5.0)) << n;
    }
}

TEST(Evolve, SampleGrid) {
    IntegratorOptions o;
    o.sample_every = 1.0;
    o.sample_times = {2.5, 3.0};
    const std::vector<double> g = detail::sample_grid(0.0, 4.2, o);
    const std::vector<double> expected{0.0, 1.0, 2.0, 2.5, 3.0, 4.0, 4.2};
    ASSERT_EQ(g.size(), expected.size());
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], expected[i]);
    o.sample_times = {5.0};
    EXPECT_THROW(detail::sample_grid(0.0, 4.2, o), DomainError);
}

TEST(Evolve, SamplesLandOnRequestedTimes) {
    const GateParams p = shifted_params(0);
    const double tg = derived_params(p).t_gate;
    const PulseEnvelope env = PulseEnvelope::rectangular(tg);
    const EvolveReport r = evolve(product_state(Qubits::DownDown, 0, 13), p, env, 0.0, tg, 1e-9, tg / 4.0);
    ASSERT_EQ(r.samples.size(), 5u);
    EXPECT_DOUBLE_EQ(r.samples.back().t, tg);
    // The fast-term propagator tracks the samples between carrier periods.
    for (const auto &x : r.samples) {
        const StateVector s0 = product_state(Qubits::DownDown, 0, 13);
        const StateVector ref{propagator_mod(p, x.t, 13) * s0.amplitudes, 13, 0};
        const Operator rho = reduced_qubits(ref);
        EXPECT_NEAR(x.p1, std::real(rho(1, 1) + rho(2, 2)), 5e-3) << x.t;
        EXPECT_NEAR(x.p0 + x.p2, std::real(rho(0, 0) + rho(3, 3)), 5e-3) << x.t;
    }
}

TEST(Evolve, ValidatesInputs) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::rectangular(10e-6);
    const StateVector s0 = product_state(Qubits::DownDown, 0, 13);
    EXPECT_THROW(evolve(s0, p, env, 0.0, 1e-6, 1e-13, 0.0), DomainError);
    EXPECT_THROW(evolve(s0, p, env, 0.0, 1e-6, 1e-5, 0.0), DomainError);
    EXPECT_THROW(evolve(s0, p, env, 1e-6, 0.0, 1e-9, 0.0), DomainError);
    StateVector bad = s0;
    bad.amplitudes *= 2.0;
    EXPECT_THROW(evolve(bad, p, env, 0.0, 1e-6, 1e-9, 0.0), DomainError);
    const GateHamiltonian h(p, env, 10, 0);
    IntegratorOptions o;
    EXPECT_THROW(evolve(s0, h, 0.0, 1e-6, o), DomainError);
}

TEST(Evolve, StiffDriveUnderflows) {
    GateParams p = gate_params();
    p.omega = 1e5 * p.nu;
    const PulseEnvelope env = PulseEnvelope::rectangular(10e-6);
    try {
        evolve(product_state(Qubits::DownDown, 0, 13), p, env, 0.0, 10e-6, 1e-10, 0.0);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError &e) {
        EXPECT_EQ(e.kind(), IntegrationError::Kind::StepUnderflow);
        EXPECT_TRUE(e.stiffness());
    }
}

TEST(Evolve, CoarseFixedStepReportsNormDrift) {
    const GateParams p = shifted_params(0);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    IntegratorOptions o;
    o.fixed_step = 4.0 / p.nu;
    try {
        evolve(product_state(Qubits::DownDown, 0, 13), p, env, 0.0, env.t_pulse, o);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError &e) {
        EXPECT_EQ(e.kind(), IntegrationError::Kind::NormDrift);
        EXPECT_FALSE(e.stiffness());
    }
}

TEST(Window, RequiredWindowCoversDisplacement) {
    const GateParams p = gate_params();
    EXPECT_NEAR(max_displacement(p), 1.0, 1e-12);
    EXPECT_GE(thermal_window(p, ThermalSpec{}, 0).n_fock, 13);
    const FockWindow w = thermal_window(p, ThermalSpec{}, 100);
    EXPECT_LE(w.offset, 100 - required_window(p, 100));
    EXPECT_GE(w.offset + w.n_fock - 1, 100 + required_window(p, 100));
    ThermalSpec fixed;
    fixed.auto_window = false;
    EXPECT_THROW(thermal_window(p, fixed, 100), TruncationError);
}

TEST(EvolveThermal, GroundStateLimitMatchesSingleRun) {
    const GateParams p = shifted_params(0);
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    const FockWindow w = thermal_window(p, ThermalSpec{}, 0);
    const EvolveReport a = evolve_thermal(p, env, ThermalSpec{0.0}, 0.0, env.t_pulse, 1e-9, 0.0);
    const EvolveReport b =
        evolve(product_state(Qubits::DownDown, 0, w.n_fock, w.offset), p, env, 0.0, env.t_pulse, 1e-9, 0.0);
    EXPECT_LT((a.qubit_density - b.qubit_density).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_FALSE(a.final_state.has_value());
}

TEST(EvolveThermal, WindowConvergence) {
    const GateParams p = shifted_params(2);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    ThermalSpec a{2.0, 1e-3, 12, true}, b{2.0, 1e-3, 18, true};
    const EvolveReport ra = evolve_thermal(p, env, a, 0.0, env.t_pulse, 1e-9, env.t_pulse / 4.0);
    const EvolveReport rb = evolve_thermal(p, env, b, 0.0, env.t_pulse, 1e-9, env.t_pulse / 4.0);
    ASSERT_EQ(ra.samples.size(), rb.samples.size());
    for (std::size_t k = 0; k < ra.samples.size(); ++k) {
        EXPECT_LT(std::abs(ra.samples[k].p0 - rb.samples[k].p0), 1e-4);
        EXPECT_LT(std::abs(ra.samples[k].p1 - rb.samples[k].p1), 1e-4);
        EXPECT_LT(std::abs(ra.samples[k].p2 - rb.samples[k].p2), 1e-4);
    }
}

TEST(EvolveThermal, ResultIndependentOfThreadCount) {
    const GateParams p = shifted_params(1);
    const PulseEnvelope env = PulseEnvelope::rectangular(derived_params(p).t_gate);
    const ThermalSpec spec{1.0, 1e-2};
    const EvolveReport a = evolve_thermal(p, env, spec, 0.0, env.t_pulse, 1e-8, 0.0, 1);
    const EvolveReport b = evolve_thermal(p, env, spec, 0.0, env.t_pulse, 1e-8, 0.0, 3);
    EXPECT_EQ((a.qubit_density - b.qubit_density).cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace msgate
