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
#include "msgate/fitting.hpp"

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

void expect_well_formed(const FitResult &r) {
    EXPECT_GE(r.rms_residual, 0.0);
    for (const auto &[k, v] : r.params) EXPECT_TRUE(std::isfinite(v)) << k;
}

std::vector<PopulationPoint> closed_form_data(const GateParams &p, double nbar, int m) {
    const double tg = derived_params(p).t_gate;
    std::vector<PopulationPoint> data;
    for (int i = 1; i <= m; ++i) {
        const double t = tg * i / (m + 1.0);
        const ThermalPopulations x = populations_thermal(p, nbar, t);
        data.push_back({t, x.p0, x.p1, x.p2});
    }
    return data;
}

TEST(FitSinusoid, NoiselessRoundTrip) {
    std::vector<double> phi, y;
    for (int i = 0; i < 24; ++i) {
        phi.push_back(kPi * i / 24.0);
        y.push_back(0.964 * std::sin(2.0 * phi.back() + 0.3));
    }
    const FitResult r = fit_sinusoid(phi, y);
    EXPECT_NEAR(r["A"], 0.964, 1e-9);
    EXPECT_NEAR(r["phi0"], 0.3, 1e-9);
    EXPECT_LT(r.rms_residual, 1e-12);
    expect_well_formed(r);
}

TEST(FitSinusoid, NegativeAmplitudeFoldsIntoPhase) {
    std::vector<double> phi, y;
    for (int i = 0; i < 12; ++i) {
        phi.push_back(kPi * i / 12.0);
        y.push_back(-0.5 * std::sin(2.0 * phi.back()));
    }
    const FitResult r = fit_sinusoid(phi, y);
    EXPECT_NEAR(r["A"], 0.5, 1e-12);
    EXPECT_NEAR(std::abs(r["phi0"]), kPi, 1e-12);
}

TEST(FitSinusoid, ConstantDataHasNoAmplitude) {
    std::vector<double> phi, y;
    for (int i = 0; i < 24; ++i) {
        phi.push_back(kPi * i / 24.0);
        y.push_back(0.2);
    }
    EXPECT_LT(fit_sinusoid(phi, y)["A"], 1e-12);
}

TEST(FitSinusoid, ShotNoiseRecovery) {
    const double amp = 0.964, phase = 0.3;
    const int shots = 200, points = 48;
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::vector<double> phi, y;
        for (int i = 0; i < points; ++i) {
            phi.push_back(kPi * i / points);
            // Bell-state fringe: even parity with probability (1 + P)/2.
            const double parity = amp * std::sin(2.0 * phi.back() + phase);
            auto rng = point_rng(seed, static_cast<std::uint64_t>(i));
            const Populations s = sample_populations({0.5 * (1.0 + parity) / 2.0, 0.5 * (1.0 - parity),
                                                      0.5 * (1.0 + parity) / 2.0},
                                                     shots, rng);
            y.push_back(s.p0 + s.p2 - s.p1);
        }
        within += std::abs(fit_sinusoid(phi, y)["A"] - amp) <= 0.02;
    }
    EXPECT_GE(within, 95);
}

TEST(FitSinusoid, RejectsBadInput) {
    EXPECT_THROW(fit_sinusoid({0.0, 0.1, 0.2, 0.3}, {0.0, 0.1, 0.2, 0.3}), InputError);
    EXPECT_THROW(fit_sinusoid({0.0, 0.1, 0.2, 0.3, 0.4}, {0.0, 0.1, 0.2, 0.3, 0.4}), InputError);
    EXPECT_THROW(fit_sinusoid({0.0, 1.0, 2.0, 3.0, 4.0}, {0.0, 0.1}), InputError);
}

TEST(FitOscillation, RecoversPeriodAndOffset) {
    std::vector<double> x, y;
    for (int i = 0; i < 61; ++i) {
        x.push_back(10e-6 * i);
        y.push_back(0.5 + 0.45 * std::cos(kTwoPi * x.back() / 258e-6 + 0.2));
    }
    const FitResult r = fit_oscillation(x, y);
    EXPECT_NEAR(r["period"], 258e-6, 1e-12);
    EXPECT_NEAR(r["offset"], 0.5, 1e-9);
    EXPECT_NEAR(r["amplitude"], 0.45, 1e-9);
    EXPECT_TRUE(r.warnings.empty());
    expect_well_formed(r);
}

TEST(FitQuadratic, ExactParabola) {
    std::vector<double> x, y;
    for (int i = -5; i <= 5; ++i) {
        x.push_back(200.0 * i);
        y.push_back(0.999 - 9.6e-9 * (x.back() - 37.0) * (x.back() - 37.0));
    }
    const FitResult r = fit_quadratic_detuning(x, y);
    EXPECT_NEAR(r["curvature"], -9.6e-9, 1e-18);
    EXPECT_NEAR(r["center"], 37.0, 1e-6);
    EXPECT_NEAR(r["f_max"], 0.999, 1e-12);
    EXPECT_TRUE(r.warnings.empty());
    expect_well_formed(r);
}

TEST(FitQuadratic, Warnings) {
    std::vector<double> x, up, edge;
    for (int i = 0; i < 7; ++i) {
        x.push_back(i);
        up.push_back(1.0 + 0.1 * (i - 3.0) * (i - 3.0));
        edge.push_back(1.0 - 0.1 * (i - 9.0) * (i - 9.0));
    }
    const FitResult a = fit_quadratic_detuning(x, up);
    ASSERT_FALSE(a.warnings.empty());
    EXPECT_NE(a.warnings.front().find("upward"), std::string::npos);
    const FitResult b = fit_quadratic_detuning(x, edge);
    ASSERT_FALSE(b.warnings.empty());
    EXPECT_NE(b.warnings.front().find("outside"), std::string::npos);
    EXPECT_THROW(fit_quadratic_detuning({0, 1, 2, 3, 4}, {1, 1, 1, 1, 1}), FitError);
}

TEST(FitLinear, ExactLine) {
    const FitResult r = fit_linear({1, 3, 5, 7}, {1.0, 0.994, 0.988, 0.982});
    EXPECT_NEAR(r["slope"], -3e-3, 1e-14);
    EXPECT_NEAR(r["intercept"], 1.003, 1e-14);
}

TEST(FitGaussianDecay, ExactDecay) {
    std::vector<double> x, y;
    for (int n = 1; n <= 21; n += 2) {
        x.push_back(n);
        y.push_back(0.98 * std::exp(-(n / 30.0) * (n / 30.0)));
    }
    const FitResult r = fit_gaussian_decay(x, y);
    EXPECT_NEAR(r["decay_constant"], 30.0, 1e-6);
    EXPECT_NEAR(r["amplitude"], 0.98, 1e-9);
    expect_well_formed(r);
}

TEST(FitNbar, NoiselessRoundTrip) {
    const GateParams p = gate_params();
    for (double nbar : {0.5, 5.0, 20.0, 60.0}) {
        const FitResult r = fit_nbar(closed_form_data(p, nbar, 24), p);
        EXPECT_NEAR(r["nbar"], nbar, 1e-6 * std::max(1.0, nbar)) << nbar;
        expect_well_formed(r);
    }
}

TEST(FitNbar, GroundStateData) {
    const GateParams p = gate_params();
    EXPECT_LT(fit_nbar(closed_form_data(p, 0.0, 24), p)["nbar"], 0.5);
}

TEST(FitNbar, ShapedPulseRoundTrip) {
    const GateParams p = gate_params();
    const PulseEnvelope env = PulseEnvelope::blackman(derived_params(p).t_gate, 2.5e-6);
    std::vector<PopulationPoint> data;
    for (int i = 1; i <= 20; ++i) {
        const double t = env.t_pulse * i / 21.0;
        const ThermalPopulations x = populations_thermal(shaped_factors(p, env, t), 12.0);
        data.push_back({t, x.p0, x.p1, x.p2});
    }
    EXPECT_NEAR(fit_nbar(data, p, env)["nbar"], 12.0, 1e-5);
}

TEST(FitNbar, DegenerateDataRejected) {
    const GateParams p = gate_params();
    const double tg = derived_params(p).t_gate;
    std::vector<PopulationPoint> at_gate;
    for (int k = 0; k < 10; ++k) at_gate.push_back({k * tg, 0.5, 0.0, 0.5});
    EXPECT_THROW(fit_nbar(at_gate, p), FitError);
    EXPECT_THROW(fit_nbar(closed_form_data(p, 3.0, 5), p), InputError);
}

}  // namespace
}  // namespace msgate
