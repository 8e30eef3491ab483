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
 * Closed-form propagators of the Lamb-Dicke gate Hamiltonian
 *
 *     H(t) = -eta Omega (a^dag e^{i eps t} + a e^{-i eps t}) S
 *
 * with S = S_y (ideal) or S = S_y cos(psi) + S_z sin(psi) (carrier-tilted).
 * Since [a, a^dag] is a c-number the Magnus series stops at second order:
 *
 *     U(t) = D(alpha(t) S) exp(i gamma(t) S^2).
 */
#pragma once

#include <array>
#include <cmath>

#include "msgate/errors.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/hilbert.hpp"

namespace msgate {

struct AnalyticFactors {
    cplx alpha{0.0, 0.0};  ///< phase-space displacement per unit eigenvalue of S
    double gamma = 0.0;    ///< accumulated S^2 phase
    double psi = 0.0;      ///< tilt of the effective spin axis
    double f_t = 0.0;      ///< carrier excursion F(t)
};

/// Factors for a rectangular pulse of constant Omega switched on at t = 0.
inline AnalyticFactors analytic_factors(const GateParams &p, double t) {
    const double delta = p.nu - p.epsilon;
    if (p.epsilon == 0.0) throw DomainError("analytic_factors: epsilon = 0");
    if (delta == 0.0) throw DomainError("analytic_factors: delta = 0");
    const DerivedParams d = derived_params(p);
    AnalyticFactors f;
    f.alpha = (p.eta * p.omega / p.epsilon) * (std::exp(kI * (p.epsilon * t)) - 1.0);
    f.gamma = d.lambda * t - d.chi * std::sin(p.epsilon * t);
    f.psi = 4.0 * p.omega / delta * std::sin(p.zeta);
    f.f_t = 2.0 * p.omega / delta * (std::sin(delta * t + p.zeta) - std::sin(p.zeta));
    return f;
}

/**
 * alpha and gamma for an arbitrary envelope Omega e(t):
 *
 *     I(t)     = int_0^t e(s) e^{i eps s} ds,       alpha = i eta Omega I(t)
 *     gamma'(t) = eta^2 Omega^2 e(t) Im(e^{i eps t} conj(I(t)))
 *
 * integrated with RK4 on each smooth piece of the envelope. The carrier terms
 * psi and F are left at zero: a slowly switched pulse starts and ends with an
 * untilted axis.
 */
inline AnalyticFactors shaped_factors(const GateParams &p, const PulseEnvelope &env, double t,
                                      int steps_per_gate = 4000) {
    if (p.epsilon == 0.0) throw DomainError("shaped_factors: epsilon = 0");
    env.validate();
    if (t < 0.0 || t > env.t_pulse * (1.0 + 1e-12)) throw DomainError("shaped_factors: t outside pulse");
    t = std::min(t, env.t_pulse);

    const double eps = p.epsilon;
    const double k2 = p.eta * p.eta * p.omega * p.omega;
    const double h_max = kTwoPi / std::abs(eps) / steps_per_gate;

    // state: (I, gamma)
    auto rhs = [&](double s, cplx integral, cplx &d_int, double &d_gamma) {
        const double e = envelope_value(env, s);
        const cplx rot = std::exp(kI * (eps * s));
        d_int = e * rot;
        d_gamma = k2 * e * std::imag(rot * std::conj(integral));
    };

    std::array<double, 4> knots{0.0, 0.0, 0.0, t};
    if (env.kind == PulseShape::BlackmanSloped) {
        knots[1] = std::min(env.t_slope, t);
        knots[2] = std::min(env.t_pulse - env.t_slope, t);
    }

    cplx integral{0.0, 0.0};
    double gamma = 0.0;
    for (int seg = 0; seg < 3; ++seg) {
        const double a = knots[seg], b = knots[seg + 1];
        if (b <= a) continue;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h_max)));
        const double h = (b - a) / n;
        for (int i = 0; i < n; ++i) {
            const double s = a + i * h;
            cplx k1i, k2i, k3i, k4i;
            double k1g, k2g, k3g, k4g;
            rhs(s, integral, k1i, k1g);
            rhs(s + 0.5 * h, integral + 0.5 * h * k1i, k2i, k2g);
            rhs(s + 0.5 * h, integral + 0.5 * h * k2i, k3i, k3g);
            rhs(s + h, integral + h * k3i, k4i, k4g);
            integral += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
            gamma += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        }
    }
    AnalyticFactors f;
    f.alpha = kI * (p.eta * p.omega) * integral;
    f.gamma = gamma;
    return f;
}

/// cos(theta/2) - i sin(theta/2) sigma for an involutory single-qubit operator sigma.
inline Operator qubit_rotation(double theta, const Operator &sigma) {
    return std::cos(0.5 * theta) * pauli::identity() - kI * std::sin(0.5 * theta) * sigma;
}

/// exp(-i theta/2 (sigma (x) 1 + 1 (x) sigma)) = R (x) R.
inline Operator collective_rotation(double theta, const Operator &sigma) {
    const Operator r = qubit_rotation(theta, sigma);
    return kron(r, r);
}

/// exp(i gamma S^2) for a collective spin with projectors `pr` (S^2 eigenvalues 0, 4, 4).
inline Operator squared_spin_phase(const SpinProjectors &pr, double gamma) {
    return pr.zero + std::exp(kI * (4.0 * gamma)) * (pr.plus + pr.minus);
}

/// D(alpha S) = P_0 + P_2 D(2 alpha) + P_-2 D(-2 alpha) on the composite space.
inline Operator spin_dependent_displacement(const SpinProjectors &pr, cplx alpha, int n_fock,
                                            int offset = 0) {
    if (!displacement_fits(std::abs(2.0 * alpha), n_fock)) {
        throw TruncationError("spin_dependent_displacement: |2 alpha| too large for " +
                              std::to_string(n_fock) + " Fock levels");
    }
    return kron(pr.zero, Operator::Identity(n_fock, n_fock)) +
           kron(pr.plus, displacement_matrix(2.0 * alpha, n_fock, offset)) +
           kron(pr.minus, displacement_matrix(-2.0 * alpha, n_fock, offset));
}

inline Operator propagator_from_factors(const AnalyticFactors &f, int n_fock, int offset = 0) {
    const SpinProjectors pr = sy_projectors();
    return spin_dependent_displacement(pr, f.alpha, n_fock, offset) *
           lift_qubits(squared_spin_phase(pr, f.gamma), n_fock);
}

/// U(t) = D(alpha(t) S_y) exp(i gamma(t) S_y^2).
inline Operator propagator_ms(const GateParams &p, double t, int n_fock, int offset = 0) {
    return propagator_from_factors(analytic_factors(p, t), n_fock, offset);
}

/// S_y cos(psi) + S_z sin(psi) = W S_y W^dag with W = exp(-i psi S_x / 2).
inline Operator tilted_sy(double psi) {
    return std::cos(psi) * collective_spin(Axis::Y) + std::sin(psi) * collective_spin(Axis::Z);
}

/// U(t) = exp(-i F S_x) D(alpha S_{y,psi}) exp(i gamma S_{y,psi}^2), valid for rectangular pulses.
inline Operator propagator_mod(const GateParams &p, double t, int n_fock, int offset = 0) {
    const AnalyticFactors f = analytic_factors(p, t);
    const SpinProjectors pr = axis_projectors(tilted_sy(f.psi));
    const Operator carrier = collective_rotation(2.0 * f.f_t, pauli::x());
    return lift_qubits(carrier, n_fock) * spin_dependent_displacement(pr, f.alpha, n_fock, offset) *
           lift_qubits(squared_spin_phase(pr, f.gamma), n_fock);
}

}  // namespace msgate
