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
 * Drive parameters, pulse envelopes and the bichromatic gate Hamiltonian.
 *
 * All frequencies are angular (rad/s), times in seconds. The blue component
 * carries exp(-i(delta t + zeta)) with Rabi frequency Omega(1 + xi) and the red
 * component exp(+i(delta t + zeta)) with Omega(1 - xi), so xi > 0 means the
 * blue beam is stronger.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "msgate/errors.hpp"
#include "msgate/hilbert.hpp"

namespace msgate {

struct GateParams {
    double nu = 0.0;            ///< COM mode frequency
    double epsilon = 0.0;       ///< detuning from the motional sidebands, nu - delta
    double eta = 0.0;           ///< Lamb-Dicke factor
    double omega = 0.0;         ///< peak carrier Rabi frequency per beam
    double xi = 0.0;            ///< blue/red power imbalance
    double zeta = 0.0;          ///< phase of the amplitude modulation at t = 0
    double delta_ac = 0.0;      ///< dipole-induced light shift at peak intensity
    double delta_global = 0.0;  ///< laser detuning from the unshifted carrier
    /// Ion 1 sees Omega sqrt(r), ion 2 sees Omega / sqrt(r).
    double coupling_ratio = 1.0;

    void validate() const {
        if (!(nu > 0.0)) throw DomainError("GateParams: nu must be > 0");
        if (!(std::abs(epsilon) < nu)) throw DomainError("GateParams: need |epsilon| < nu");
        if (!(eta > 0.0)) throw DomainError("GateParams: eta must be > 0");
        if (!(omega >= 0.0)) throw DomainError("GateParams: omega must be >= 0");
        if (!(std::abs(xi) < 1.0)) throw DomainError("GateParams: need |xi| < 1");
        if (!(coupling_ratio > 0.0)) throw DomainError("GateParams: coupling_ratio must be > 0");
        if (!std::isfinite(zeta) || !std::isfinite(delta_ac) || !std::isfinite(delta_global)) {
            throw DomainError("GateParams: non-finite phase or shift");
        }
    }
};

/// Rabi frequency that makes exp(i lambda t_gate S_y^2) maximally entangling.
inline double gate_rabi_frequency(double epsilon, double eta) { return std::abs(epsilon) / (4.0 * eta); }

struct DerivedParams {
    double delta;    ///< nu - epsilon, detuning of each tone from the carrier
    double t_gate;   ///< 2 pi / |epsilon|
    double lambda;   ///< eta^2 Omega^2 / epsilon
    double chi;      ///< eta^2 Omega^2 / epsilon^2
    double omega_b;  ///< Omega (1 + xi)
    double omega_r;  ///< Omega (1 - xi)
};

inline DerivedParams derived_params(const GateParams &p) {
    if (p.epsilon == 0.0) throw DomainError("derived_params: epsilon = 0 (division by zero)");
    const double e2o2 = p.eta * p.eta * p.omega * p.omega;
    return {p.nu - p.epsilon,
            kTwoPi / std::abs(p.epsilon),
            e2o2 / p.epsilon,
            e2o2 / (p.epsilon * p.epsilon),
            p.omega * (1.0 + p.xi),
            p.omega * (1.0 - p.xi)};
}

/// Imbalance whose carrier light shift cancels the phase delta_ac * t_gate at the gate condition.
inline double stark_compensation_xi(const GateParams &p) {
    if (p.epsilon == 0.0) throw DomainError("stark_compensation_xi: epsilon = 0");
    const DerivedParams d = derived_params(p);
    const double phi = p.delta_ac * d.t_gate;
    return (d.delta * p.eta * p.eta / std::abs(p.epsilon)) * (phi / kPi);
}

/// Light shift of the carrier from unequal tones: 2(Omega_r^2 - Omega_b^2)/delta = -8 Omega^2 xi / delta.
inline double carrier_stark_shift(const GateParams &p) {
    const double delta = p.nu - p.epsilon;
    if (delta == 0.0) throw DomainError("carrier_stark_shift: delta = 0");
    const double ob = p.omega * (1.0 + p.xi);
    const double orr = p.omega * (1.0 - p.xi);
    return 2.0 * (orr * orr - ob * ob) / delta;
}

/// Dipole light shift that the imbalance xi cancels exactly (negative of the carrier shift).
inline double balanced_dipole_shift(const GateParams &p) { return -carrier_stark_shift(p); }

/// n-dependent qubit shift left over from the sideband light shifts when xi != 0.
inline double sideband_stark_shift(const GateParams &p, int n) {
    if (n < 0) throw DomainError("sideband_stark_shift: n must be >= 0");
    return 0.5 * p.epsilon * p.xi * static_cast<double>(n);
}

enum class PulseShape { Rectangular, BlackmanSloped };

/// Mean of the rising half of the Blackman window over its support.
inline constexpr double kBlackmanMean = 0.42;

struct PulseEnvelope {
    PulseShape kind = PulseShape::Rectangular;
    double t_pulse = 0.0;
    double t_slope = 0.0;

    static PulseEnvelope rectangular(double t_pulse) { return {PulseShape::Rectangular, t_pulse, 0.0}; }

    /// Sloped pulse with the same Rabi area as a rectangular pulse of length t_gate.
    static PulseEnvelope blackman(double t_gate, double t_slope) {
        return {PulseShape::BlackmanSloped, t_gate + 2.0 * (1.0 - kBlackmanMean) * t_slope, t_slope};
    }

    void validate() const {
        if (!(t_pulse > 0.0)) throw DomainError("PulseEnvelope: t_pulse must be > 0");
        if (kind == PulseShape::BlackmanSloped) {
            if (!(t_slope > 0.0)) throw DomainError("PulseEnvelope: t_slope must be > 0");
            if (2.0 * t_slope > t_pulse) throw DomainError("PulseEnvelope: need 2 t_slope <= t_pulse");
        }
    }

    /// Integral of the envelope over the pulse, in seconds.
    double area() const {
        if (kind == PulseShape::Rectangular) return t_pulse;
        return t_pulse - 2.0 * t_slope + 2.0 * kBlackmanMean * t_slope;
    }
};

/// Rising half of a Blackman window, x in [0, 1].
inline double blackman_rise(double x) {
    return std::clamp(0.42 - 0.5 * std::cos(kPi * x) + 0.08 * std::cos(kTwoPi * x), 0.0, 1.0);
}

inline double envelope_value(const PulseEnvelope &env, double t) {
    const double slack = 1e-12 * env.t_pulse;
    if (t < -slack || t > env.t_pulse + slack) {
        throw DomainError("envelope_value: t = " + std::to_string(t) + " outside pulse");
    }
    if (env.kind == PulseShape::Rectangular) return 1.0;
    t = std::clamp(t, 0.0, env.t_pulse);
    if (t < env.t_slope) return blackman_rise(t / env.t_slope);
    if (t > env.t_pulse - env.t_slope) return blackman_rise((env.t_pulse - t) / env.t_slope);
    return 1.0;
}

struct NoiseModel {
    double coupling_rel_sigma = 0.0;     ///< quasi-static delta Omega / Omega per trial
    double carrier_error_per_gate = 0.0; ///< weight of the fully mixed admixture per gate
    double detuning_rms = 0.0;           ///< rad/s
    double heating_rate = 0.0;           ///< quanta / s
    unsigned long long seed = 0;

    void validate() const {
        if (coupling_rel_sigma < 0 || carrier_error_per_gate < 0 || detuning_rms < 0 || heating_rate < 0) {
            throw DomainError("NoiseModel: all entries must be non-negative");
        }
        if (carrier_error_per_gate > 1.0) throw DomainError("NoiseModel: carrier_error_per_gate > 1");
    }
};

/**
 * Applies H(t) of the full bichromatic interaction on a fixed Fock window.
 *
 * D(i eta e^{i nu t}) = R(t) D_0 R(t)^dag with R = exp(i nu t a^dag a), so the
 * Lamb-Dicke exponential is diagonalised once per window and each time step
 * only costs phase factors and four N x N matrix-vector products.
 * `apply` reuses internal scratch buffers: give each thread its own instance.
 */
class GateHamiltonian {
  public:
    GateHamiltonian(const GateParams &p, const PulseEnvelope &env, int n_fock, int window_offset = 0)
        : p_(p), env_(env), n_fock_(n_fock), offset_(window_offset) {
        p_.validate();
        env_.validate();
        if (n_fock < 2) throw DomainError("GateHamiltonian: n_fock must be >= 2");
        d0_ = displacement_matrix(cplx{0.0, p.eta}, n_fock, window_offset);
        const DerivedParams d = derived_params(p_);
        delta_ = d.delta;
        omega_b_ = d.omega_b;
        omega_r_ = d.omega_r;
        ion1_ = std::sqrt(p.coupling_ratio);
        ion2_ = 1.0 / ion1_;
        phase_step_.resize(n_fock);
    }

    int n_fock() const { return n_fock_; }
    int window_offset() const { return offset_; }
    int dim() const { return 4 * n_fock_; }
    const GateParams &params() const { return p_; }
    const PulseEnvelope &envelope() const { return env_; }

    /// Carrier drive amplitude c(t) multiplying sigma_+ (before per-ion factors).
    cplx drive(double t) const {
        const double e = envelope_value(env_, t);
        const double ph = delta_ * t + p_.zeta;
        return e * (omega_b_ * std::exp(-kI * ph) + omega_r_ * std::exp(kI * ph));
    }

    /// Coefficient of S_z: (s(t) delta_ac - Delta_global) / 2 with s = envelope^2.
    double sz_coefficient(double t) const {
        const double e = envelope_value(env_, t);
        return 0.5 * (e * e * p_.delta_ac - p_.delta_global);
    }

    /// D(i eta e^{i nu t}) on the window.
    Operator lamb_dicke_factor(double t) const {
        Operator d = d0_;
        for (int m = 0; m < n_fock_; ++m) {
            for (int k = 0; k < n_fock_; ++k) d(m, k) *= std::exp(kI * (p_.nu * t * (m - k)));
        }
        return d;
    }

    Operator matrix(double t) const {
        const cplx c = drive(t);
        const Operator sp = ion1_ * c * kron(pauli::raising(), pauli::identity()) +
                            ion2_ * c * kron(pauli::identity(), pauli::raising());
        Operator h = kron(sp, lamb_dicke_factor(t));
        h += h.adjoint().eval();
        h += sz_coefficient(t) * lift_qubits(collective_spin(Axis::Z), n_fock_);
        return h;
    }

    /// out = H(t) in. Both vectors have length 4 n_fock.
    void apply(double t, const Vector &in, Vector &out) const {
        const int n = n_fock_;
        const cplx c = drive(t);
        const cplx c1 = ion1_ * c, c2 = ion2_ * c;
        const double sz = sz_coefficient(t);
        for (int k = 0; k < n; ++k) phase_step_(k) = std::exp(kI * (p_.nu * t * k));

        auto uu = in.segment(0, n), ud = in.segment(n, n), du = in.segment(2 * n, n),
             dd = in.segment(3 * n, n);
        // D v = R D0 R^dag v and D^dag v = R D0^dag R^dag v.
        const auto rot = phase_step_.array();
        scratch_a_ = (rot.conjugate() * (c1 * du + c2 * ud).array()).matrix();
        scratch_b_ = (rot.conjugate() * dd.array()).matrix();
        scratch_c_ = (rot.conjugate() * uu.array()).matrix();
        scratch_d_ = (rot.conjugate() * (std::conj(c1) * ud + std::conj(c2) * du).array()).matrix();

        out.resize(4 * n);
        out.segment(0, n).noalias() = d0_ * scratch_a_;
        tmp1_.noalias() = d0_ * scratch_b_;
        tmp2_.noalias() = d0_.adjoint() * scratch_c_;
        out.segment(n, n) = c1 * tmp1_ + std::conj(c2) * tmp2_;
        out.segment(2 * n, n) = c2 * tmp1_ + std::conj(c1) * tmp2_;
        out.segment(3 * n, n).noalias() = d0_.adjoint() * scratch_d_;
        for (int q = 0; q < 4; ++q) {
            out.segment(q * n, n) = (rot * out.segment(q * n, n).array()).matrix();
        }
        out.segment(0, n) += 2.0 * sz * uu;
        out.segment(3 * n, n) -= 2.0 * sz * dd;
    }

  private:
    GateParams p_;
    PulseEnvelope env_;
    int n_fock_;
    int offset_;
    Operator d0_;
    double delta_ = 0, omega_b_ = 0, omega_r_ = 0, ion1_ = 1, ion2_ = 1;
    mutable Vector phase_step_, scratch_a_, scratch_b_, scratch_c_, scratch_d_, tmp1_, tmp2_;
};

/// H(t)/hbar on Fock levels [window_offset, window_offset + n_fock).
inline Operator hamiltonian_full(const GateParams &p, const PulseEnvelope &env, double t, int n_fock,
                                 int window_offset = 0) {
    return GateHamiltonian(p, env, n_fock, window_offset).matrix(t);
}

}  // namespace msgate
