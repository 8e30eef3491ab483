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
 * Qubit observables after the Lamb-Dicke gate propagator acting on a thermal
 * motional state. The trace over Fock levels reduces to
 *
 *     sum_n p_n <n|D(beta)|n> = exp(-|beta|^2 (nbar + 1/2)),
 *
 * so every expectation value is a combination of E_4 and E_16, the factors for
 * |beta| = 2|alpha| and 4|alpha|.
 */
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "msgate/errors.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/hilbert.hpp"
#include "msgate/propagator.hpp"

namespace msgate {

struct ThermalSpec {
    double nbar = 0.0;
    double weight_cutoff = 1e-4;  ///< discarded tail probability
    int window = 12;              ///< minimum Fock half-width per numeric run
    /// Widen each run's window to the displacement guard instead of failing.
    bool auto_window = true;

    void validate() const {
        if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw DomainError("ThermalSpec: nbar must be >= 0");
        if (!(weight_cutoff >= 0.0 && weight_cutoff < 1.0)) {
            throw DomainError("ThermalSpec: weight_cutoff must be in [0, 1)");
        }
        if (window < 4) throw DomainError("ThermalSpec: window must be >= 4");
    }
};

struct FockWeight {
    int n;
    double weight;
};

/// Geometric weights up to cumulative probability 1 - cutoff, renormalised.
inline std::vector<FockWeight> thermal_weights(const ThermalSpec &spec) {
    spec.validate();
    if (spec.nbar == 0.0) return {{0, 1.0}};
    const double q = spec.nbar / (spec.nbar + 1.0);
    const double target = 1.0 - std::max(spec.weight_cutoff, 1e-15);
    std::vector<FockWeight> out;
    double p = 1.0 / (spec.nbar + 1.0), cumulative = 0.0;
    for (int n = 0; cumulative < target && p > 1e-300; ++n) {
        out.push_back({n, p});
        cumulative += p;
        p *= q;
    }
    for (auto &w : out) w.weight /= cumulative;
    return out;
}

/// sum_n p_n <n|D(alpha)|n> for a thermal state.
inline double thermal_displacement_factor(cplx alpha, double nbar) {
    return std::exp(-std::norm(alpha) * (nbar + 0.5));
}

struct ThermalPopulations {
    double p2;  ///< both ions in |down> (both fluoresce)
    double p1;
    double p0;
};

/// Populations after the gate from |dd> with a thermal mode, for given alpha, gamma.
inline ThermalPopulations populations_thermal(const AnalyticFactors &f, double nbar) {
    const double a2 = std::norm(f.alpha) * (nbar + 0.5);
    const double e4 = std::exp(-4.0 * a2);
    const double e16 = std::exp(-16.0 * a2);
    const double c = std::cos(4.0 * f.gamma);
    ThermalPopulations out;
    out.p1 = (1.0 - e16) / 4.0;
    out.p2 = (3.0 + e16 + 4.0 * c * e4) / 8.0;
    out.p0 = (3.0 + e16 - 4.0 * c * e4) / 8.0;
    return out;
}

inline ThermalPopulations populations_thermal(const GateParams &p, double nbar, double t) {
    return populations_thermal(analytic_factors(p, t), nbar);
}

namespace detail {

inline void check_qubit_observable(const Operator &obs) {
    if (obs.rows() != 4 || obs.cols() != 4) throw InputError("observable must be 4x4");
    if (!is_hermitian(obs, 1e-12)) throw InputError("observable is not Hermitian");
}

inline void check_qubit_density(const Operator &rho) {
    if (rho.rows() != 4 || rho.cols() != 4) throw InputError("density matrix must be 4x4");
    if (!is_hermitian(rho, 1e-10)) throw InputError("density matrix is not Hermitian");
    if (std::abs(rho.trace() - 1.0) > 1e-10) throw InputError("density matrix trace != 1");
    Eigen::SelfAdjointEigenSolver<Operator> eig(rho);
    if (eig.eigenvalues().minCoeff() < -1e-10) throw InputError("density matrix not positive");
}

}  // namespace detail

/**
 * Tr(O U (rho_M (x) rho_A) U^dag) for the propagator with factors `f` and a
 * thermal mode of mean occupation nbar.
 *
 * With U = D(alpha S_y) V and V = exp(i gamma S_y^2) (V commutes with the S_y
 * projectors):
 *
 *     O(t) = Tr( V^dag O V {A_0 + A_4 E_4 + A_16 E_16} ),
 *     A_0  = sum_l P_l rho P_l,
 *     A_4  = P_2 rho P_0 + P_0 rho P_2 + P_-2 rho P_0 + P_0 rho P_-2,
 *     A_16 = P_-2 rho P_2 + P_2 rho P_-2.
 */
inline double expectation_thermal(const Operator &obs, const Operator &rho, const AnalyticFactors &f,
                                  double nbar) {
    detail::check_qubit_observable(obs);
    detail::check_qubit_density(rho);
    const SpinProjectors pr = sy_projectors();
    const Operator &p0 = pr.zero, &pp = pr.plus, &pm = pr.minus;
    const Operator a0 = p0 * rho * p0 + pp * rho * pp + pm * rho * pm;
    const Operator a4 = pp * rho * p0 + p0 * rho * pp + pm * rho * p0 + p0 * rho * pm;
    const Operator a16 = pm * rho * pp + pp * rho * pm;
    const double e4 = thermal_displacement_factor(2.0 * f.alpha, nbar);
    const double e16 = thermal_displacement_factor(4.0 * f.alpha, nbar);
    const Operator v = squared_spin_phase(pr, f.gamma);
    const Operator obs_v = v.adjoint() * obs * v;
    return std::real((obs_v * (a0 + e4 * a4 + e16 * a16)).trace());
}

inline double expectation_thermal(const Operator &obs, const Operator &rho, const GateParams &p,
                                  double nbar, double t) {
    return expectation_thermal(obs, rho, analytic_factors(p, t), nbar);
}

/// P_phi = (cos(phi) S_x + sin(phi) S_y)^2 / 2 - 1 = sigma_phi (x) sigma_phi.
inline Operator parity_operator(double phi) {
    const Operator s = collective_spin_in_plane(phi);
    return 0.5 * s * s - Operator::Identity(4, 4);
}

/// Parity after analysis pulses of phase phi, starting from |dd>.
inline double parity_thermal(double phi, const AnalyticFactors &f, double nbar) {
    return expectation_thermal(parity_operator(phi), density(qubit_basis(Qubits::DownDown)), f, nbar);
}

inline double parity_thermal(double phi, const GateParams &p, double nbar, double t) {
    return parity_thermal(phi, analytic_factors(p, t), nbar);
}

}  // namespace msgate
