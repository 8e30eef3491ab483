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
 * Dense operators on the two-qubit (x) truncated-Fock space.
 *
 * Basis ordering is fixed once for the whole library:
 *
 *     index = q * n_fock + (k - fock_offset),   q in {0: uu, 1: ud, 2: du, 3: dd}
 *
 * where the first letter is ion 1 and the Fock index varies fastest. A single
 * qubit uses (up, down) = (e0, e1) with sigma_y|down> = -i|up>, so
 * sigma_+ = |up><down| and sigma_z = diag(1, -1).
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "msgate/errors.hpp"

namespace msgate {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

/// Largest operator dimension any constructor will build.
inline constexpr Eigen::Index kMaxDim = 8192;

enum class Axis { X, Y, Z };

/// Two-qubit computational states in library order.
enum class Qubits : int { UpUp = 0, UpDown = 1, DownUp = 2, DownDown = 3 };

namespace pauli {

inline Operator identity() { return Operator::Identity(2, 2); }

inline Operator x() {
    Operator m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline Operator y() {
    Operator m(2, 2);
    m << 0, -kI, kI, 0;
    return m;
}

inline Operator z() {
    Operator m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

/// sigma_+ = |up><down|.
inline Operator raising() {
    Operator m = Operator::Zero(2, 2);
    m(0, 1) = 1;
    return m;
}

inline Operator lowering() { return raising().adjoint(); }

inline Operator along(Axis axis) {
    switch (axis) {
        case Axis::X: return x();
        case Axis::Y: return y();
        case Axis::Z: return z();
    }
    return z();
}

/// cos(phi) sigma_x + sin(phi) sigma_y.
inline Operator in_plane(double phi) { return std::cos(phi) * x() + std::sin(phi) * y(); }

}  // namespace pauli

inline Operator kron(const Operator &a, const Operator &b) {
    if (a.rows() != a.cols() || b.rows() != b.cols()) {
        throw DomainError("kron: operands must be square");
    }
    const Eigen::Index dim = a.rows() * b.rows();
    if (dim > kMaxDim) {
        throw SizeError("kron: dimension " + std::to_string(dim) + " exceeds maximum " +
                        std::to_string(kMaxDim));
    }
    Operator out(dim, dim);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// S_axis = sigma_axis (x) 1 + 1 (x) sigma_axis.
inline Operator collective_spin(Axis axis) {
    const Operator s = pauli::along(axis);
    return kron(s, pauli::identity()) + kron(pauli::identity(), s);
}

/// cos(phi) S_x + sin(phi) S_y.
inline Operator collective_spin_in_plane(double phi) {
    return std::cos(phi) * collective_spin(Axis::X) + std::sin(phi) * collective_spin(Axis::Y);
}

/// Annihilation operator on Fock levels [offset, offset + n_fock).
inline Operator annihilation(int n_fock, int offset = 0) {
    if (n_fock < 1 || offset < 0) throw DomainError("annihilation: need n_fock >= 1, offset >= 0");
    Operator a = Operator::Zero(n_fock, n_fock);
    for (int k = 1; k < n_fock; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(offset + k));
    return a;
}

inline Operator creation(int n_fock, int offset = 0) { return annihilation(n_fock, offset).adjoint(); }

/// Largest |beta| for which a Fock window of `n_fock` levels still represents D(beta).
inline bool displacement_fits(double abs_beta, int n_fock) {
    return 4.0 * abs_beta * abs_beta < static_cast<double>(n_fock);
}

/**
 * exp(beta a^dag - beta^* a) restricted to the Fock window [offset, offset + n_fock).
 *
 * The anti-Hermitian generator is diagonalised through the Hermitian matrix
 * G = i(beta a^dag - beta^* a)/|beta|, so D = V exp(-i|beta| w) V^dag. Throws
 * TruncationError unless 4|beta|^2 < n_fock.
 */
inline Operator displacement_matrix(cplx beta, int n_fock, int offset = 0) {
    if (n_fock < 1) throw DomainError("displacement_matrix: n_fock must be >= 1");
    const double r = std::abs(beta);
    if (r == 0.0) return Operator::Identity(n_fock, n_fock);
    if (!displacement_fits(r, n_fock)) {
        throw TruncationError("displacement_matrix: |beta|^2 = " + std::to_string(r * r) +
                              " too large for " + std::to_string(n_fock) + " Fock levels");
    }
    const Operator a = annihilation(n_fock, offset);
    const Operator g = kI * (beta * a.adjoint() - std::conj(beta) * a) / r;
    Eigen::SelfAdjointEigenSolver<Operator> eig(g);
    const Vector phases = (-kI * r * eig.eigenvalues().cast<cplx>().array()).exp().matrix();
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Eigenprojectors of a collective spin component with spectrum {-2, 0, 0, 2}.
struct SpinProjectors {
    Operator zero;
    Operator plus;   ///< eigenvalue +2
    Operator minus;  ///< eigenvalue -2
};

/// P_0 = 1 - S^2/4, P_{+-2} = (S^2 +- 2S)/8 for any collective spin S along a unit axis.
inline SpinProjectors axis_projectors(const Operator &s) {
    const Operator s2 = s * s;
    const Operator id = Operator::Identity(4, 4);
    return {id - 0.25 * s2, (s2 + 2.0 * s) / 8.0, (s2 - 2.0 * s) / 8.0};
}

inline SpinProjectors sy_projectors() { return axis_projectors(collective_spin(Axis::Y)); }

/// op (x) 1_fock.
inline Operator lift_qubits(const Operator &qubit_op, int n_fock) {
    return kron(qubit_op, Operator::Identity(n_fock, n_fock));
}

/// 1_qubits (x) op.
inline Operator lift_motion(const Operator &fock_op) {
    return kron(Operator::Identity(4, 4), fock_op);
}

/// Spectral norm (largest singular value).
inline double spectral_norm(const Operator &m) {
    Eigen::JacobiSVD<Operator> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline bool is_hermitian(const Operator &m, double tol = 0.0) {
    if (m.rows() != m.cols()) return false;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Deviation of U^dag U from identity in spectral norm.
inline double unitarity_defect(const Operator &u) {
    return spectral_norm(u.adjoint() * u - Operator::Identity(u.rows(), u.cols()));
}

/// Amplitudes on qubits (x) Fock[offset, offset + n_fock).
struct StateVector {
    Vector amplitudes;
    int n_fock = 1;
    int fock_offset = 0;

    int dim() const { return static_cast<int>(amplitudes.size()); }
    double norm() const { return amplitudes.norm(); }

    /// Amplitude of qubit basis state q with absolute Fock level k.
    cplx at(Qubits q, int k) const {
        return amplitudes(static_cast<int>(q) * n_fock + (k - fock_offset));
    }

    /// Fock-space slice belonging to qubit basis state q.
    auto block(Qubits q) const { return amplitudes.segment(static_cast<int>(q) * n_fock, n_fock); }
};

/// |q>|k> in the window [offset, offset + n_fock).
inline StateVector product_state(Qubits q, int k, int n_fock, int offset = 0) {
    if (k < offset || k >= offset + n_fock) {
        throw DomainError("product_state: Fock level outside window");
    }
    StateVector s{Vector::Zero(4 * n_fock), n_fock, offset};
    s.amplitudes(static_cast<int>(q) * n_fock + (k - offset)) = 1.0;
    return s;
}

/// Qubit state (length 4) times Fock level k.
inline StateVector product_state(const Vector &qubits, int k, int n_fock, int offset = 0) {
    if (qubits.size() != 4) throw DomainError("product_state: qubit vector must have length 4");
    StateVector s{Vector::Zero(4 * n_fock), n_fock, offset};
    for (int q = 0; q < 4; ++q) s.amplitudes(q * n_fock + (k - offset)) = qubits(q);
    return s;
}

inline Vector qubit_basis(Qubits q) {
    Vector v = Vector::Zero(4);
    v(static_cast<int>(q)) = 1.0;
    return v;
}

/// Partial trace over the motion: 4x4 qubit density matrix.
inline Operator reduced_qubits(const StateVector &s) {
    Eigen::Map<const Eigen::MatrixXcd> blocks(s.amplitudes.data(), s.n_fock, 4);
    return (blocks.transpose() * blocks.conjugate()).eval();
}

inline Operator density(const Vector &psi) { return psi * psi.adjoint(); }

}  // namespace msgate
