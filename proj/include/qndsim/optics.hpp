#pragma once

// Single-photon mode transformations (beam splitters, wave plates, phases),
// their second-quantized lift to the truncated Fock space, and application
// of composed circuits to states.
//
// Conventions, fixed once and used everywhere:
//   - mode operators transform as  a_i^dag -> sum_j U_ji a_j^dag,  so the
//     single-photon action of a ModeUnitary is its matrix acting on
//     amplitude columns;
//   - rotations use the real form [[cos t, -sin t], [sin t, cos t]].
//
// Lifted matrix elements follow the standard permanent formula
//   <m|U|n> = per(U[m,n]) / sqrt(prod_i m_i! prod_j n_j!)
// where U[m,n] repeats row j m_j times and column i n_i times. At the
// global two-photon cutoff these matrices are at most 2x2.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qndsim/fock.hpp"
#include "qndsim/tolerances.hpp"

namespace qndsim {

// Permanent by direct expansion along the first row.
inline Complex permanent(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("permanent: matrix must be square");
  const Eigen::Index n = m.rows();
  if (n == 0) return Complex(1.0, 0.0);
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) + m(0, 1) * m(1, 0);
  Complex sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    sum += m(0, j) * permanent(minor);
  }
  return sum;
}

// Unitary transformation of the declared mode operators.
class ModeUnitary {
 public:
  ModeUnitary(std::vector<ModeIndex> modes, Matrix matrix)
      : modes_(std::move(modes)), mat_(std::move(matrix)) {
    detail::validate_modes(modes_);
    const auto d = static_cast<Eigen::Index>(modes_.size());
    if (mat_.rows() != d || mat_.cols() != d)
      throw std::invalid_argument("ModeUnitary: matrix dimension mismatch");
    if (unitarity_defect() > tol::kAlgebra)
      throw std::invalid_argument("ModeUnitary: matrix is not unitary");
  }

  const std::vector<ModeIndex>& modes() const { return modes_; }
  const Matrix& matrix() const { return mat_; }

  double unitarity_defect() const {
    const auto d = mat_.rows();
    return (mat_.adjoint() * mat_ - Matrix::Identity(d, d))
        .cwiseAbs()
        .maxCoeff();
  }

 private:
  std::vector<ModeIndex> modes_;
  Matrix mat_;
};

// Beam splitter between the signal and meter spatial modes, acting
// independently on the H pair (theta_h) and the V pair (theta_v). Equal
// angles give a polarization-independent splitter, unequal angles a
// partially polarizing one; pi/4 is 50:50.
inline ModeUnitary beam_splitter(double theta_h, double theta_v) {
  if (!std::isfinite(theta_h) || !std::isfinite(theta_v))
    throw std::invalid_argument("beam_splitter: non-finite angle");
  Matrix u = Matrix::Zero(4, 4);
  auto fill = [&u](int s, int m, double theta) {
    u(s, s) = std::cos(theta);
    u(s, m) = -std::sin(theta);
    u(m, s) = std::sin(theta);
    u(m, m) = std::cos(theta);
  };
  fill(kSignalH.position(), kMeterH.position(), theta_h);
  fill(kSignalV.position(), kMeterV.position(), theta_v);
  return ModeUnitary(all_modes(), std::move(u));
}

// Rotation between the H and V modes of one party.
inline ModeUnitary wave_plate(Party party, double angle) {
  if (!std::isfinite(angle))
    throw std::invalid_argument("wave_plate: non-finite angle");
  Matrix u(2, 2);
  u << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return ModeUnitary({mode_of(party, Polarization::H),
                      mode_of(party, Polarization::V)},
                     std::move(u));
}

// Phase e^{i phi} on a single mode.
inline ModeUnitary mode_phase(ModeIndex mode, double phi) {
  if (!std::isfinite(phi))
    throw std::invalid_argument("mode_phase: non-finite angle");
  Matrix u(1, 1);
  u(0, 0) = std::exp(Complex(0.0, phi));
  return ModeUnitary({mode}, std::move(u));
}

// Extend a unitary to a larger mode set, acting as the identity elsewhere.
inline ModeUnitary embed(const ModeUnitary& u,
                         const std::vector<ModeIndex>& modes) {
  std::vector<std::size_t> slots;
  for (auto m : u.modes()) {
    bool found = false;
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (modes[i] == m) {
        slots.push_back(i);
        found = true;
      }
    if (!found)
      throw std::invalid_argument("embed: target modes must contain " +
                                  m.name());
  }
  const auto d = static_cast<Eigen::Index>(modes.size());
  Matrix out = Matrix::Identity(d, d);
  for (std::size_t r = 0; r < slots.size(); ++r)
    for (std::size_t c = 0; c < slots.size(); ++c)
      out(static_cast<Eigen::Index>(slots[r]),
          static_cast<Eigen::Index>(slots[c])) =
          u.matrix()(static_cast<Eigen::Index>(r),
                     static_cast<Eigen::Index>(c));
  std::vector<ModeIndex> copy = modes;
  return ModeUnitary(std::move(copy), std::move(out));
}

// Ordered optical elements; front of the list is applied first.
struct Circuit {
  std::vector<ModeUnitary> elements;
};

// Second-quantized action of a mode unitary on the enumerated Fock basis.
// Unitary and block diagonal in total photon number by construction.
class LiftedOperator {
 public:
  LiftedOperator(Matrix matrix, ModeUnitary provenance)
      : mat_(std::move(matrix)), provenance_(std::move(provenance)) {}

  const Matrix& matrix() const { return mat_; }
  const ModeUnitary& provenance() const { return provenance_; }

 private:
  Matrix mat_;
  ModeUnitary provenance_;
};

inline LiftedOperator lift_unitary(const ModeUnitary& u,
                                   const FockBasis& basis) {
  if (basis.n_modes() != static_cast<int>(u.modes().size()))
    throw std::invalid_argument("lift_unitary: basis/unitary mode mismatch");

  auto repeat_modes = [](const FockBasisState& s) {
    std::vector<int> modes;
    for (std::size_t m = 0; m < s.occupations.size(); ++m)
      for (int t = 0; t < s.occupations[m]; ++t)
        modes.push_back(static_cast<int>(m));
    return modes;
  };
  auto occupation_factorial = [](const FockBasisState& s) {
    double f = 1.0;
    for (int n : s.occupations)
      for (int t = 2; t <= n; ++t) f *= t;
    return f;
  };

  const auto dim = static_cast<Eigen::Index>(basis.size());
  Matrix lifted = Matrix::Zero(dim, dim);
  for (std::size_t row = 0; row < basis.size(); ++row) {
    const auto& out_state = basis.state(row);
    const auto out_modes = repeat_modes(out_state);
    for (std::size_t col = 0; col < basis.size(); ++col) {
      const auto& in_state = basis.state(col);
      // Photon number is conserved: cross-grade entries stay structurally 0.
      if (in_state.total() != out_state.total()) continue;
      const auto in_modes = repeat_modes(in_state);
      const auto k = static_cast<Eigen::Index>(out_modes.size());
      Matrix sub(k, k);
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c)
          sub(r, c) = u.matrix()(out_modes[static_cast<std::size_t>(r)],
                                 in_modes[static_cast<std::size_t>(c)]);
      lifted(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
          permanent(sub) / std::sqrt(occupation_factorial(out_state) *
                                     occupation_factorial(in_state));
    }
  }

  const double defect =
      (lifted.adjoint() * lifted - Matrix::Identity(dim, dim))
          .cwiseAbs()
          .maxCoeff();
  if (defect > tol::kAlgebra)
    throw std::runtime_error("lift_unitary: lifted operator failed unitarity");
  return LiftedOperator(std::move(lifted), u);
}

// Product of the lifted elements, applied in circuit order.
inline Matrix lifted_circuit_matrix(const Circuit& circuit,
                                    const std::vector<ModeIndex>& modes,
                                    const FockBasis& basis) {
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Matrix product = Matrix::Identity(dim, dim);
  for (const auto& element : circuit.elements)
    product = lift_unitary(embed(element, modes), basis).matrix() * product;
  return product;
}

inline StateVector apply_circuit(const StateVector& psi,
                                 const Circuit& circuit) {
  Matrix l = lifted_circuit_matrix(circuit, psi.modes(), psi.basis());
  return StateVector(psi.modes(), l * psi.amplitudes());
}

inline DensityOperator apply_circuit(const DensityOperator& rho,
                                     const Circuit& circuit) {
  detail::require_unit_trace(rho, "apply_circuit");
  Matrix l = lifted_circuit_matrix(circuit, rho.modes(), rho.basis());
  return DensityOperator(rho.modes(), l * rho.matrix() * l.adjoint());
}

}  // namespace qndsim
