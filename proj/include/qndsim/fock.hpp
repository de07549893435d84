#pragma once

// Truncated multimode Fock space: basis enumeration plus state-vector and
// density-operator algebra (tensor product, partial trace, expectation).
//
// The simulator works on four optical modes -- signal and meter arm, each
// with H and V polarization -- under a global cutoff of two photons in
// total. The basis is ordered graded by total photon number, lexicographic
// by occupation vector within a grade, so photon-number-preserving
// operators are block diagonal and all outputs are reproducible.
//
// Everything here is an immutable value; operations are pure functions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qndsim/tolerances.hpp"

namespace qndsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Global total-photon cutoff. The detector POVMs and every shipped state
// live on at most two photons; tensor products drop anything beyond this
// (see tensor() below).
inline constexpr int kPhotonCutoff = 2;

enum class Party { Signal = 0, Meter = 1 };
enum class Polarization { H = 0, V = 1 };

inline Polarization orthogonal(Polarization p) {
  return p == Polarization::H ? Polarization::V : Polarization::H;
}

inline const char* to_string(Polarization p) {
  return p == Polarization::H ? "H" : "V";
}

// One of the four physical modes. Fixed total order:
// signal-H (0), signal-V (1), meter-H (2), meter-V (3).
struct ModeIndex {
  Party party;
  Polarization polarization;

  constexpr int position() const {
    return 2 * static_cast<int>(party) + static_cast<int>(polarization);
  }

  std::string name() const {
    std::string s = party == Party::Signal ? "signal_" : "meter_";
    return s + (polarization == Polarization::H ? "h" : "v");
  }

  friend constexpr bool operator==(ModeIndex a, ModeIndex b) {
    return a.party == b.party && a.polarization == b.polarization;
  }
  friend constexpr bool operator<(ModeIndex a, ModeIndex b) {
    return a.position() < b.position();
  }
};

inline constexpr ModeIndex kSignalH{Party::Signal, Polarization::H};
inline constexpr ModeIndex kSignalV{Party::Signal, Polarization::V};
inline constexpr ModeIndex kMeterH{Party::Meter, Polarization::H};
inline constexpr ModeIndex kMeterV{Party::Meter, Polarization::V};

inline constexpr std::array<ModeIndex, 4> kAllModes = {kSignalH, kSignalV,
                                                       kMeterH, kMeterV};

inline constexpr ModeIndex mode_of(Party party, Polarization pol) {
  return ModeIndex{party, pol};
}

inline std::vector<ModeIndex> signal_modes() { return {kSignalH, kSignalV}; }
inline std::vector<ModeIndex> meter_modes() { return {kMeterH, kMeterV}; }
inline std::vector<ModeIndex> all_modes() {
  return {kAllModes.begin(), kAllModes.end()};
}

// Occupation vector over a declared mode list. Two states compare equal
// iff all occupations are equal.
struct FockBasisState {
  std::vector<int> occupations;

  int total() const {
    return std::accumulate(occupations.begin(), occupations.end(), 0);
  }
  bool operator==(const FockBasisState&) const = default;
};

// All occupation vectors with total <= max_total, graded by total photon
// number and lexicographic within a grade.
inline std::vector<FockBasisState> enumerate_basis(int n_modes,
                                                   int max_total) {
  if (n_modes < 1) throw std::invalid_argument("enumerate_basis: n_modes < 1");
  if (max_total < 0)
    throw std::invalid_argument("enumerate_basis: max_total < 0");

  std::vector<FockBasisState> out;
  std::vector<int> occ(static_cast<std::size_t>(n_modes), 0);
  // Emit occupation vectors of exact total `remaining`, lexicographically.
  auto emit = [&](auto&& self, int mode, int remaining) -> void {
    if (mode == n_modes - 1) {
      occ[static_cast<std::size_t>(mode)] = remaining;
      out.push_back(FockBasisState{occ});
      return;
    }
    for (int n = 0; n <= remaining; ++n) {
      occ[static_cast<std::size_t>(mode)] = n;
      self(self, mode + 1, remaining - n);
    }
  };
  for (int grade = 0; grade <= max_total; ++grade) emit(emit, 0, grade);
  return out;
}

// Enumerated basis with index lookup.
class FockBasis {
 public:
  FockBasis(int n_modes, int max_total)
      : n_modes_(n_modes),
        max_total_(max_total),
        states_(enumerate_basis(n_modes, max_total)) {}

  int n_modes() const { return n_modes_; }
  int max_total() const { return max_total_; }
  std::size_t size() const { return states_.size(); }
  const FockBasisState& state(std::size_t i) const { return states_.at(i); }
  const std::vector<FockBasisState>& states() const { return states_; }

  std::optional<std::size_t> find(const FockBasisState& s) const {
    for (std::size_t i = 0; i < states_.size(); ++i)
      if (states_[i] == s) return i;
    return std::nullopt;
  }

  std::size_t index_of(const FockBasisState& s) const {
    auto i = find(s);
    if (!i) throw std::invalid_argument("FockBasis: state not in basis");
    return *i;
  }

 private:
  int n_modes_;
  int max_total_;
  std::vector<FockBasisState> states_;
};

namespace detail {

inline void validate_modes(const std::vector<ModeIndex>& modes) {
  if (modes.empty()) throw std::invalid_argument("empty mode list");
  for (std::size_t i = 1; i < modes.size(); ++i)
    if (!(modes[i - 1] < modes[i]))
      throw std::invalid_argument(
          "mode list must be strictly ascending in the fixed mode order");
}

inline bool contains(const std::vector<ModeIndex>& modes, ModeIndex m) {
  for (auto x : modes)
    if (x == m) return true;
  return false;
}

}  // namespace detail

// Complex amplitude vector over the enumerated basis of a declared mode set.
class StateVector {
 public:
  StateVector(std::vector<ModeIndex> modes, Vector amplitudes)
      : modes_(std::move(modes)),
        basis_(static_cast<int>(modes_.size()), kPhotonCutoff),
        amp_(std::move(amplitudes)) {
    detail::validate_modes(modes_);
    if (static_cast<std::size_t>(amp_.size()) != basis_.size())
      throw std::invalid_argument("StateVector: amplitude dimension mismatch");
  }

  static StateVector basis_state(std::vector<ModeIndex> modes,
                                 const std::vector<int>& occupations) {
    FockBasis basis(static_cast<int>(modes.size()), kPhotonCutoff);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(basis.size()));
    v(static_cast<Eigen::Index>(
        basis.index_of(FockBasisState{occupations}))) = 1.0;
    return StateVector(std::move(modes), std::move(v));
  }

  static StateVector vacuum(std::vector<ModeIndex> modes) {
    std::vector<int> occ(modes.size(), 0);
    return basis_state(std::move(modes), occ);
  }

  const std::vector<ModeIndex>& modes() const { return modes_; }
  const FockBasis& basis() const { return basis_; }
  const Vector& amplitudes() const { return amp_; }

  double norm() const { return amp_.norm(); }
  bool is_normalized(double tolerance = tol::kAlgebra) const {
    return std::abs(amp_.squaredNorm() - 1.0) <= tolerance;
  }
  StateVector normalized() const {
    double n = norm();
    if (n <= tol::kProbabilityFloor)
      throw std::runtime_error("StateVector: cannot normalize zero vector");
    return StateVector(modes_, amp_ / n);
  }

 private:
  std::vector<ModeIndex> modes_;
  FockBasis basis_;
  Vector amp_;
};

// Complex square matrix over the enumerated basis of a declared mode set.
class DensityOperator {
 public:
  DensityOperator(std::vector<ModeIndex> modes, Matrix matrix)
      : modes_(std::move(modes)),
        basis_(static_cast<int>(modes_.size()), kPhotonCutoff),
        mat_(std::move(matrix)) {
    detail::validate_modes(modes_);
    const auto dim = static_cast<Eigen::Index>(basis_.size());
    if (mat_.rows() != dim || mat_.cols() != dim)
      throw std::invalid_argument("DensityOperator: matrix dimension mismatch");
  }

  static DensityOperator from_pure(const StateVector& psi) {
    return DensityOperator(psi.modes(),
                           psi.amplitudes() * psi.amplitudes().adjoint());
  }

  const std::vector<ModeIndex>& modes() const { return modes_; }
  const FockBasis& basis() const { return basis_; }
  const Matrix& matrix() const { return mat_; }
  std::size_t dim() const { return basis_.size(); }

  double trace_real() const { return mat_.trace().real(); }

  // Probability weight on basis state i (real part of the diagonal).
  double diagonal(std::size_t i) const {
    return mat_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))
        .real();
  }

 private:
  std::vector<ModeIndex> modes_;
  FockBasis basis_;
  Matrix mat_;
};

struct DensityDiagnostics {
  double hermiticity_defect;  // max-norm of rho - rho^dagger
  double min_eigenvalue;
  double trace_defect;  // |Tr rho - 1|
};

inline DensityDiagnostics density_diagnostics(const DensityOperator& rho) {
  const Matrix& m = rho.matrix();
  DensityDiagnostics d;
  d.hermiticity_defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(
      ((m + m.adjoint()) / 2.0).eval());
  d.min_eigenvalue = solver.eigenvalues().minCoeff();
  d.trace_defect = std::abs(m.trace() - Complex(1.0, 0.0));
  return d;
}

// A normalized density operator must be Hermitian, positive and unit-trace
// within the algebraic tolerance.
inline bool is_valid_normalized_density(const DensityOperator& rho,
                                        double tolerance = tol::kAlgebra) {
  auto d = density_diagnostics(rho);
  return d.hermiticity_defect <= tolerance &&
         d.min_eigenvalue >= -tolerance && d.trace_defect <= tolerance;
}

namespace detail {

// Cheap normalization gate used at operation entry points (full positivity
// diagnostics are reserved for validation and tests).
inline void require_unit_trace(const DensityOperator& rho, const char* where) {
  if (std::abs(rho.trace_real() - 1.0) > tol::kAlgebra)
    throw std::invalid_argument(std::string(where) +
                                ": density operator is not normalized");
}

}  // namespace detail

// Kronecker-structured product over the union mode set, re-indexed into the
// global basis order. Pairs of basis states whose combined total exceeds the
// global cutoff are dropped; every shipped scenario has exactly zero weight
// there (assert with tensor_truncation_weight).
inline DensityOperator tensor(const DensityOperator& a,
                              const DensityOperator& b) {
  for (auto m : a.modes())
    if (detail::contains(b.modes(), m))
      throw std::invalid_argument("tensor: operands share mode " + m.name());

  std::vector<ModeIndex> modes = a.modes();
  modes.insert(modes.end(), b.modes().begin(), b.modes().end());
  std::sort(modes.begin(), modes.end());

  // Position of each factor's modes inside the union list.
  auto slot_map = [&modes](const std::vector<ModeIndex>& sub) {
    std::vector<std::size_t> slots;
    for (auto m : sub)
      for (std::size_t i = 0; i < modes.size(); ++i)
        if (modes[i] == m) slots.push_back(i);
    return slots;
  };
  const auto slots_a = slot_map(a.modes());
  const auto slots_b = slot_map(b.modes());

  FockBasis basis(static_cast<int>(modes.size()), kPhotonCutoff);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Matrix out = Matrix::Zero(dim, dim);

  auto merged_index = [&](const FockBasisState& sa, const FockBasisState& sb)
      -> std::optional<std::size_t> {
    if (sa.total() + sb.total() > kPhotonCutoff) return std::nullopt;
    FockBasisState merged{std::vector<int>(modes.size(), 0)};
    for (std::size_t i = 0; i < slots_a.size(); ++i)
      merged.occupations[slots_a[i]] = sa.occupations[i];
    for (std::size_t i = 0; i < slots_b.size(); ++i)
      merged.occupations[slots_b[i]] = sb.occupations[i];
    return basis.index_of(merged);
  };

  for (std::size_t ia = 0; ia < a.dim(); ++ia)
    for (std::size_t ib = 0; ib < b.dim(); ++ib) {
      auto row = merged_index(a.basis().state(ia), b.basis().state(ib));
      if (!row) continue;
      for (std::size_t ja = 0; ja < a.dim(); ++ja)
        for (std::size_t jb = 0; jb < b.dim(); ++jb) {
          auto col = merged_index(a.basis().state(ja), b.basis().state(jb));
          if (!col) continue;
          out(static_cast<Eigen::Index>(*row),
              static_cast<Eigen::Index>(*col)) +=
              a.matrix()(static_cast<Eigen::Index>(ia),
                         static_cast<Eigen::Index>(ja)) *
              b.matrix()(static_cast<Eigen::Index>(ib),
                         static_cast<Eigen::Index>(jb));
        }
    }
  return DensityOperator(std::move(modes), std::move(out));
}

// Probability weight that tensor() would drop for this pair of operands.
inline double tensor_truncation_weight(const DensityOperator& a,
                                       const DensityOperator& b) {
  double dropped = 0.0;
  for (std::size_t ia = 0; ia < a.dim(); ++ia)
    for (std::size_t ib = 0; ib < b.dim(); ++ib)
      if (a.basis().state(ia).total() + b.basis().state(ib).total() >
          kPhotonCutoff)
        dropped += a.diagonal(ia) * b.diagonal(ib);
  return dropped;
}

// Reduced operator over `keep`, summing out the remaining modes. Trace is
// preserved exactly (the kept totals never exceed the cutoff).
inline DensityOperator partial_trace(const DensityOperator& rho,
                                     const std::vector<ModeIndex>& keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep set");
  std::vector<ModeIndex> kept = keep;
  std::sort(kept.begin(), kept.end());
  std::vector<std::size_t> keep_slots, drop_slots;
  for (std::size_t i = 0; i < rho.modes().size(); ++i) {
    if (detail::contains(kept, rho.modes()[i]))
      keep_slots.push_back(i);
    else
      drop_slots.push_back(i);
  }
  if (keep_slots.size() != kept.size())
    throw std::invalid_argument(
        "partial_trace: keep set is not a subset of the operator's modes");

  FockBasis out_basis(static_cast<int>(kept.size()), kPhotonCutoff);
  const auto out_dim = static_cast<Eigen::Index>(out_basis.size());
  Matrix out = Matrix::Zero(out_dim, out_dim);

  auto split = [&](const FockBasisState& s) {
    FockBasisState kept_part{std::vector<int>(keep_slots.size())};
    FockBasisState drop_part{std::vector<int>(drop_slots.size())};
    for (std::size_t i = 0; i < keep_slots.size(); ++i)
      kept_part.occupations[i] = s.occupations[keep_slots[i]];
    for (std::size_t i = 0; i < drop_slots.size(); ++i)
      drop_part.occupations[i] = s.occupations[drop_slots[i]];
    return std::pair{kept_part, drop_part};
  };

  for (std::size_t i = 0; i < rho.dim(); ++i) {
    auto [ki, di] = split(rho.basis().state(i));
    for (std::size_t j = 0; j < rho.dim(); ++j) {
      auto [kj, dj] = split(rho.basis().state(j));
      if (!(di == dj)) continue;
      out(static_cast<Eigen::Index>(out_basis.index_of(ki)),
          static_cast<Eigen::Index>(out_basis.index_of(kj))) +=
          rho.matrix()(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(j));
    }
  }
  return DensityOperator(std::move(kept), std::move(out));
}

// Tr[op * rho]. The trace of a Hermitian observable against a valid state is
// real; any imaginary residue above tolerance is an error, below it is
// discarded.
inline double expectation(const DensityOperator& rho, const Matrix& op) {
  const auto dim = static_cast<Eigen::Index>(rho.dim());
  if (op.rows() != dim || op.cols() != dim)
    throw std::invalid_argument("expectation: operator dimension mismatch");
  const Complex tr = (op * rho.matrix()).trace();
  if (std::abs(tr.imag()) > tol::kAlgebra)
    throw std::runtime_error("expectation: imaginary residue above tolerance");
  return tr.real();
}

}  // namespace qndsim
