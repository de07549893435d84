#pragma once

// The two figures of merit the simulator contrasts:
//
//   F_M    -- measurement fidelity, the overlap between the signal input
//             distribution and the meter outcome distribution conditioned on
//             coincidence events (both arms registering exactly one
//             polarization). Computed as a squared Bhattacharyya overlap;
//             the overlap choice is isolated in distribution_overlap() so it
//             can be swapped.
//
//   F_QND  -- the fidelity of non-post-selected QND operation,
//             Tr[E_k(click) E_perp(no-click) (x) |k><k|_s rho_sm]
//             normalized by the total probability of that meter pattern, so
//             1 - F_QND is the probability of mistaking an empty signal
//             mode for a k-polarized photon. For the equal-weight
//             missed-photon error branch this equals 1/(2 - zeta).
//
// Both are computed from full outcome probability tables over
// {H, V, Both, None} per arm; Both (a double click) has no place in an
// {H, V, 0} bookkeeping but must be counted for the table to sum to one.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qndsim/detection.hpp"
#include "qndsim/fock.hpp"
#include "qndsim/tolerances.hpp"

namespace qndsim {

enum class ArmOutcome { H = 0, V = 1, Both = 2, None = 3 };
enum class TableMode { Coincidence, Qnd };

inline constexpr std::array<ArmOutcome, 4> kArmOutcomes = {
    ArmOutcome::H, ArmOutcome::V, ArmOutcome::Both, ArmOutcome::None};

inline const char* to_string(ArmOutcome o) {
  switch (o) {
    case ArmOutcome::H: return "H";
    case ArmOutcome::V: return "V";
    case ArmOutcome::Both: return "Both";
    default: return "None";
  }
}

// Outcome of one arm's pair of polarization detectors.
inline ArmOutcome arm_outcome(ClickOutcome h, ClickOutcome v) {
  const bool ch = h == ClickOutcome::Click;
  const bool cv = v == ClickOutcome::Click;
  if (ch && cv) return ArmOutcome::Both;
  if (ch) return ArmOutcome::H;
  if (cv) return ArmOutcome::V;
  return ArmOutcome::None;
}

// Outcome probabilities per arm. Coincidence mode holds the joint
// signal x meter table; QND mode has no signal detectors, so only the meter
// marginal exists (the signal axis is reported with a "-" sentinel).
class ProbabilityTable {
 public:
  static ProbabilityTable coincidence(
      const std::array<std::array<double, 4>, 4>& cells) {
    ProbabilityTable t(TableMode::Coincidence);
    t.joint_ = cells;
    double sum = 0.0;
    for (const auto& row : cells)
      for (double p : row) {
        check_entry(p);
        sum += p;
      }
    check_total(sum);
    return t;
  }

  static ProbabilityTable qnd(const std::array<double, 4>& meter_cells) {
    ProbabilityTable t(TableMode::Qnd);
    t.meter_ = meter_cells;
    double sum = 0.0;
    for (double p : meter_cells) {
      check_entry(p);
      sum += p;
    }
    check_total(sum);
    return t;
  }

  TableMode mode() const { return mode_; }

  double joint(ArmOutcome signal, ArmOutcome meter) const {
    if (mode_ != TableMode::Coincidence)
      throw std::invalid_argument(
          "ProbabilityTable: QND-mode table has no signal axis");
    return joint_[idx(signal)][idx(meter)];
  }

  double meter_marginal(ArmOutcome meter) const {
    if (mode_ == TableMode::Qnd) return meter_[idx(meter)];
    double p = 0.0;
    for (auto s : kArmOutcomes) p += joint_[idx(s)][idx(meter)];
    return p;
  }

  double total() const {
    double p = 0.0;
    for (auto m : kArmOutcomes) p += meter_marginal(m);
    return p;
  }

 private:
  explicit ProbabilityTable(TableMode mode) : mode_(mode) {}
  static std::size_t idx(ArmOutcome o) { return static_cast<std::size_t>(o); }
  static void check_entry(double p) {
    if (!(p >= -tol::kAlgebra && p <= 1.0 + tol::kAlgebra))
      throw std::runtime_error("ProbabilityTable: entry outside [0, 1]");
  }
  static void check_total(double sum) {
    if (std::abs(sum - 1.0) > tol::kAlgebra)
      throw std::runtime_error("ProbabilityTable: entries do not sum to 1");
  }

  TableMode mode_;
  std::array<std::array<double, 4>, 4> joint_{};
  std::array<double, 4> meter_{};
};

// Exact outcome table for a normalized four-mode state. Coincidence mode
// places detector pairs on both arms, QND mode on the meter arm only.
inline ProbabilityTable build_probability_table(const DensityOperator& rho,
                                                const DetectorModel& detectors,
                                                TableMode mode) {
  if (mode == TableMode::Qnd) {
    std::array<double, 4> meter{};
    for (const auto& pattern : all_patterns(ArmSet::MeterOnly)) {
      auto o = arm_outcome(pattern.outcome(kMeterH), pattern.outcome(kMeterV));
      meter[static_cast<std::size_t>(o)] +=
          pattern_probability(rho, pattern, detectors);
    }
    return ProbabilityTable::qnd(meter);
  }
  std::array<std::array<double, 4>, 4> joint{};
  for (const auto& pattern : all_patterns(ArmSet::SignalAndMeter)) {
    auto s = arm_outcome(pattern.outcome(kSignalH), pattern.outcome(kSignalV));
    auto m = arm_outcome(pattern.outcome(kMeterH), pattern.outcome(kMeterV));
    joint[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)] +=
        pattern_probability(rho, pattern, detectors);
  }
  return ProbabilityTable::coincidence(joint);
}

inline ProbabilityTable build_probability_table(const DensityOperator& rho,
                                                double zeta, TableMode mode) {
  return build_probability_table(rho, DetectorModel(zeta), mode);
}

// Probability pair over the two input polarizations.
struct InputDistribution {
  double p_h;
  double p_v;

  static InputDistribution point_mass(Polarization k) {
    return k == Polarization::H ? InputDistribution{1.0, 0.0}
                                : InputDistribution{0.0, 1.0};
  }

  double at(Polarization k) const {
    return k == Polarization::H ? p_h : p_v;
  }
};

// Squared Bhattacharyya coefficient between two {H, V} distributions. This
// is the single place the overlap measure is defined.
inline double distribution_overlap(const InputDistribution& p,
                                   const InputDistribution& q) {
  const double b = std::sqrt(p.p_h * q.p_h) + std::sqrt(p.p_v * q.p_v);
  return b * b;
}

// Probability that both arms register exactly one polarization.
inline double coincidence_mass(const ProbabilityTable& table) {
  double mass = 0.0;
  for (auto s : {ArmOutcome::H, ArmOutcome::V})
    for (auto m : {ArmOutcome::H, ArmOutcome::V}) mass += table.joint(s, m);
  return mass;
}

// F_M: overlap between the input distribution and the meter outcome
// distribution conditioned on coincidence events (signal and meter each
// register exactly one polarization).
inline double measurement_fidelity(const InputDistribution& input,
                                   const ProbabilityTable& table) {
  if (table.mode() != TableMode::Coincidence)
    throw std::invalid_argument(
        "measurement_fidelity: requires a coincidence-mode table");
  if (std::abs(input.p_h + input.p_v - 1.0) > tol::kAlgebra)
    throw std::invalid_argument(
        "measurement_fidelity: input distribution must sum to 1");

  const double mass = coincidence_mass(table);
  if (mass < tol::kProbabilityFloor)
    throw std::runtime_error("measurement_fidelity: no coincidences");

  std::array<double, 2> meter{};
  for (auto s : {ArmOutcome::H, ArmOutcome::V})
    for (auto m : {ArmOutcome::H, ArmOutcome::V})
      meter[static_cast<std::size_t>(m)] += table.joint(s, m);

  const InputDistribution q{meter[0] / mass, meter[1] / mass};
  return distribution_overlap(input, q);
}

// The two error branches a non-number-resolving detector cannot separate
// from the ideal one: a second, orthogonally polarized photon that failed
// to trigger its detector, or a photon pair in the same mode.
enum class BadBranchKind { OrthogonalMissed, SameModePair };

inline const char* to_string(BadBranchKind k) {
  return k == BadBranchKind::OrthogonalMissed ? "orthogonal_missed"
                                              : "same_mode_pair";
}

// One branch of the mixed pre-detection state: meter occupations plus the
// signal content (a k-polarized photon or vacuum).
struct BranchState {
  double weight;
  std::array<int, 2> meter_occupations;  // (meter-H, meter-V)
  std::optional<Polarization> signal_photon;  // nullopt = vacuum
};

inline std::vector<BranchState> reconstruction_branches(Polarization k,
                                                        double good_weight,
                                                        double bad_weight,
                                                        BadBranchKind kind) {
  if (!(good_weight >= 0.0) || !(bad_weight >= 0.0) ||
      std::abs(good_weight + bad_weight - 1.0) > tol::kRoundTrip)
    throw std::invalid_argument(
        "reconstruction_branches: weights must be non-negative and sum to 1");

  std::array<int, 2> good_meter{};
  good_meter[static_cast<std::size_t>(k)] = 1;

  std::array<int, 2> bad_meter{};
  if (kind == BadBranchKind::OrthogonalMissed) {
    bad_meter = {1, 1};
  } else {
    bad_meter[static_cast<std::size_t>(k)] = 2;
  }

  return {BranchState{good_weight, good_meter, k},
          BranchState{bad_weight, bad_meter, std::nullopt}};
}

// Mixed pre-detection state rho_sm over all four modes: the ideal branch
// carries one k photon in the meter and a k-polarized signal photon, the
// error branch carries the extra meter photon and an empty signal mode.
inline DensityOperator reconstruct_predetection_state(Polarization k,
                                                      double good_weight,
                                                      double bad_weight,
                                                      BadBranchKind kind) {
  const auto branches = reconstruction_branches(k, good_weight, bad_weight, kind);
  FockBasis basis(4, kPhotonCutoff);
  const auto dim = static_cast<Eigen::Index>(basis.size());
  Matrix rho = Matrix::Zero(dim, dim);
  for (const auto& branch : branches) {
    std::vector<int> occ(4, 0);
    if (branch.signal_photon)
      occ[static_cast<std::size_t>(
          mode_of(Party::Signal, *branch.signal_photon).position())] = 1;
    occ[static_cast<std::size_t>(kMeterH.position())] =
        branch.meter_occupations[0];
    occ[static_cast<std::size_t>(kMeterV.position())] =
        branch.meter_occupations[1];
    const auto i =
        static_cast<Eigen::Index>(basis.index_of(FockBasisState{occ}));
    rho(i, i) += branch.weight;
  }
  return DensityOperator(all_modes(), std::move(rho));
}

// Unnormalized numerator and the conditioning probability of the QND
// fidelity trace: both are traces of rho_sm against diagonal operators built
// from E_k(click) E_perp(no-click) on the meter, with and without the signal
// projector |k><k|_s.
struct QndFidelityTerms {
  double numerator;
  double denominator;
};

inline QndFidelityTerms qnd_fidelity_terms(const DensityOperator& rho_sm,
                                           Polarization k,
                                           const DetectorModel& detectors) {
  detail::require_full_mode_set(rho_sm, "qnd_fidelity");
  detail::require_unit_trace(rho_sm, "qnd_fidelity");

  const auto pattern =
      k == Polarization::H
          ? ClickPattern::meter(ClickOutcome::Click, ClickOutcome::NoClick)
          : ClickPattern::meter(ClickOutcome::NoClick, ClickOutcome::Click);
  const auto weights = pattern_weights(rho_sm.basis(), pattern, detectors);

  std::vector<int> signal_occ(4, 0);
  signal_occ[static_cast<std::size_t>(
      mode_of(Party::Signal, k).position())] = 1;

  QndFidelityTerms terms{0.0, 0.0};
  for (std::size_t i = 0; i < rho_sm.dim(); ++i) {
    const double w = weights[i] * rho_sm.diagonal(i);
    terms.denominator += w;
    const auto& occ = rho_sm.basis().state(i).occupations;
    if (occ[0] == signal_occ[0] && occ[1] == signal_occ[1])
      terms.numerator += w;
  }
  return terms;
}

// F_QND: the trace against the ideal conditional output, normalized by the
// probability of the conditioning meter pattern.
inline double qnd_fidelity(const DensityOperator& rho_sm, Polarization k,
                           const DetectorModel& detectors) {
  const auto terms = qnd_fidelity_terms(rho_sm, k, detectors);
  if (terms.denominator < tol::kProbabilityFloor)
    throw std::runtime_error("qnd_fidelity: outcome never occurs");
  return terms.numerator / terms.denominator;
}

inline double qnd_fidelity(const DensityOperator& rho_sm, Polarization k,
                           double zeta) {
  return qnd_fidelity(rho_sm, k, DetectorModel(zeta));
}

// Closed form for the equal-weight missed-photon error branch.
inline double closed_form_qnd(double zeta) {
  if (!(zeta >= 0.0 && zeta <= 1.0))
    throw std::invalid_argument("closed_form_qnd: zeta must lie in [0, 1]");
  return 1.0 / (2.0 - zeta);
}

struct FidelityReport {
  double zeta;
  Polarization input_label;
  std::optional<double> f_m;  // absent when the signal arm is unmonitored
  double f_qnd_trace;
  double f_qnd_closed;
};

// Reconstruction scenario parameters (canonical: equal weights,
// OrthogonalMissed, which reproduces 1/(2 - zeta) identically).
struct ReconstructionSpec {
  Polarization k = Polarization::H;
  double good_weight = 0.5;
  double bad_weight = 0.5;
  BadBranchKind bad_kind = BadBranchKind::OrthogonalMissed;
};

inline std::vector<double> zeta_grid(double zeta_min, double zeta_max,
                                     int steps) {
  if (!(zeta_min >= 0.0 && zeta_min <= zeta_max && zeta_max <= 1.0))
    throw std::invalid_argument("zeta grid: need 0 <= min <= max <= 1");
  if (steps < 1) throw std::invalid_argument("zeta grid: steps must be >= 1");
  std::vector<double> grid;
  if (steps == 1) {
    grid.push_back(zeta_min);
    return grid;
  }
  for (int i = 0; i < steps; ++i)
    grid.push_back(zeta_min +
                   (zeta_max - zeta_min) * static_cast<double>(i) /
                       static_cast<double>(steps - 1));
  return grid;
}

// One fidelity report per grid point. F_M is evaluated on the same state's
// coincidence table with a point-mass input on k.
inline std::vector<FidelityReport> sweep(double zeta_min, double zeta_max,
                                         int steps,
                                         const ReconstructionSpec& scenario) {
  const auto rho = reconstruct_predetection_state(
      scenario.k, scenario.good_weight, scenario.bad_weight,
      scenario.bad_kind);
  const auto input = InputDistribution::point_mass(scenario.k);
  std::vector<FidelityReport> out;
  for (double zeta : zeta_grid(zeta_min, zeta_max, steps)) {
    const DetectorModel detectors(zeta);
    FidelityReport r{zeta, scenario.k, std::nullopt,
                     qnd_fidelity(rho, scenario.k, detectors),
                     closed_form_qnd(zeta)};
    const auto table =
        build_probability_table(rho, detectors, TableMode::Coincidence);
    if (coincidence_mass(table) >= tol::kProbabilityFloor)
      r.f_m = measurement_fidelity(input, table);
    out.push_back(r);
  }
  return out;
}

}  // namespace qndsim
