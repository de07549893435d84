#pragma once

// Imperfect non-number-resolving photodetectors as two-outcome POVMs.
//
// A detector with quantum efficiency zeta cannot tell one photon from two;
// on the truncated space {|0>, |1>, |2>} of its mode the outcome operators
// are diagonal:
//   no-click: diag(1, 1-zeta, (1-zeta)^2)
//   click:    diag(0, zeta,   zeta*(2-zeta))
// They sum to the identity on the truncated space. Dark counts are excluded
// (the vacuum never clicks). Because every element is diagonal in the
// occupation basis, click-pattern probabilities reduce to weighted sums over
// the diagonal of rho.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qndsim/fock.hpp"
#include "qndsim/tolerances.hpp"

namespace qndsim {

enum class ClickOutcome { NoClick = 0, Click = 1 };
enum class ArmSet { MeterOnly, SignalAndMeter };

inline const char* to_string(ClickOutcome c) {
  return c == ClickOutcome::Click ? "click" : "no-click";
}

// Quantum efficiency per detector mode. Detectors share one zeta unless a
// per-mode assignment is given.
class DetectorModel {
 public:
  explicit DetectorModel(double zeta) { zetas_.fill(check(zeta)); }

  static DetectorModel per_mode(double signal_h, double signal_v,
                                double meter_h, double meter_v) {
    DetectorModel d(0.0);
    d.zetas_ = {check(signal_h), check(signal_v), check(meter_h),
                check(meter_v)};
    return d;
  }

  double zeta(ModeIndex mode) const {
    return zetas_[static_cast<std::size_t>(mode.position())];
  }

  bool uniform() const {
    return zetas_[0] == zetas_[1] && zetas_[1] == zetas_[2] &&
           zetas_[2] == zetas_[3];
  }

 private:
  static double check(double zeta) {
    if (!(zeta >= 0.0 && zeta <= 1.0))
      throw std::invalid_argument("DetectorModel: zeta must lie in [0, 1]");
    return zeta;
  }
  std::array<double, 4> zetas_{};
};

// Diagonal POVM entry for n photons at the detector.
inline double povm_entry(ClickOutcome outcome, double zeta, int n) {
  if (!(zeta >= 0.0 && zeta <= 1.0))
    throw std::invalid_argument("povm_entry: zeta must lie in [0, 1]");
  if (n < 0 || n > kPhotonCutoff)
    throw std::invalid_argument("povm_entry: occupation outside {0, 1, 2}");
  switch (n) {
    case 0:
      return outcome == ClickOutcome::NoClick ? 1.0 : 0.0;
    case 1:
      return outcome == ClickOutcome::NoClick ? 1.0 - zeta : zeta;
    default:
      return outcome == ClickOutcome::NoClick ? (1.0 - zeta) * (1.0 - zeta)
                                              : zeta * (2.0 - zeta);
  }
}

// One POVM outcome operator on a single detector mode's {|0>, |1>, |2>}.
struct PovmElement {
  ClickOutcome outcome;
  std::array<double, 3> diag;
};

inline PovmElement povm_element(ClickOutcome outcome, double zeta) {
  return PovmElement{outcome,
                     {povm_entry(outcome, zeta, 0), povm_entry(outcome, zeta, 1),
                      povm_entry(outcome, zeta, 2)}};
}

// Max-norm of E(no-click) + E(click) - 1 on the truncated space.
inline double completeness_defect(double zeta) {
  const auto e0 = povm_element(ClickOutcome::NoClick, zeta);
  const auto e1 = povm_element(ClickOutcome::Click, zeta);
  double defect = 0.0;
  for (int n = 0; n < 3; ++n)
    defect = std::max(defect,
                      std::abs(e0.diag[static_cast<std::size_t>(n)] +
                               e1.diag[static_cast<std::size_t>(n)] - 1.0));
  return defect;
}

// One outcome per declared detector. Detectors sit on the meter arm alone
// (QND operation) or on both arms (coincidence operation).
class ClickPattern {
 public:
  static ClickPattern meter(ClickOutcome meter_h, ClickOutcome meter_v) {
    ClickPattern p(ArmSet::MeterOnly);
    p.outcomes_[static_cast<std::size_t>(kMeterH.position())] = meter_h;
    p.outcomes_[static_cast<std::size_t>(kMeterV.position())] = meter_v;
    return p;
  }

  static ClickPattern full(ClickOutcome signal_h, ClickOutcome signal_v,
                           ClickOutcome meter_h, ClickOutcome meter_v) {
    ClickPattern p(ArmSet::SignalAndMeter);
    p.outcomes_ = {signal_h, signal_v, meter_h, meter_v};
    return p;
  }

  ArmSet arms() const { return arms_; }

  bool monitored(ModeIndex mode) const {
    return arms_ == ArmSet::SignalAndMeter || mode.party == Party::Meter;
  }

  ClickOutcome outcome(ModeIndex mode) const {
    if (!monitored(mode))
      throw std::invalid_argument("ClickPattern: no detector on " +
                                  mode.name());
    return outcomes_[static_cast<std::size_t>(mode.position())];
  }

  std::vector<ModeIndex> monitored_modes() const {
    std::vector<ModeIndex> out;
    for (auto m : kAllModes)
      if (monitored(m)) out.push_back(m);
    return out;
  }

  // Bit encoding over monitored modes in the fixed mode order (bit set =
  // click); stable ordering for reports and sampling counts.
  unsigned id() const {
    unsigned bits = 0, shift = 0;
    for (auto m : kAllModes)
      if (monitored(m)) {
        if (outcome(m) == ClickOutcome::Click) bits |= 1u << shift;
        ++shift;
      }
    return bits;
  }

  static ClickPattern from_id(ArmSet arms, unsigned id) {
    auto bit = [id](unsigned s) {
      return (id >> s) & 1u ? ClickOutcome::Click : ClickOutcome::NoClick;
    };
    if (arms == ArmSet::MeterOnly) {
      if (id >= 4u) throw std::invalid_argument("ClickPattern: bad id");
      return meter(bit(0), bit(1));
    }
    if (id >= 16u) throw std::invalid_argument("ClickPattern: bad id");
    return full(bit(0), bit(1), bit(2), bit(3));
  }

  std::string label() const {
    std::string s;
    for (auto m : monitored_modes()) {
      if (!s.empty()) s += ' ';
      s += (m.party == Party::Signal ? "s" : "m");
      s += (m.polarization == Polarization::H ? 'H' : 'V');
      s += outcome(m) == ClickOutcome::Click ? ":click" : ":-";
    }
    return s;
  }

 private:
  explicit ClickPattern(ArmSet arms) : arms_(arms) {}
  ArmSet arms_;
  std::array<ClickOutcome, 4> outcomes_{};
};

inline unsigned pattern_count(ArmSet arms) {
  return arms == ArmSet::MeterOnly ? 4u : 16u;
}

inline std::vector<ClickPattern> all_patterns(ArmSet arms) {
  std::vector<ClickPattern> out;
  for (unsigned id = 0; id < pattern_count(arms); ++id)
    out.push_back(ClickPattern::from_id(arms, id));
  return out;
}

namespace detail {

inline void require_full_mode_set(const DensityOperator& rho,
                                  const char* where) {
  if (rho.modes().size() != kAllModes.size())
    throw std::invalid_argument(std::string(where) +
                                ": state must cover all four modes");
}

}  // namespace detail

// Diagonal of the lifted pattern operator (tensor of per-detector POVM
// elements, identity on unmonitored modes) over the full basis.
inline std::vector<double> pattern_weights(const FockBasis& basis,
                                           const ClickPattern& pattern,
                                           const DetectorModel& detectors) {
  std::vector<double> weights(basis.size(), 1.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& occ = basis.state(i).occupations;
    for (auto m : pattern.monitored_modes())
      weights[i] *= povm_entry(pattern.outcome(m), detectors.zeta(m),
                               occ[static_cast<std::size_t>(m.position())]);
  }
  return weights;
}

// Tr[(tensor of POVM elements) rho] for a normalized four-mode state.
inline double pattern_probability(const DensityOperator& rho,
                                  const ClickPattern& pattern,
                                  const DetectorModel& detectors) {
  detail::require_full_mode_set(rho, "pattern_probability");
  detail::require_unit_trace(rho, "pattern_probability");
  const auto weights = pattern_weights(rho.basis(), pattern, detectors);
  double p = 0.0;
  for (std::size_t i = 0; i < rho.dim(); ++i) p += weights[i] * rho.diagonal(i);
  return p;
}

inline double pattern_probability(const DensityOperator& rho,
                                  const ClickPattern& pattern, double zeta) {
  return pattern_probability(rho, pattern, DetectorModel(zeta));
}

struct ConditionalState {
  double probability;
  DensityOperator signal_state;
};

// Conditions rho_sm on a meter-arm click pattern and returns the normalized
// reduced signal state. The POVM product M is diagonal, so the symmetric
// update sqrt(M) rho sqrt(M) / p is an entrywise reweighting.
inline ConditionalState conditional_signal_state(const DensityOperator& rho_sm,
                                                 const ClickPattern& pattern,
                                                 const DetectorModel& detectors) {
  detail::require_full_mode_set(rho_sm, "conditional_signal_state");
  detail::require_unit_trace(rho_sm, "conditional_signal_state");
  if (pattern.arms() != ArmSet::MeterOnly)
    throw std::invalid_argument(
        "conditional_signal_state: pattern must be declared on the meter arm "
        "only");

  const auto weights = pattern_weights(rho_sm.basis(), pattern, detectors);
  double p = 0.0;
  for (std::size_t i = 0; i < rho_sm.dim(); ++i)
    p += weights[i] * rho_sm.diagonal(i);
  if (p < tol::kProbabilityFloor)
    throw std::runtime_error(
        "conditional_signal_state: unconditionable outcome (probability below "
        "floor)");

  const auto dim = static_cast<Eigen::Index>(rho_sm.dim());
  Matrix updated(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      updated(i, j) = std::sqrt(weights[static_cast<std::size_t>(i)]) *
                      std::sqrt(weights[static_cast<std::size_t>(j)]) *
                      rho_sm.matrix()(i, j) / p;

  DensityOperator conditioned(rho_sm.modes(), std::move(updated));
  return ConditionalState{p, partial_trace(conditioned, signal_modes())};
}

inline ConditionalState conditional_signal_state(const DensityOperator& rho_sm,
                                                 const ClickPattern& pattern,
                                                 double zeta) {
  return conditional_signal_state(rho_sm, pattern, DetectorModel(zeta));
}

}  // namespace qndsim
