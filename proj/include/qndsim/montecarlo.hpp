#pragma once

// Shot-by-shot sampling of detector click patterns, cross-validating the
// exact POVM probabilities.
//
// Sampling from the diagonal of rho in the occupation basis is exact here
// because every measurement operator in this simulator is diagonal in that
// basis. Do not reuse this sampler with observables that carry
// occupation-basis coherences.
//
// Per-shot randomness is counter-based so counts are bit-identical for a
// given (seed, shots) regardless of evaluation order or chunking. The
// derivation is fixed:
//   mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//             z *= 0x94D049BB133111EB; return z ^ (z >> 31)
//   shot state s0 = mix64(mix64(seed + 0x9E3779B97F4A7C15) ^ shot_index)
//   draw:      s += 0x9E3779B97F4A7C15; output mix64(s)
//   unit:      top 53 bits scaled to [0, 1)
// Within a shot the draw order is: one uniform for the basis outcome, then
// one Bernoulli(zeta) per photon in each monitored mode, modes in the fixed
// order, photons within a mode in sequence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qndsim/analysis.hpp"
#include "qndsim/detection.hpp"
#include "qndsim/fock.hpp"

namespace qndsim {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class ShotRng {
 public:
  ShotRng(std::uint64_t seed, std::uint64_t shot_index)
      : state_(mix64(mix64(seed + kGolden) ^ shot_index)) {}

  std::uint64_t next() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::uint64_t state_;
};

// One shot: the occupation configuration drawn from the diagonal of rho and
// the click pattern its photons produced.
struct ShotSample {
  std::size_t basis_index;
  unsigned pattern_id;
};

namespace detail {

inline std::vector<double> diagonal_distribution(const DensityOperator& rho) {
  std::vector<double> p(rho.dim());
  for (std::size_t i = 0; i < rho.dim(); ++i)
    p[i] = std::max(rho.diagonal(i), 0.0);
  return p;
}

}  // namespace detail

inline ShotSample sample_shot(const DensityOperator& rho,
                              const std::vector<double>& diagonal,
                              const DetectorModel& detectors, ArmSet arms,
                              std::uint64_t seed, std::uint64_t shot_index) {
  ShotRng rng(seed, shot_index);

  const double u = rng.unit();
  std::size_t basis_index = 0;
  bool picked = false;
  double acc = 0.0;
  for (std::size_t i = 0; i < diagonal.size(); ++i) {
    acc += diagonal[i];
    if (u < acc) {
      basis_index = i;
      picked = true;
      break;
    }
  }
  if (!picked) {
    // Rounding left u beyond the accumulated total; take the last
    // configuration with support.
    for (std::size_t i = diagonal.size(); i-- > 0;)
      if (diagonal[i] > 0.0) {
        basis_index = i;
        break;
      }
  }

  const auto& occ = rho.basis().state(basis_index).occupations;
  unsigned pattern_id = 0, shift = 0;
  for (auto m : kAllModes) {
    if (arms == ArmSet::MeterOnly && m.party != Party::Meter) continue;
    bool clicked = false;
    const int photons = occ[static_cast<std::size_t>(m.position())];
    for (int t = 0; t < photons; ++t)
      if (rng.bernoulli(detectors.zeta(m))) clicked = true;
    if (clicked) pattern_id |= 1u << shift;
    ++shift;
  }
  return ShotSample{basis_index, pattern_id};
}

// Joint counts over (occupation configuration, click pattern). Counts are
// stored as doubles so exact probabilities can be injected to check
// estimator consistency; sampled reports always hold whole numbers.
class EstimateReport {
 public:
  EstimateReport(ArmSet arms, std::size_t basis_size, std::uint64_t shots,
                 std::uint64_t seed)
      : arms_(arms),
        shots_(shots),
        seed_(seed),
        basis_size_(basis_size),
        joint_(basis_size * pattern_count(arms), 0.0) {}

  ArmSet arms() const { return arms_; }
  std::uint64_t shots() const { return shots_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t basis_size() const { return basis_size_; }

  double& joint_count(std::size_t basis_index, unsigned pattern_id) {
    return joint_[basis_index * pattern_count(arms_) + pattern_id];
  }
  double joint_count(std::size_t basis_index, unsigned pattern_id) const {
    return joint_[basis_index * pattern_count(arms_) + pattern_id];
  }

  double pattern_total(unsigned pattern_id) const {
    double c = 0.0;
    for (std::size_t b = 0; b < basis_size_; ++b)
      c += joint_count(b, pattern_id);
    return c;
  }

  double basis_total(std::size_t basis_index) const {
    double c = 0.0;
    for (unsigned p = 0; p < pattern_count(arms_); ++p)
      c += joint_count(basis_index, p);
    return c;
  }

  double total() const {
    double c = 0.0;
    for (double x : joint_) c += x;
    return c;
  }

  double estimate(unsigned pattern_id) const {
    return pattern_total(pattern_id) / static_cast<double>(shots_);
  }

  // Binomial standard error sqrt(p_hat (1 - p_hat) / N).
  double std_error(unsigned pattern_id) const {
    const double p = estimate(pattern_id);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(shots_));
  }

 private:
  ArmSet arms_;
  std::uint64_t shots_;
  std::uint64_t seed_;
  std::size_t basis_size_;
  std::vector<double> joint_;
};

// Samples shots [begin_shot, end_shot); merging adjacent ranges reproduces
// the single-range result exactly.
inline EstimateReport sample_shot_range(const DensityOperator& rho,
                                        const DetectorModel& detectors,
                                        std::uint64_t begin_shot,
                                        std::uint64_t end_shot,
                                        std::uint64_t seed, ArmSet arms) {
  if (end_shot <= begin_shot)
    throw std::invalid_argument("sample_shot_range: empty shot range");
  detail::require_full_mode_set(rho, "sample_patterns");
  detail::require_unit_trace(rho, "sample_patterns");

  const auto diagonal = detail::diagonal_distribution(rho);
  EstimateReport report(arms, rho.dim(), end_shot - begin_shot, seed);
  for (std::uint64_t shot = begin_shot; shot < end_shot; ++shot) {
    const auto s = sample_shot(rho, diagonal, detectors, arms, seed, shot);
    report.joint_count(s.basis_index, s.pattern_id) += 1.0;
  }
  return report;
}

inline EstimateReport sample_patterns(const DensityOperator& rho,
                                      const DetectorModel& detectors,
                                      std::uint64_t shots, std::uint64_t seed,
                                      ArmSet arms) {
  if (shots == 0)
    throw std::invalid_argument("sample_patterns: shots must be >= 1");
  return sample_shot_range(rho, detectors, 0, shots, seed, arms);
}

inline EstimateReport sample_patterns(const DensityOperator& rho, double zeta,
                                      std::uint64_t shots, std::uint64_t seed,
                                      ArmSet arms) {
  return sample_patterns(rho, DetectorModel(zeta), shots, seed, arms);
}

inline EstimateReport merge(const EstimateReport& a, const EstimateReport& b) {
  if (a.arms() != b.arms() || a.basis_size() != b.basis_size() ||
      a.seed() != b.seed())
    throw std::invalid_argument("merge: reports come from different runs");
  EstimateReport out(a.arms(), a.basis_size(), a.shots() + b.shots(),
                     a.seed());
  for (std::size_t i = 0; i < a.basis_size(); ++i)
    for (unsigned p = 0; p < pattern_count(a.arms()); ++p)
      out.joint_count(i, p) = a.joint_count(i, p) + b.joint_count(i, p);
  return out;
}

// Report whose joint counts are the exact joint probabilities scaled by the
// shot count; feeding it to the estimators must reproduce the exact
// fidelities.
inline EstimateReport exact_report(const DensityOperator& rho,
                                   const DetectorModel& detectors,
                                   std::uint64_t pseudo_shots, ArmSet arms) {
  detail::require_full_mode_set(rho, "exact_report");
  detail::require_unit_trace(rho, "exact_report");
  EstimateReport report(arms, rho.dim(), pseudo_shots, 0);
  for (const auto& pattern : all_patterns(arms)) {
    const auto weights = pattern_weights(rho.basis(), pattern, detectors);
    for (std::size_t i = 0; i < rho.dim(); ++i)
      report.joint_count(i, pattern.id()) =
          weights[i] * rho.diagonal(i) * static_cast<double>(pseudo_shots);
  }
  return report;
}

// What the estimators need to know about the scenario: the heralded
// polarization, the signal input distribution, and the scalar zeta used for
// the closed-form column.
struct ScenarioContext {
  Polarization k;
  InputDistribution input;
  double zeta;
};

// Empirical per-arm outcome table from pattern counts.
inline ProbabilityTable empirical_table(const EstimateReport& report) {
  const double n = static_cast<double>(report.shots());
  if (report.arms() == ArmSet::MeterOnly) {
    std::array<double, 4> meter{};
    for (const auto& pattern : all_patterns(ArmSet::MeterOnly)) {
      auto o = arm_outcome(pattern.outcome(kMeterH), pattern.outcome(kMeterV));
      meter[static_cast<std::size_t>(o)] +=
          report.pattern_total(pattern.id()) / n;
    }
    return ProbabilityTable::qnd(meter);
  }
  std::array<std::array<double, 4>, 4> joint{};
  for (const auto& pattern : all_patterns(ArmSet::SignalAndMeter)) {
    auto s = arm_outcome(pattern.outcome(kSignalH), pattern.outcome(kSignalV));
    auto m = arm_outcome(pattern.outcome(kMeterH), pattern.outcome(kMeterV));
    joint[static_cast<std::size_t>(s)][static_cast<std::size_t>(m)] +=
        report.pattern_total(pattern.id()) / n;
  }
  return ProbabilityTable::coincidence(joint);
}

// Plugs empirical frequencies into the same F_M / F_QND arithmetic as the
// exact analysis. The F_QND estimate is the fraction of conditioning-pattern
// shots whose sampled configuration put the k photon in the signal mode; F_M
// is only estimable when the signal arm was monitored.
inline FidelityReport estimate_fidelities(const EstimateReport& report,
                                          const ScenarioContext& ctx) {
  // Conditioning pattern: click on meter-k, no click on meter-perp. In
  // four-detector reports the signal detector bits are marginalized out.
  const auto meter_k = mode_of(Party::Meter, ctx.k);
  const auto meter_perp = mode_of(Party::Meter, orthogonal(ctx.k));
  const unsigned meter_shift = report.arms() == ArmSet::MeterOnly ? 2u : 0u;
  auto meter_bit = [&](ModeIndex m) {
    return 1u << (static_cast<unsigned>(m.position()) - meter_shift);
  };

  std::vector<int> signal_occ = {0, 0};
  signal_occ[static_cast<std::size_t>(ctx.k)] = 1;

  FockBasis basis(4, kPhotonCutoff);
  if (basis.size() != report.basis_size())
    throw std::invalid_argument("estimate_fidelities: unexpected basis size");

  double conditioning = 0.0, correct = 0.0;
  for (unsigned p = 0; p < pattern_count(report.arms()); ++p) {
    if ((p & meter_bit(meter_k)) == 0) continue;
    if ((p & meter_bit(meter_perp)) != 0) continue;
    for (std::size_t b = 0; b < report.basis_size(); ++b) {
      const double c = report.joint_count(b, p);
      conditioning += c;
      const auto& occ = basis.state(b).occupations;
      if (occ[0] == signal_occ[0] && occ[1] == signal_occ[1]) correct += c;
    }
  }
  if (conditioning <= 0.0)
    throw std::runtime_error(
        "estimate_fidelities: conditioning pattern never occurred");

  FidelityReport out{ctx.zeta, ctx.k, std::nullopt, correct / conditioning,
                     closed_form_qnd(ctx.zeta)};
  if (report.arms() == ArmSet::SignalAndMeter)
    out.f_m = measurement_fidelity(ctx.input, empirical_table(report));
  return out;
}

}  // namespace qndsim
