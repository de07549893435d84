#include <catch2/catch.hpp>

#include "qndsim/analysis.hpp"
#include "test_support.hpp"

using namespace qndsim;

namespace {

DensityOperator ideal_state(Polarization k = Polarization::H) {
  return reconstruct_predetection_state(k, 1.0, 0.0,
                                        BadBranchKind::OrthogonalMissed);
}

DensityOperator missed_photon_state(Polarization k = Polarization::H) {
  return reconstruct_predetection_state(k, 0.5, 0.5,
                                        BadBranchKind::OrthogonalMissed);
}

}  // namespace

TEST_CASE("coincidence table of the ideal correlated state", "[analysis]") {
  const auto rho = ideal_state();

  const auto perfect =
      build_probability_table(rho, 1.0, TableMode::Coincidence);
  CHECK(perfect.joint(ArmOutcome::H, ArmOutcome::H) ==
        Approx(1.0).margin(tol::kAlgebra));
  CHECK(perfect.joint(ArmOutcome::V, ArmOutcome::V) ==
        Approx(0.0).margin(tol::kAlgebra));
  CHECK(perfect.total() == Approx(1.0).margin(tol::kAlgebra));

  // Two independent zeta-efficient detections of the two photons.
  const double zeta = 0.65;
  const auto lossy = build_probability_table(rho, zeta, TableMode::Coincidence);
  CHECK(lossy.joint(ArmOutcome::H, ArmOutcome::H) ==
        Approx(zeta * zeta).margin(tol::kAlgebra));
  CHECK(lossy.joint(ArmOutcome::H, ArmOutcome::None) ==
        Approx(zeta * (1.0 - zeta)).margin(tol::kAlgebra));
  CHECK(lossy.joint(ArmOutcome::None, ArmOutcome::H) ==
        Approx(zeta * (1.0 - zeta)).margin(tol::kAlgebra));
  CHECK(lossy.joint(ArmOutcome::None, ArmOutcome::None) ==
        Approx((1.0 - zeta) * (1.0 - zeta)).margin(tol::kAlgebra));

  // Blind detectors leave a single None/None entry.
  const auto blind = build_probability_table(rho, 0.0, TableMode::Coincidence);
  CHECK(blind.joint(ArmOutcome::None, ArmOutcome::None) ==
        Approx(1.0).margin(tol::kAlgebra));
}

TEST_CASE("tables sum to one for random states", "[analysis]") {
  for (std::uint64_t seed : {701u, 702u, 703u}) {
    const auto rho = test_support::random_density(all_modes(), seed);
    for (double zeta : {0.3, 0.65, 0.9}) {
      CHECK(build_probability_table(rho, zeta, TableMode::Coincidence)
                .total() == Approx(1.0).margin(tol::kAlgebra));
      CHECK(build_probability_table(rho, zeta, TableMode::Qnd).total() ==
            Approx(1.0).margin(tol::kAlgebra));
    }
  }
}

TEST_CASE("QND-mode tables have no signal axis", "[analysis]") {
  const auto table =
      build_probability_table(missed_photon_state(), 0.65, TableMode::Qnd);
  CHECK_THROWS_AS(table.joint(ArmOutcome::H, ArmOutcome::H),
                  std::invalid_argument);
  CHECK(table.meter_marginal(ArmOutcome::H) > 0.0);
}

TEST_CASE("measurement fidelity on reference tables", "[analysis]") {
  const auto perfect =
      build_probability_table(ideal_state(), 1.0, TableMode::Coincidence);
  CHECK(measurement_fidelity(InputDistribution::point_mass(Polarization::H),
                             perfect) == Approx(1.0).margin(tol::kFidelity));

  // Point-mass input against a uniform meter outcome: overlap 1/2.
  std::array<std::array<double, 4>, 4> cells{};
  cells[0][0] = 0.25;
  cells[0][1] = 0.25;
  cells[1][0] = 0.25;
  cells[1][1] = 0.25;
  const auto uniform = ProbabilityTable::coincidence(cells);
  CHECK(measurement_fidelity(InputDistribution{1.0, 0.0}, uniform) ==
        Approx(0.5).margin(tol::kFidelity));
  CHECK(measurement_fidelity(InputDistribution{0.5, 0.5}, uniform) ==
        Approx(1.0).margin(tol::kFidelity));
}

TEST_CASE("measurement fidelity requires coincidences", "[analysis]") {
  const auto qnd_table =
      build_probability_table(ideal_state(), 0.65, TableMode::Qnd);
  CHECK_THROWS_AS(
      measurement_fidelity(InputDistribution{1.0, 0.0}, qnd_table),
      std::invalid_argument);

  // A vacuum signal never produces coincidence events.
  const auto no_signal = DensityOperator::from_pure(
      StateVector::basis_state(all_modes(), {0, 0, 1, 0}));
  const auto table =
      build_probability_table(no_signal, 0.65, TableMode::Coincidence);
  CHECK(coincidence_mass(table) < tol::kProbabilityFloor);
  CHECK_THROWS_AS(measurement_fidelity(InputDistribution{1.0, 0.0}, table),
                  std::runtime_error);

  CHECK_THROWS_AS(
      measurement_fidelity(InputDistribution{0.7, 0.7},
                           build_probability_table(ideal_state(), 0.65,
                                                   TableMode::Coincidence)),
      std::invalid_argument);
}

TEST_CASE("reconstructed branch structure", "[analysis]") {
  const auto branches = reconstruction_branches(
      Polarization::H, 0.5, 0.5, BadBranchKind::OrthogonalMissed);
  REQUIRE(branches.size() == 2);
  CHECK(branches[0].weight == 0.5);
  CHECK(branches[0].meter_occupations == std::array<int, 2>{1, 0});
  REQUIRE(branches[0].signal_photon.has_value());
  CHECK(*branches[0].signal_photon == Polarization::H);
  CHECK(branches[1].meter_occupations == std::array<int, 2>{1, 1});
  CHECK_FALSE(branches[1].signal_photon.has_value());

  const auto pair_branches = reconstruction_branches(
      Polarization::V, 0.25, 0.75, BadBranchKind::SameModePair);
  CHECK(pair_branches[1].meter_occupations == std::array<int, 2>{0, 2});

  CHECK_THROWS_AS(reconstruction_branches(Polarization::H, 0.6, 0.6,
                                          BadBranchKind::OrthogonalMissed),
                  std::invalid_argument);
  CHECK_THROWS_AS(reconstruction_branches(Polarization::H, -0.5, 1.5,
                                          BadBranchKind::OrthogonalMissed),
                  std::invalid_argument);

  const auto rho = missed_photon_state();
  CHECK(is_valid_normalized_density(rho));
  FockBasis full(4, kPhotonCutoff);
  CHECK(rho.diagonal(full.index_of(FockBasisState{{1, 0, 1, 0}})) == 0.5);
  CHECK(rho.diagonal(full.index_of(FockBasisState{{0, 0, 1, 1}})) == 0.5);
}

TEST_CASE("QND fidelity of the ideal state is one", "[analysis]") {
  const auto rho = ideal_state();
  for (int i = 1; i <= 21; ++i) {
    const double zeta = static_cast<double>(i) / 21.0;
    CHECK(qnd_fidelity(rho, Polarization::H, zeta) ==
          Approx(1.0).margin(tol::kRoundTrip));
  }
}

TEST_CASE("QND fidelity reproduces the closed form", "[analysis]") {
  const auto rho = missed_photon_state();
  CHECK(qnd_fidelity(rho, Polarization::H, 0.65) ==
        Approx(1.0 / 1.35).margin(tol::kFidelity));
  CHECK(qnd_fidelity(rho, Polarization::H, 1.0) ==
        Approx(1.0).margin(tol::kFidelity));

  for (int i = 1; i <= 21; ++i) {
    const double zeta = static_cast<double>(i) / 21.0;
    CHECK(std::abs(qnd_fidelity(rho, Polarization::H, zeta) -
                   closed_form_qnd(zeta)) <= tol::kRoundTrip);
  }

  // The V-input scenario behaves identically by symmetry.
  const auto rho_v = missed_photon_state(Polarization::V);
  CHECK(qnd_fidelity(rho_v, Polarization::V, 0.65) ==
        Approx(1.0 / 1.35).margin(tol::kFidelity));
}

TEST_CASE("QND fidelity of the same-mode pair branch", "[analysis]") {
  const auto rho = reconstruct_predetection_state(
      Polarization::H, 0.5, 0.5, BadBranchKind::SameModePair);
  // Numerator zeta/2, denominator zeta/2 + zeta(2-zeta)/2: 1/(3 - zeta).
  CHECK(qnd_fidelity(rho, Polarization::H, 0.65) ==
        Approx(1.0 / 2.35).margin(tol::kFidelity));
}

TEST_CASE("QND fidelity terms expose the unnormalized trace", "[analysis]") {
  const double zeta = 0.65;
  const auto terms =
      qnd_fidelity_terms(missed_photon_state(), Polarization::H,
                         DetectorModel(zeta));
  CHECK(terms.numerator == Approx(0.5 * zeta).margin(tol::kAlgebra));
  CHECK(terms.denominator ==
        Approx(0.5 * zeta + 0.5 * zeta * (1.0 - zeta)).margin(tol::kAlgebra));
}

TEST_CASE("QND fidelity fails when the outcome never occurs", "[analysis]") {
  CHECK_THROWS_AS(qnd_fidelity(missed_photon_state(), Polarization::H, 0.0),
                  std::runtime_error);
  // No meter photon at all: the conditioning pattern has zero probability.
  const auto empty_meter = DensityOperator::from_pure(
      StateVector::basis_state(all_modes(), {1, 0, 0, 0}));
  CHECK_THROWS_AS(qnd_fidelity(empty_meter, Polarization::H, 0.65),
                  std::runtime_error);
}

TEST_CASE("closed form limit values", "[analysis]") {
  CHECK(closed_form_qnd(0.65) == Approx(1.0 / 1.35).margin(1e-15));
  CHECK(closed_form_qnd(1.0) == 1.0);
  CHECK(closed_form_qnd(0.0) == 0.5);
  CHECK_THROWS_AS(closed_form_qnd(1.5), std::invalid_argument);
}

TEST_CASE("QND fidelity increases with detector efficiency", "[analysis]") {
  const auto rho = missed_photon_state();
  double previous = 0.0;
  for (int i = 1; i <= 21; ++i) {
    const double zeta = static_cast<double>(i) / 21.0;
    const double f = qnd_fidelity(rho, Polarization::H, zeta);
    CHECK(f > previous);
    previous = f;
  }
}

TEST_CASE("coincidence fidelity hides what the QND fidelity exposes",
          "[analysis]") {
  const double zeta = 0.65;
  const double f_m = measurement_fidelity(
      InputDistribution::point_mass(Polarization::H),
      build_probability_table(ideal_state(), zeta, TableMode::Coincidence));
  const double f_qnd =
      qnd_fidelity(missed_photon_state(), Polarization::H, zeta);
  CHECK(f_m == Approx(1.0).margin(tol::kFidelity));
  CHECK(f_qnd == Approx(0.7407407407).margin(1e-9));
  CHECK(f_qnd <= f_m - 0.2);
}

TEST_CASE("sweep reports both fidelity routes", "[analysis]") {
  const ReconstructionSpec canonical{};

  const auto single = sweep(0.65, 0.65, 1, canonical);
  REQUIRE(single.size() == 1);
  CHECK(single[0].f_qnd_trace == Approx(1.0 / 1.35).margin(tol::kRoundTrip));
  CHECK(single[0].f_qnd_closed == Approx(1.0 / 1.35).margin(tol::kRoundTrip));
  REQUIRE(single[0].f_m.has_value());
  CHECK(*single[0].f_m == Approx(1.0).margin(tol::kFidelity));

  const auto perfect = sweep(1.0, 1.0, 1, canonical);
  CHECK(perfect[0].f_qnd_trace == Approx(1.0).margin(tol::kRoundTrip));

  const auto grid = sweep(0.2, 0.8, 4, canonical);
  REQUIRE(grid.size() == 4);
  const std::array<double, 4> expected = {1.0 / 1.8, 1.0 / 1.6, 1.0 / 1.4,
                                          1.0 / 1.2};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(grid[i].f_qnd_closed ==
          Approx(expected[i]).margin(tol::kRoundTrip));
    CHECK(std::abs(grid[i].f_qnd_trace - grid[i].f_qnd_closed) <=
          tol::kRoundTrip);
    if (i > 0) CHECK(grid[i].f_qnd_trace > grid[i - 1].f_qnd_trace);
  }

  CHECK_THROWS_AS(sweep(0.8, 0.2, 4, canonical), std::invalid_argument);
  CHECK_THROWS_AS(sweep(0.2, 0.8, 0, canonical), std::invalid_argument);
}
