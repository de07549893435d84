// qndsim: exact and Monte Carlo analysis of single-photon QND polarization
// measurement with imperfect (non-number-resolving, efficiency zeta)
// detectors.
//
// Subcommands:
//   povm      print the detector POVM diagonals and their completeness defect
//   fidelity  evaluate a scenario config: probability tables, F_M, F_QND
//   sweep     CSV of fidelities and tables over a zeta grid
//   sample    shot-by-shot Monte Carlo with exact values side by side
//
// Exit codes: 0 success, 1 computational failure, 2 usage or parse error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "qndsim/analysis.hpp"
#include "qndsim/detection.hpp"
#include "qndsim/montecarlo.hpp"
#include "qndsim/scenario.hpp"

namespace {

using namespace qndsim;

std::string fmt(double v) { return format_csv_number(v); }

void print_table(std::ostream& os, const ProbabilityTable& table) {
  if (table.mode() == TableMode::Qnd) {
    os << "meter outcome probabilities (no signal detectors):\n";
    for (auto m : kArmOutcomes)
      os << "  P(-, " << to_string(m) << ") = " << fmt(table.meter_marginal(m))
         << "\n";
    return;
  }
  os << "coincidence outcome probabilities (signal x meter):\n";
  for (auto s : kArmOutcomes)
    for (auto m : kArmOutcomes)
      os << "  P(" << to_string(s) << ", " << to_string(m)
         << ") = " << fmt(table.joint(s, m)) << "\n";
}

void print_branches(std::ostream& os, const ReconstructionSpec& spec) {
  os << "pre-detection branches:\n";
  for (const auto& b : reconstruction_branches(spec.k, spec.good_weight,
                                               spec.bad_weight,
                                               spec.bad_kind)) {
    os << "  weight " << fmt(b.weight) << ": meter (" << b.meter_occupations[0]
       << "H, " << b.meter_occupations[1] << "V), signal ";
    if (b.signal_photon)
      os << to_string(*b.signal_photon) << " photon\n";
    else
      os << "vacuum\n";
  }
}

int run_povm(double zeta) {
  const auto e0 = povm_element(ClickOutcome::NoClick, zeta);
  const auto e1 = povm_element(ClickOutcome::Click, zeta);
  const double defect = completeness_defect(zeta);
  std::cout << "detector POVM at zeta = " << fmt(zeta) << "\n";
  std::cout << "  E(no-click) = diag(" << fmt(e0.diag[0]) << ", "
            << fmt(e0.diag[1]) << ", " << fmt(e0.diag[2]) << ")\n";
  std::cout << "  E(click)    = diag(" << fmt(e1.diag[0]) << ", "
            << fmt(e1.diag[1]) << ", " << fmt(e1.diag[2]) << ")\n";
  std::cout << "  completeness defect = " << fmt(defect) << "\n";
  if (defect > tol::kRoundTrip) {
    std::cerr << "error: POVM completeness defect above " << tol::kRoundTrip
              << "\n";
    return 1;
  }
  return 0;
}

int run_fidelity(const std::string& config_path, const std::string& out_path,
                 const std::string& mode_override) {
  auto cfg = load_scenario(config_path);
  if (!mode_override.empty()) cfg.mode = cfg::parse_mode(mode_override);
  const auto result = evaluate_scenario(cfg);

  if (!cfg.label.empty()) std::cout << "scenario: " << cfg.label << "\n";
  std::cout << "mode: "
            << (cfg.mode == TableMode::Qnd ? "qnd" : "coincidence")
            << ", input polarization: " << to_string(cfg.input_k)
            << ", zeta = " << fmt(cfg.zeta_scalar) << "\n";
  if (const auto* r = std::get_if<ReconstructionSpec>(&cfg.scenario))
    print_branches(std::cout, *r);
  print_table(std::cout, result.coincidence);
  print_table(std::cout, result.qnd);
  std::cout << "F_M (coincidence-conditioned) = "
            << (result.report.f_m ? fmt(*result.report.f_m)
                                  : std::string("undefined (no coincidences)"))
            << "\n";
  std::cout << "F_QND (trace formula)         = "
            << fmt(result.report.f_qnd_trace) << "\n";
  std::cout << "F_QND closed form 1/(2-zeta)  = "
            << fmt(result.report.f_qnd_closed) << "\n";

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
      throw std::invalid_argument("cannot open output path \"" + out_path +
                                  "\"");
    out << csv_header() << csv_line(csv_row(result));
  }
  return 0;
}

int run_sweep(const std::string& config_path, double zeta_min, double zeta_max,
              int steps, const std::string& out_path) {
  const auto cfg = load_scenario(config_path);
  const std::string csv = sweep_csv(cfg, zeta_min, zeta_max, steps);
  if (out_path.empty()) {
    std::cout << csv;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("cannot open output path \"" + out_path +
                                "\"");
  out << csv;
  return 0;
}

int run_sample(const std::string& config_path, std::uint64_t shots,
               std::uint64_t seed, const std::string& mode_override) {
  auto cfg = load_scenario(config_path);
  if (!mode_override.empty()) cfg.mode = cfg::parse_mode(mode_override);
  const auto rho = predetection_state(cfg);
  const ArmSet arms = cfg.mode == TableMode::Qnd ? ArmSet::MeterOnly
                                                 : ArmSet::SignalAndMeter;

  const auto report = sample_patterns(rho, cfg.detectors, shots, seed, arms);

  std::cout << "shots = " << shots << ", seed = " << seed << ", arms = "
            << (arms == ArmSet::MeterOnly ? "meter" : "signal+meter") << "\n";
  std::cout << "pattern counts (estimate +/- std error vs exact):\n";
  for (const auto& pattern : all_patterns(arms)) {
    const double exact = pattern_probability(rho, pattern, cfg.detectors);
    std::cout << "  [" << pattern.label() << "] count "
              << static_cast<std::uint64_t>(report.pattern_total(pattern.id()))
              << ", estimate " << fmt(report.estimate(pattern.id())) << " +/- "
              << fmt(report.std_error(pattern.id())) << ", exact "
              << fmt(exact) << "\n";
  }

  const ScenarioContext ctx{cfg.input_k,
                            InputDistribution::point_mass(cfg.input_k),
                            cfg.zeta_scalar};
  const auto estimated = estimate_fidelities(report, ctx);
  const auto exact = evaluate_scenario(cfg);
  std::cout << "F_QND estimate = " << fmt(estimated.f_qnd_trace)
            << " (exact " << fmt(exact.report.f_qnd_trace) << ", closed form "
            << fmt(estimated.f_qnd_closed) << ")\n";
  if (estimated.f_m)
    std::cout << "F_M estimate   = " << fmt(*estimated.f_m) << " (exact "
              << fmt(*exact.report.f_m) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulator of single-photon QND polarization measurement with "
      "imperfect detectors"};
  app.require_subcommand(1);

  double zeta = 0.65;
  double zeta_min = 0.0, zeta_max = 1.0;
  int steps = 21;
  std::string config_path, out_path, mode_override;
  std::uint64_t shots = 100000, seed = 42;

  auto* povm = app.add_subcommand(
      "povm", "Print the detector POVM diagonals and completeness defect");
  povm->add_option("--zeta", zeta, "Detector quantum efficiency")
      ->required()
      ->check(CLI::Range(0.0, 1.0));

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Scenario config file (JSON)")
        ->required();
    cmd->add_option("--mode", mode_override,
                    "Override the config's operating mode")
        ->check(CLI::IsMember({"qnd", "coincidence"}));
  };

  auto* fidelity = app.add_subcommand(
      "fidelity", "Evaluate a scenario: probability tables, F_M and F_QND");
  add_common(fidelity);
  fidelity->add_option("--out", out_path, "Also write a one-row CSV here");

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "CSV of fidelities and tables over a zeta grid");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--zeta-min", zeta_min, "Grid start")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--zeta-max", zeta_max, "Grid end")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--steps", steps, "Number of grid points")
      ->required()
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", out_path, "Output CSV path (default stdout)");

  auto* sample = app.add_subcommand(
      "sample", "Monte Carlo sampling with exact values side by side");
  add_common(sample);
  sample->add_option("--shots", shots, "Number of shots")
      ->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "Sampler seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (povm->parsed()) return run_povm(zeta);
    if (fidelity->parsed())
      return run_fidelity(config_path, out_path, mode_override);
    if (sweep_cmd->parsed())
      return run_sweep(config_path, zeta_min, zeta_max, steps, out_path);
    if (sample->parsed())
      return run_sample(config_path, shots, seed, mode_override);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
