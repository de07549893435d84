#pragma once

// Scenario configuration files, their evaluation, and CSV emission. The
// config format is a single JSON document; the schema is documented
// field-by-field in the README. The CLI in tools/ is a thin wrapper over
// this header so the parsing and evaluation logic stays testable in-process.

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qndsim/analysis.hpp"
#include "qndsim/detection.hpp"
#include "qndsim/fock.hpp"
#include "qndsim/montecarlo.hpp"
#include "qndsim/optics.hpp"
#include "qndsim/tolerances.hpp"

namespace qndsim {

using json = nlohmann::json;

// Circuit-style scenario: a product Fock input pushed through an element
// list. The shipped circuit configs are illustrative interferometers, not a
// reproduction of any particular experimental apparatus.
struct CircuitSpec {
  Circuit circuit;
  std::vector<int> input_occupations;  // (signal-H, signal-V, meter-H, meter-V)
};

struct ScenarioConfig {
  std::string label;
  Polarization input_k = Polarization::H;
  DetectorModel detectors{1.0};
  double zeta_scalar = 1.0;  // reporting/closed-form zeta (meter-k detector)
  std::variant<ReconstructionSpec, CircuitSpec> scenario;
  TableMode mode = TableMode::Qnd;
};

namespace cfg {

inline Polarization parse_polarization(const std::string& s) {
  if (s == "H" || s == "h") return Polarization::H;
  if (s == "V" || s == "v") return Polarization::V;
  throw std::invalid_argument("config: polarization must be \"H\" or \"V\"");
}

inline TableMode parse_mode(const std::string& s) {
  if (s == "qnd") return TableMode::Qnd;
  if (s == "coincidence") return TableMode::Coincidence;
  throw std::invalid_argument(
      "config: mode must be \"qnd\" or \"coincidence\"");
}

inline BadBranchKind parse_bad_kind(const std::string& s) {
  if (s == "orthogonal_missed") return BadBranchKind::OrthogonalMissed;
  if (s == "same_mode_pair") return BadBranchKind::SameModePair;
  throw std::invalid_argument(
      "config: bad_kind must be \"orthogonal_missed\" or \"same_mode_pair\"");
}

inline ModeIndex parse_mode_name(const std::string& s) {
  for (auto m : kAllModes)
    if (m.name() == s) return m;
  throw std::invalid_argument("config: unknown mode \"" + s + "\"");
}

inline Party parse_party(const std::string& s) {
  if (s == "signal") return Party::Signal;
  if (s == "meter") return Party::Meter;
  throw std::invalid_argument("config: party must be \"signal\" or \"meter\"");
}

inline double require_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw std::invalid_argument("config: missing numeric field \"" + key +
                                "\"");
  return j.at(key).get<double>();
}

inline std::string require_string(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw std::invalid_argument("config: missing string field \"" + key +
                                "\"");
  return j.at(key).get<std::string>();
}

inline ModeUnitary parse_element(const json& j) {
  const std::string type = require_string(j, "type");
  if (!j.contains("params") || !j.at("params").is_object())
    throw std::invalid_argument("config: circuit element needs \"params\"");
  if (!j.contains("targets") || !j.at("targets").is_array())
    throw std::invalid_argument("config: circuit element needs \"targets\"");
  const json& params = j.at("params");
  const json& targets = j.at("targets");

  auto require_targets = [&](std::vector<std::string> expected) {
    std::vector<std::string> got;
    for (const auto& t : targets) got.push_back(t.get<std::string>());
    if (got != expected)
      throw std::invalid_argument("config: element \"" + type +
                                  "\" has unexpected targets");
  };

  if (type == "beam_splitter") {
    require_targets({"signal", "meter"});
    return beam_splitter(require_number(params, "theta_h"),
                         require_number(params, "theta_v"));
  }
  if (type == "wave_plate") {
    if (targets.size() != 1)
      throw std::invalid_argument("config: wave_plate takes one target party");
    return wave_plate(parse_party(targets.at(0).get<std::string>()),
                      require_number(params, "angle"));
  }
  if (type == "phase") {
    if (targets.size() != 1)
      throw std::invalid_argument("config: phase takes one target mode");
    return mode_phase(parse_mode_name(targets.at(0).get<std::string>()),
                      require_number(params, "phi"));
  }
  throw std::invalid_argument("config: unknown element type \"" + type +
                              "\"");
}

}  // namespace cfg

inline ScenarioConfig parse_scenario(const json& j) {
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be a JSON object");

  ScenarioConfig cfg;
  cfg.label = j.value("label", std::string{});
  cfg.input_k = cfg::parse_polarization(cfg::require_string(j, "input"));
  cfg.mode = cfg::parse_mode(cfg::require_string(j, "mode"));

  if (!j.contains("zeta"))
    throw std::invalid_argument("config: missing field \"zeta\"");
  const json& z = j.at("zeta");
  if (z.is_number()) {
    cfg.zeta_scalar = z.get<double>();
    cfg.detectors = DetectorModel(cfg.zeta_scalar);
  } else if (z.is_object()) {
    cfg.detectors = DetectorModel::per_mode(
        cfg::require_number(z, "signal_h"), cfg::require_number(z, "signal_v"),
        cfg::require_number(z, "meter_h"), cfg::require_number(z, "meter_v"));
    cfg.zeta_scalar =
        cfg.detectors.zeta(mode_of(Party::Meter, cfg.input_k));
  } else {
    throw std::invalid_argument(
        "config: \"zeta\" must be a number or a per-mode object");
  }

  const bool has_reconstruction = j.contains("reconstruction");
  const bool has_circuit = j.contains("circuit");
  if (has_reconstruction == has_circuit)
    throw std::invalid_argument(
        "config: exactly one of \"reconstruction\" or \"circuit\" is "
        "required");

  if (has_reconstruction) {
    const json& r = j.at("reconstruction");
    ReconstructionSpec spec;
    spec.k = cfg.input_k;
    spec.good_weight = cfg::require_number(r, "good_weight");
    spec.bad_weight = cfg::require_number(r, "bad_weight");
    spec.bad_kind = cfg::parse_bad_kind(cfg::require_string(r, "bad_kind"));
    // Surfaces weight errors at parse time rather than first evaluation.
    reconstruction_branches(spec.k, spec.good_weight, spec.bad_weight,
                            spec.bad_kind);
    cfg.scenario = spec;
  } else {
    const json& c = j.at("circuit");
    CircuitSpec spec;
    if (!c.contains("input_occupations") ||
        !c.at("input_occupations").is_object())
      throw std::invalid_argument(
          "config: circuit needs an \"input_occupations\" object");
    spec.input_occupations.assign(4, 0);
    int total = 0;
    for (const auto& [key, value] : c.at("input_occupations").items()) {
      const auto m = cfg::parse_mode_name(key);
      const int n = value.get<int>();
      if (n < 0 || n > kPhotonCutoff)
        throw std::invalid_argument("config: occupation of " + key +
                                    " outside {0, 1, 2}");
      spec.input_occupations[static_cast<std::size_t>(m.position())] = n;
      total += n;
    }
    if (total > kPhotonCutoff)
      throw std::invalid_argument(
          "config: input exceeds the two-photon cutoff");
    if (!c.contains("elements") || !c.at("elements").is_array())
      throw std::invalid_argument("config: circuit needs an \"elements\" array");
    for (const auto& e : c.at("elements"))
      spec.circuit.elements.push_back(cfg::parse_element(e));
    cfg.scenario = spec;
  }
  return cfg;
}

// Loads and parses a config file; malformed JSON is reported with the line
// of the offending byte.
inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("config: cannot open \"" + path + "\"");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t limit =
        e.byte > 0 && e.byte <= text.size() ? e.byte - 1 : text.size();
    for (std::size_t i = 0; i < limit; ++i)
      if (text[i] == '\n') ++line;
    throw std::invalid_argument("config: parse error in \"" + path +
                                "\" at line " + std::to_string(line) + ": " +
                                e.what());
  }
  return parse_scenario(j);
}

// Pre-detection state of the configured scenario at its declared detectors.
inline DensityOperator predetection_state(const ScenarioConfig& cfg) {
  if (const auto* r = std::get_if<ReconstructionSpec>(&cfg.scenario))
    return reconstruct_predetection_state(r->k, r->good_weight, r->bad_weight,
                                          r->bad_kind);
  const auto& c = std::get<CircuitSpec>(cfg.scenario);
  const auto input = StateVector::basis_state(all_modes(), c.input_occupations);
  return DensityOperator::from_pure(apply_circuit(input, c.circuit));
}

struct ScenarioResult {
  FidelityReport report;
  ProbabilityTable coincidence;
  ProbabilityTable qnd;
};

// Exact evaluation of a scenario with an explicit detector model (the sweep
// overrides the configured one grid point by grid point).
inline ScenarioResult evaluate_scenario(const ScenarioConfig& cfg,
                                        const DetectorModel& detectors,
                                        double zeta_scalar) {
  const auto rho = predetection_state(cfg);
  auto coincidence =
      build_probability_table(rho, detectors, TableMode::Coincidence);
  auto qnd = build_probability_table(rho, detectors, TableMode::Qnd);
  FidelityReport report{zeta_scalar, cfg.input_k, std::nullopt,
                        qnd_fidelity(rho, cfg.input_k, detectors),
                        closed_form_qnd(zeta_scalar)};
  // F_M stays undefined for states that never produce coincidence events
  // (e.g. fully bunched interferometer outputs).
  if (coincidence_mass(coincidence) >= tol::kProbabilityFloor)
    report.f_m = measurement_fidelity(
        InputDistribution::point_mass(cfg.input_k), coincidence);
  return ScenarioResult{report, std::move(coincidence), std::move(qnd)};
}

inline ScenarioResult evaluate_scenario(const ScenarioConfig& cfg) {
  return evaluate_scenario(cfg, cfg.detectors, cfg.zeta_scalar);
}

// ---------------------------------------------------------------------------
// CSV output: comma separator, '.' decimal point, LF line endings, mandatory
// header, numbers at 12 significant digits.

struct CsvRow {
  double zeta;
  double f_qnd_closed;
  double f_qnd_trace;
  double f_m;
  std::array<double, 4> qnd;          // meter marginal H, V, Both, None
  std::array<double, 16> coincidence; // row-major signal x meter
};

inline std::string format_csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", tol::kCsvDigits, v);
  return buf;
}

inline std::string csv_header() {
  std::string h = "zeta,f_qnd_closed,f_qnd_trace,f_m";
  for (auto m : kArmOutcomes) h += std::string(",p_qnd_") + to_string(m);
  for (auto s : kArmOutcomes)
    for (auto m : kArmOutcomes)
      h += std::string(",p_cc_") + to_string(s) + "_" + to_string(m);
  h += '\n';
  return h;
}

inline std::string csv_line(const CsvRow& row) {
  std::string line = format_csv_number(row.zeta);
  line += ',' + format_csv_number(row.f_qnd_closed);
  line += ',' + format_csv_number(row.f_qnd_trace);
  line += ',' + format_csv_number(row.f_m);
  for (double v : row.qnd) line += ',' + format_csv_number(v);
  for (double v : row.coincidence) line += ',' + format_csv_number(v);
  line += '\n';
  return line;
}

inline CsvRow csv_row(const ScenarioResult& result) {
  CsvRow row{};
  row.zeta = result.report.zeta;
  row.f_qnd_closed = result.report.f_qnd_closed;
  row.f_qnd_trace = result.report.f_qnd_trace;
  row.f_m =
      result.report.f_m.value_or(std::numeric_limits<double>::quiet_NaN());
  std::size_t i = 0;
  for (auto m : kArmOutcomes) row.qnd[i++] = result.qnd.meter_marginal(m);
  i = 0;
  for (auto s : kArmOutcomes)
    for (auto m : kArmOutcomes)
      row.coincidence[i++] = result.coincidence.joint(s, m);
  return row;
}

// One CSV row per zeta grid point, uniform detectors at each point.
inline std::string sweep_csv(const ScenarioConfig& cfg, double zeta_min,
                             double zeta_max, int steps) {
  std::string out = csv_header();
  for (double zeta : zeta_grid(zeta_min, zeta_max, steps))
    out += csv_line(
        csv_row(evaluate_scenario(cfg, DetectorModel(zeta), zeta)));
  return out;
}

}  // namespace qndsim
