// Integration tests that drive the installed CLI binary end to end: exit
// codes, output determinism, and the shipped configs.

#include <catch2/catch.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  const std::string out_path = "cli_test_stdout.txt";
  const std::string err_path = "cli_test_stderr.txt";
  const std::string command = std::string(QNDSIM_CLI_PATH) + " " + args +
                              " >" + out_path + " 2>" + err_path;
  const int status = std::system(command.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

std::string config(const std::string& name) {
  return std::string(QNDSIM_CONFIG_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("povm subcommand", "[cli]") {
  const auto ok = run_cli("povm --zeta 0.65");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("0.8775") != std::string::npos);
  CHECK(ok.out.find("0.1225") != std::string::npos);
  CHECK(ok.out.find("completeness defect = 0") != std::string::npos);

  CHECK(run_cli("povm --zeta 1").exit_code == 0);
  CHECK(run_cli("povm --zeta 1.5").exit_code == 2);
  CHECK(run_cli("povm").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("fidelity subcommand", "[cli]") {
  const auto ok = run_cli("fidelity --config " + config("missed_photon.json"));
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("0.740740740741") != std::string::npos);
  CHECK(ok.out.find("F_M") != std::string::npos);

  const auto with_csv = run_cli("fidelity --config " +
                                config("missed_photon.json") +
                                " --out cli_fidelity_row.csv");
  CHECK(with_csv.exit_code == 0);
  const std::string csv = slurp("cli_fidelity_row.csv");
  CHECK(csv.rfind("zeta,f_qnd_closed,", 0) == 0);
  CHECK(csv.find("\n0.65,0.740740740741,") != std::string::npos);
  std::remove("cli_fidelity_row.csv");

  CHECK(run_cli("fidelity --config no_such_file.json").exit_code == 2);

  {
    std::ofstream bad("cli_bad_config.json", std::ios::binary);
    bad << "{\n  \"input\": \"H\",\n  broken\n}\n";
  }
  const auto parse_fail = run_cli("fidelity --config cli_bad_config.json");
  CHECK(parse_fail.exit_code == 2);
  CHECK(parse_fail.err.find("line 3") != std::string::npos);
  std::remove("cli_bad_config.json");

  // zeta = 0 makes the conditioning pattern impossible: a computational
  // failure, not a usage error.
  {
    std::ofstream blind("cli_blind_config.json", std::ios::binary);
    blind << "{\"input\":\"H\",\"zeta\":0.0,\"mode\":\"qnd\","
             "\"reconstruction\":{\"good_weight\":0.5,\"bad_weight\":0.5,"
             "\"bad_kind\":\"orthogonal_missed\"}}";
  }
  CHECK(run_cli("fidelity --config cli_blind_config.json").exit_code == 1);
  std::remove("cli_blind_config.json");
}

TEST_CASE("sweep subcommand writes deterministic CSV", "[cli]") {
  const std::string base = "sweep --config " + config("missed_photon.json") +
                           " --zeta-min 0.2 --zeta-max 0.8 --steps 4";
  const auto first = run_cli(base + " --out cli_sweep_a.csv");
  const auto second = run_cli(base + " --out cli_sweep_b.csv");
  REQUIRE(first.exit_code == 0);
  REQUIRE(second.exit_code == 0);
  const std::string a = slurp("cli_sweep_a.csv");
  const std::string b = slurp("cli_sweep_b.csv");
  CHECK(a == b);
  CHECK(a.find("0.555555555556") != std::string::npos);
  CHECK(a.find("0.833333333333") != std::string::npos);
  std::remove("cli_sweep_a.csv");
  std::remove("cli_sweep_b.csv");

  const auto to_stdout = run_cli(base);
  CHECK(to_stdout.exit_code == 0);
  CHECK(to_stdout.out == a);

  CHECK(run_cli("sweep --config " + config("missed_photon.json") +
                " --zeta-min 0.8 --zeta-max 0.2 --steps 4")
            .exit_code == 2);
  CHECK(run_cli("sweep --config " + config("missed_photon.json") +
                " --zeta-min 0.2 --zeta-max 0.8 --steps 0")
            .exit_code == 2);
  CHECK(run_cli(base + " --out /nonexistent_dir/x.csv").exit_code == 2);
}

TEST_CASE("sample subcommand is deterministic", "[cli]") {
  const std::string base = "sample --config " + config("missed_photon.json") +
                           " --shots 20000 --seed 42";
  const auto first = run_cli(base);
  const auto second = run_cli(base);
  REQUIRE(first.exit_code == 0);
  CHECK(first.out == second.out);
  CHECK(first.out.find("F_QND estimate") != std::string::npos);

  CHECK(run_cli("sample --config " + config("missed_photon.json") +
                " --shots 0")
            .exit_code == 2);
}

TEST_CASE("every shipped config runs within its time budget", "[cli]") {
  const std::string names[] = {"missed_photon.json", "ideal.json",
                               "same_mode_pair.json", "hom_bunching.json",
                               "ppbs_interaction.json"};
  for (const auto& name : names) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_cli("fidelity --config " + config(name));
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    INFO(name);
    CHECK(result.exit_code == 0);
    CHECK(elapsed < 5.0);
  }
}
