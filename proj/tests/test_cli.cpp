#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef DECONFOUND_CLI_PATH
#error "DECONFOUND_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out_path = dir / "stdout.txt";
  const fs::path err_path = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DECONFOUND_CLI_PATH + "\" " +
                          args + " > \"" + out_path.string() + "\" 2> \"" +
                          err_path.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("the help screen lists every subcommand") {
  TempDir dir("deconfound_cli_help");
  const CliResult r = run_cli(dir.path, "--help");
  CHECK(r.exit_code == 0);
  for (const char* name :
       {"simulate", "adjust", "train-eval", "diagnose", "theory", "experiment"}) {
    CAPTURE(name);
    CHECK(r.out.find(name) != std::string::npos);
  }
}

TEST_CASE("simulate, adjust, train-eval and diagnose compose") {
  TempDir dir("deconfound_cli_pipeline");
  const std::string p = dir.path.string();

  const CliResult sim = run_cli(
      dir.path, "simulate --family A --n-train 2000 --n-test 2000 --seed 5 "
                "--out-prefix \"" + p + "/sim\"");
  CHECK(sim.exit_code == 0);
  REQUIRE(fs::exists(dir.path / "sim_train.csv"));
  REQUIRE(fs::exists(dir.path / "sim_test.csv"));
  {
    std::ifstream head(dir.path / "sim_train.csv");
    std::string header;
    std::getline(head, header);
    CHECK(header == "x1,x2,a1,a2,y,split");
  }

  const CliResult adj = run_cli(
      dir.path, "adjust --method linear-ca --train \"" + p +
                "/sim_train.csv\" --test \"" + p + "/sim_test.csv\" "
                "--out-prefix \"" + p + "/adj\"");
  CHECK(adj.exit_code == 0);
  const nlohmann::json meta =
      nlohmann::json::parse(slurp(dir.path / "adj_meta.json"));
  CHECK(meta.at("method") == "linear-ca");
  CHECK(meta.at("n_train") == 2000);

  const CliResult ca = run_cli(
      dir.path, "train-eval --method linear-ca --train \"" + p +
                "/sim_train.csv\" --test \"" + p + "/sim_test.csv\" "
                "--pred-out \"" + p + "/preds_ca.csv\"");
  CHECK(ca.exit_code == 0);
  const nlohmann::json ca_json = nlohmann::json::parse(ca.out);
  CHECK(ca_json.at("task") == "regression");
  CHECK(ca_json.at("mse").get<double>() > 0.0);

  const CliResult res = run_cli(
      dir.path, "train-eval --method linear-res --train \"" + p +
                "/sim_train.csv\" --test \"" + p + "/sim_test.csv\" "
                "--pred-out \"" + p + "/preds_res.csv\"");
  CHECK(res.exit_code == 0);

  const CliResult diag_ca =
      run_cli(dir.path, "diagnose --input \"" + p + "/preds_ca.csv\"");
  CHECK(diag_ca.exit_code == 0);
  const nlohmann::json ca_report = nlohmann::json::parse(diag_ca.out);
  CHECK(ca_report.at("all_deconfounded") == true);
  CHECK(ca_report.at("confounders").size() == 2);

  const CliResult diag_res =
      run_cli(dir.path, "diagnose --input \"" + p + "/preds_res.csv\"");
  CHECK(diag_res.exit_code == 2);
  const nlohmann::json res_report = nlohmann::json::parse(diag_res.out);
  CHECK(res_report.at("all_deconfounded") == false);
}

TEST_CASE("the theory calculator reproduces the worked single-feature chain") {
  TempDir dir("deconfound_cli_theory");
  const fs::path params = dir.path / "params.json";
  {
    std::ofstream out(params);
    out << R"({
      "gamma_xy": [0.5],
      "gamma_xa": [[0.3]],
      "gamma_ya": [0.4],
      "cov_a": [[1.0]],
      "sigma_w": [[0.79]],
      "shift": {"beta_xy": 1.0, "beta_hat_tr": 0.5,
                "sigma_ay": 0.6, "sigma_aa": 1.5}
    })";
  }
  const CliResult r =
      run_cli(dir.path, "theory --params \"" + params.string() + "\"");
  REQUIRE(r.exit_code == 0);
  const nlohmann::json out = nlohmann::json::parse(r.out);
  CHECK(out.at("q").get<double>() == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(out.at("cov_x_y").at(0).get<double>() ==
        doctest::Approx(0.62).epsilon(1e-12));
  CHECK(out.at("cov_xr_y").at(0).get<double>() ==
        doctest::Approx(0.42).epsilon(1e-12));
  CHECK(out.at("expected_mse").at("causality_aware").get<double>() ==
        doctest::Approx(1.0 - 0.25 / 1.04).epsilon(1e-12));
  CHECK(out.at("expected_mse").at("residualization").get<double>() ==
        doctest::Approx(1.0 - 0.42 * 0.42).epsilon(1e-12));
  CHECK(out.at("expected_mse_single") == out.at("expected_mse"));
  CHECK(out.at("theorem2_dominance").at(0) == true);
  CHECK(out.at("shift").at("causality_aware").get<double>() ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.at("shift").at("residualization").get<double>() ==
        doctest::Approx(0.68).epsilon(1e-12));
}

TEST_CASE("experiment runs are deterministic end to end") {
  TempDir dir("deconfound_cli_experiment");
  const std::string p = dir.path.string();
  const std::string args =
      "experiment --family A --replications 2 --n-train 400 --n-test 400 "
      "--seed 13 --out \"";
  const CliResult first = run_cli(dir.path, args + p + "/run1\"");
  REQUIRE(first.exit_code == 0);
  const CliResult second = run_cli(dir.path, args + p + "/run2\"");
  REQUIRE(second.exit_code == 0);

  CHECK(first.out == second.out);
  CHECK(slurp(dir.path / "run1/family_A/summary.json") ==
        slurp(dir.path / "run2/family_A/summary.json"));
  CHECK(slurp(dir.path / "run1/family_A/replication_0001.csv") ==
        slurp(dir.path / "run2/family_A/replication_0001.csv"));

  const nlohmann::json summary = nlohmann::json::parse(first.out);
  CHECK(summary.at("family") == "A");
  CHECK(summary.at("win_rate").get<double>() >= 0.0);
  CHECK(summary.at("win_rate").get<double>() <= 1.0);
}

TEST_CASE("bad invocations exit nonzero with a message") {
  TempDir dir("deconfound_cli_errors");
  CHECK(run_cli(dir.path, "frobnicate").exit_code != 0);
  CHECK(run_cli(dir.path, "diagnose").exit_code != 0);

  const CliResult bad_method = run_cli(
      dir.path, "adjust --method quantum --train a.csv --test b.csv "
                "--out-prefix \"" + dir.path.string() + "/x\"");
  CHECK(bad_method.exit_code == 1);
  CHECK(bad_method.err.find("quantum") != std::string::npos);

  const CliResult bad_env = run_cli(
      dir.path, "simulate --family A --environment 3 --out-prefix \"" +
                dir.path.string() + "/y\"");
  CHECK(bad_env.exit_code == 1);
  CHECK(bad_env.err.find("environment") != std::string::npos);
}
