// Command-line front end: dataset simulation, confounding adjustment,
// train/eval scoring, conditional-independence diagnostics, closed-form
// calculators, and the replicated experiment harness.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deconfound/dataset_io.hpp"
#include "deconfound/harness.hpp"
#include "deconfound/learners.hpp"
#include "deconfound/theory.hpp"

namespace {

using deconfound::AdjustMethod;
using deconfound::Dataset;
using deconfound::Family;
using deconfound::Index;
using deconfound::InvalidParam;
using deconfound::Matrix;
using deconfound::RngStream;
using deconfound::Vector;
using nlohmann::json;

// Substream layout shared with the experiment loop: 31 draws parameters,
// 0 the training split, 1 + e the test split of environment e.
constexpr std::uint64_t kSubTrain = 0;
constexpr std::uint64_t kSubTestBase = 1;
constexpr std::uint64_t kSubParams = 31;

json json_vector(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json json_matrix(const Matrix& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw InvalidParam(name + " must be a non-empty array of numbers");
  }
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw InvalidParam(name + " must contain only numbers");
    }
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    throw InvalidParam(name + " must be a non-empty array of equal-length rows");
  }
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw InvalidParam(name + " rows must all have length " +
                         std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c) {
      const json& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) {
        throw InvalidParam(name + " must contain only numbers");
      }
      m(i, c) = cell.get<double>();
    }
  }
  return m;
}

std::vector<AdjustMethod> parse_methods(const std::string& csv) {
  std::vector<AdjustMethod> out;
  std::istringstream in(csv);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (!token.empty()) out.push_back(deconfound::adjust_method_from_string(token));
  }
  if (out.empty()) throw InvalidParam("--methods lists no methods");
  return out;
}

json diagnostics_json(const deconfound::DiagnosticReport& report,
                      const std::vector<deconfound::Verdict>& verdicts) {
  json confounders = json::array();
  for (std::size_t j = 0; j < report.per_confounder.size(); ++j) {
    const deconfound::ConfounderPattern& p = report.per_confounder[j];
    const std::pair<const char*, const deconfound::CorrelationTest*> tests[] = {
        {"yhat_y", &p.yhat_y},
        {"yhat_a", &p.yhat_a},
        {"a_y", &p.a_y},
        {"yhat_y_given_a", &p.yhat_y_given_a},
        {"yhat_a_given_y", &p.yhat_a_given_y},
        {"a_y_given_yhat", &p.a_y_given_yhat}};
    json relations;
    for (const auto& [name, t] : tests) {
      relations[name] = {{"r", t->r}, {"p", t->p_value}};
    }
    confounders.push_back(
        {{"relations", relations}, {"verdict", to_string(verdicts[j])}});
  }
  return {{"n", report.n}, {"confounders", confounders}};
}

struct SimulateArgs {
  std::string family = "A";
  int replication = 0;
  Index n_train = 10000;
  Index n_test = 10000;
  std::uint64_t seed = 0;
  int environment = 0;
  bool environment_set = false;
  bool paper_literal_grid = false;
  std::string out_prefix;
};

int run_simulate(const SimulateArgs& args) {
  const Family family = deconfound::family_from_string(args.family);
  if (args.n_train < 1 || args.n_test < 1) {
    throw InvalidParam("--n-train and --n-test must be positive");
  }
  const bool shift = family == Family::F || family == Family::G;
  if (args.environment_set && !shift) {
    throw InvalidParam("--environment only applies to families F and G");
  }
  const std::uint64_t rep = static_cast<std::uint64_t>(args.replication);

  Dataset train;
  Dataset test;
  if (shift) {
    RngStream params_rng(args.seed, rep, kSubParams);
    deconfound::ShiftScmParams params;
    params.beta_xy = params_rng.uniform(-3.0, 3.0);
    params.beta_xa = params_rng.uniform(-3.0, 3.0);
    const double sigma_ay_tr = params_rng.uniform(-0.8, 0.8);
    params.sigma2_x = 1.0;
    params.train_cov << 1.0, sigma_ay_tr, sigma_ay_tr, 1.0;
    const auto ay = deconfound::shift_sigma_ay_grid(args.paper_literal_grid);
    const auto aa = deconfound::shift_sigma_aa_grid();
    const auto yy = deconfound::shift_sigma_yy_grid(family);
    for (std::size_t e = 0; e < ay.size(); ++e) {
      Eigen::Matrix2d cov;
      cov << aa[e], ay[e], ay[e], yy[e];
      params.test_covs.push_back(cov);
    }
    RngStream train_rng(args.seed, rep, kSubTrain);
    train = deconfound::gen_shift_data(params, 0, args.n_train, train_rng);
    const std::size_t e = static_cast<std::size_t>(args.environment);
    RngStream test_rng(args.seed, rep, kSubTestBase + e);
    test = deconfound::gen_shift_data(params, args.environment + 1, args.n_test,
                                      test_rng);
  } else if (family == Family::C || family == Family::D) {
    RngStream params_rng(args.seed, rep, kSubParams);
    const auto params = deconfound::sample_classification_params(
        params_rng, family == Family::D);
    RngStream train_rng(args.seed, rep, kSubTrain);
    RngStream test_rng(args.seed, rep, kSubTestBase);
    std::tie(train, test) = deconfound::gen_classification_pair(
        params, args.n_train, args.n_test, train_rng, test_rng);
  } else {
    // A and E draw from the correct regression model, B from the curved one.
    RngStream params_rng(args.seed, rep, kSubParams);
    const auto params =
        deconfound::sample_regression_params(params_rng, family == Family::B);
    RngStream train_rng(args.seed, rep, kSubTrain);
    RngStream test_rng(args.seed, rep, kSubTestBase);
    std::tie(train, test) = deconfound::gen_regression_pair(
        params, args.n_train, args.n_test, train_rng, test_rng);
  }

  const std::filesystem::path train_path = args.out_prefix + "_train.csv";
  const std::filesystem::path test_path = args.out_prefix + "_test.csv";
  deconfound::write_dataset_csv(train_path, train);
  deconfound::write_dataset_csv(test_path, test);
  std::cout << json{{"train", train_path.string()},
                    {"test", test_path.string()},
                    {"n_train", train.rows()},
                    {"n_test", test.rows()}}
                   .dump(2)
            << "\n";
  return 0;
}

struct AdjustArgs {
  std::string method;
  std::string train;
  std::string test;
  std::string out_prefix;
};

int run_adjust(const AdjustArgs& args) {
  const AdjustMethod method = deconfound::adjust_method_from_string(args.method);
  const Dataset train = deconfound::read_dataset_csv(args.train);
  const Dataset test = deconfound::read_dataset_csv(args.test);
  const deconfound::AdjustedPair adjusted =
      deconfound::adjust_with(method, train, test);

  const std::filesystem::path train_path = args.out_prefix + "_train.csv";
  const std::filesystem::path test_path = args.out_prefix + "_test.csv";
  const std::filesystem::path meta_path = args.out_prefix + "_meta.json";
  deconfound::write_dataset_csv(train_path, adjusted.train);
  deconfound::write_dataset_csv(test_path, adjusted.test);
  const json meta = {{"method", to_string(method)},
                     {"train_input", args.train},
                     {"test_input", args.test},
                     {"n_train", adjusted.train.rows()},
                     {"n_test", adjusted.test.rows()}};
  std::ofstream meta_out(meta_path);
  meta_out << meta.dump(2) << "\n";
  std::cout << json{{"train", train_path.string()},
                    {"test", test_path.string()},
                    {"meta", meta_path.string()}}
                   .dump(2)
            << "\n";
  return 0;
}

struct TrainEvalArgs {
  std::string method;
  std::string train;
  std::string test;
  std::string pred_out;
  double alpha = deconfound::kDefaultAlpha;
  bool diagnose = false;
};

int run_train_eval(const TrainEvalArgs& args) {
  const AdjustMethod method = deconfound::adjust_method_from_string(args.method);
  const Dataset train = deconfound::read_dataset_csv(args.train);
  const Dataset test = deconfound::read_dataset_csv(args.test);
  if (train.binary_y != test.binary_y) {
    throw InvalidParam("train and test disagree on whether the outcome is binary");
  }
  const deconfound::AdjustedPair adjusted =
      deconfound::adjust_with(method, train, test);
  const deconfound::TrainedModel model =
      train.binary_y
          ? deconfound::fit_logistic(adjusted.train.x, adjusted.train.y)
          : deconfound::fit_linear(adjusted.train.x, adjusted.train.y);
  const deconfound::MetricReport metrics =
      deconfound::evaluate(model, adjusted.test);

  json out = {{"method", to_string(method)},
              {"task", train.binary_y ? "classification" : "regression"},
              {"n_train", train.rows()},
              {"n_test", test.rows()}};
  if (metrics.mse) out["mse"] = *metrics.mse;
  if (metrics.accuracy) out["accuracy"] = *metrics.accuracy;
  if (args.diagnose) {
    const deconfound::DiagnosticReport report = deconfound::ci_pattern(
        metrics.predictions, adjusted.test.y, adjusted.test.a);
    const std::vector<deconfound::Verdict> verdicts =
        deconfound::classify_pattern(report, args.alpha);
    out["alpha"] = args.alpha;
    out["diagnostics"] = diagnostics_json(report, verdicts);
  }
  if (!args.pred_out.empty()) {
    deconfound::PredictionTable table;
    table.y_hat = metrics.predictions;
    table.y = adjusted.test.y;
    table.a = adjusted.test.a;
    deconfound::write_prediction_csv(args.pred_out, table);
    out["predictions"] = args.pred_out;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct DiagnoseArgs {
  std::string input;
  double alpha = deconfound::kDefaultAlpha;
};

int run_diagnose(const DiagnoseArgs& args) {
  const deconfound::PredictionTable table =
      deconfound::read_prediction_csv(args.input);
  const deconfound::DiagnosticReport report =
      deconfound::ci_pattern(table.y_hat, table.y, table.a);
  const std::vector<deconfound::Verdict> verdicts =
      deconfound::classify_pattern(report, args.alpha);
  bool all_deconfounded = true;
  for (const deconfound::Verdict v : verdicts) {
    all_deconfounded = all_deconfounded && v == deconfound::Verdict::deconfounded;
  }
  json out = diagnostics_json(report, verdicts);
  out["alpha"] = args.alpha;
  out["all_deconfounded"] = all_deconfounded;
  std::cout << out.dump(2) << "\n";
  return all_deconfounded ? 0 : 2;
}

int run_theory(const std::string& params_path) {
  std::ifstream in(params_path);
  if (!in) throw InvalidParam("cannot open " + params_path);
  json params_doc;
  in >> params_doc;

  json out;
  if (params_doc.contains("gamma_xy")) {
    deconfound::TheoryParams params;
    params.gamma_xy = vector_from_json(params_doc.at("gamma_xy"), "gamma_xy");
    params.gamma_xa = matrix_from_json(params_doc.at("gamma_xa"), "gamma_xa");
    params.gamma_ya = vector_from_json(params_doc.at("gamma_ya"), "gamma_ya");
    params.cov_a = matrix_from_json(params_doc.at("cov_a"), "cov_a");
    params.sigma_w = matrix_from_json(params_doc.at("sigma_w"), "sigma_w");

    const deconfound::ClosedFormCovariances cf =
        deconfound::closed_form_covariances(params);
    const double q = params.gamma_ya.dot(params.cov_a * params.gamma_ya);
    out["q"] = q;
    out["cov_x_y"] = json_vector(cf.cov_x_y);
    out["cov_xc_y"] = json_vector(cf.cov_xc_y);
    out["cov_xr_y"] = json_vector(cf.cov_xr_y);
    out["cov_xc"] = json_matrix(cf.cov_xc);
    out["cov_xr"] = json_matrix(cf.cov_xr);
    json dominance = json::array();
    for (const bool b : deconfound::theorem2_check(params)) dominance.push_back(b);
    out["theorem2_dominance"] = dominance;
    out["expected_mse"] = {
        {"causality_aware",
         deconfound::expected_mse_general(cf.cov_xc, cf.cov_xc_y, 1.0)},
        {"residualization",
         deconfound::expected_mse_general(cf.cov_xr, cf.cov_xr_y, 1.0)}};
    const double phi = std::sqrt(q);
    if (params.gamma_xy.size() == 1) {
      const deconfound::MsePair single = deconfound::expected_mse_single(
          params.gamma_xy[0], phi, params.sigma_w(0, 0));
      out["expected_mse_single"] = {{"causality_aware", single.mse_c},
                                    {"residualization", single.mse_r}};
    }
    if (params.gamma_xy.size() == 2) {
      const deconfound::MsePair two = deconfound::expected_mse_two(
          params.gamma_xy[0], params.gamma_xy[1], phi, params.sigma_w(0, 0),
          params.sigma_w(0, 1), params.sigma_w(1, 1));
      out["expected_mse_two"] = {{"causality_aware", two.mse_c},
                                 {"residualization", two.mse_r}};
    }
  }
  if (params_doc.contains("shift")) {
    const json& s = params_doc.at("shift");
    deconfound::ShiftTheoryParams params;
    params.beta_xy = s.at("beta_xy").get<double>();
    params.beta_hat_tr = s.at("beta_hat_tr").get<double>();
    params.beta_xa = s.value("beta_xa", 0.0);
    params.sigma2_x = s.value("sigma2_x", 1.0);
    params.sigma_aa = s.value("sigma_aa", 1.0);
    params.sigma_ay = s.value("sigma_ay", 0.0);
    params.sigma_yy = s.value("sigma_yy", 1.0);
    out["shift"] = {
        {"causality_aware",
         deconfound::expected_mse_shift(
             params, deconfound::ShiftMethod::kCausalityAware)},
        {"residualization",
         deconfound::expected_mse_shift(
             params, deconfound::ShiftMethod::kResidualization)}};
  }
  if (out.empty()) {
    throw InvalidParam(
        "params file must define gamma_xy/gamma_xa/gamma_ya/cov_a/sigma_w "
        "and/or a shift block");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string family;
  int replications = 1;
  Index n_train = 10000;
  Index n_test = 10000;
  std::uint64_t seed = 0;
  std::string out;
  std::string methods;
  double alpha = deconfound::kDefaultAlpha;
  bool paper_literal_grid = false;
  bool serial = false;
  int threads = 0;
};

int run_experiment(const ExperimentArgs& args) {
  deconfound::ExperimentConfig cfg;
  cfg.family = deconfound::family_from_string(args.family);
  cfg.replications = args.replications;
  cfg.n_train = args.n_train;
  cfg.n_test = args.n_test;
  cfg.master_seed = args.seed;
  cfg.output_dir = args.out;
  if (!args.methods.empty()) cfg.adjustment_methods = parse_methods(args.methods);
  cfg.alpha = args.alpha;
  cfg.paper_literal_grid = args.paper_literal_grid;
  cfg.parallel = !args.serial;
  cfg.threads = args.threads;

  const deconfound::FamilyRun run = deconfound::run_family(cfg);
  std::cout << deconfound::summary_to_json(cfg, run.summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Confounding adjustment for anticausal prediction: simulators, "
      "linear and additive adjustments, diagnostics, closed-form theory, "
      "and the replication harness"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a train/test dataset pair from one experiment family");
  simulate->add_option("--family", sim.family, "Experiment family A..G")
      ->required();
  simulate->add_option("--replication", sim.replication,
                       "Replication index selecting the random streams")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--n-train", sim.n_train, "Training rows");
  simulate->add_option("--n-test", sim.n_test, "Test rows");
  simulate->add_option("--seed", sim.seed, "Master seed");
  CLI::Option* env_opt =
      simulate
          ->add_option("--environment", sim.environment,
                       "Shift test environment index (families F/G)")
          ->check(CLI::Range(0, 8));
  simulate->add_flag("--paper-literal-grid", sim.paper_literal_grid,
                     "Use the 8-value confounder-outcome covariance grid with "
                     "the last environment repeated instead of the padded "
                     "9-value grid");
  simulate
      ->add_option("--out-prefix", sim.out_prefix,
                   "Writes <prefix>_train.csv and <prefix>_test.csv")
      ->required();

  AdjustArgs adj;
  CLI::App* adjust = app.add_subcommand(
      "adjust", "Adjust a train/test pair for confounding and write the result");
  adjust
      ->add_option("--method", adj.method,
                   "linear-res | linear-ca | additive-res | additive-ca")
      ->required();
  adjust->add_option("--train", adj.train, "Training CSV")->required();
  adjust->add_option("--test", adj.test, "Test CSV")->required();
  adjust
      ->add_option("--out-prefix", adj.out_prefix,
                   "Writes <prefix>_train.csv, <prefix>_test.csv and "
                   "<prefix>_meta.json")
      ->required();

  TrainEvalArgs te;
  CLI::App* train_eval = app.add_subcommand(
      "train-eval",
      "Adjust, fit the task's learner on the training split, and score the "
      "test split");
  train_eval
      ->add_option("--method", te.method,
                   "linear-res | linear-ca | additive-res | additive-ca")
      ->required();
  train_eval->add_option("--train", te.train, "Training CSV")->required();
  train_eval->add_option("--test", te.test, "Test CSV")->required();
  train_eval->add_option("--pred-out", te.pred_out,
                         "Write the test predictions as a y_hat,y,a1..ak CSV");
  train_eval->add_flag("--diagnose", te.diagnose,
                       "Also run the conditional-independence diagnostics on "
                       "the test predictions");
  train_eval->add_option("--alpha", te.alpha, "Diagnostics significance level")
      ->check(CLI::Range(0.0, 1.0));

  DiagnoseArgs diag;
  CLI::App* diagnose = app.add_subcommand(
      "diagnose",
      "Classify predictions as deconfounded/confounded from a y_hat,y,a1..ak "
      "CSV (exit 0 iff deconfounded on every confounder, 2 otherwise)");
  diagnose->add_option("--input", diag.input, "Prediction CSV")->required();
  diagnose->add_option("--alpha", diag.alpha, "Significance level")
      ->check(CLI::Range(0.0, 1.0));

  std::string theory_params;
  CLI::App* theory = app.add_subcommand(
      "theory", "Evaluate the closed-form covariances and expected errors");
  theory
      ->add_option("--params", theory_params,
                   "JSON file with gamma_xy, gamma_xa, gamma_ya, cov_a, "
                   "sigma_w and/or a shift block")
      ->required();

  ExperimentArgs exp;
  CLI::App* experiment = app.add_subcommand(
      "experiment", "Run replications of one experiment family and summarize");
  experiment->add_option("--family", exp.family, "Experiment family A..G")
      ->required();
  experiment
      ->add_option("--replications", exp.replications, "Replication count")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--n-train", exp.n_train, "Training rows");
  experiment->add_option("--n-test", exp.n_test, "Test rows");
  experiment->add_option("--seed", exp.seed, "Master seed");
  experiment->add_option("--out", exp.out, "Output directory")->required();
  experiment->add_option(
      "--methods", exp.methods,
      "Comma-separated adjustment methods (default: family's standard set)");
  experiment->add_option("--alpha", exp.alpha, "Diagnostics significance level")
      ->check(CLI::Range(0.0, 1.0));
  experiment->add_flag("--paper-literal-grid", exp.paper_literal_grid,
                       "Use the 8-value confounder-outcome covariance grid "
                       "with the last environment repeated instead of the "
                       "padded 9-value grid");
  experiment->add_flag("--serial", exp.serial,
                       "Run the serial reference loop instead of the "
                       "parallel one");
  experiment->add_option("--threads", exp.threads,
                         "Worker threads for the parallel loop (0 = runtime "
                         "default)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      sim.environment_set = env_opt->count() > 0;
      return run_simulate(sim);
    }
    if (adjust->parsed()) return run_adjust(adj);
    if (train_eval->parsed()) return run_train_eval(te);
    if (diagnose->parsed()) return run_diagnose(diag);
    if (theory->parsed()) return run_theory(theory_params);
    if (experiment->parsed()) return run_experiment(exp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
