#include "deconfound/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "deconfound/learners.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace deconfound {

namespace {

using nlohmann::json;

// Substream ids within one replication. Families F/G use test environments
// e = 0..8 (substreams 1..9); family E's curved arm re-generates train/test
// from substreams 2/3, which F/G never touch.
constexpr std::uint64_t kSubTrain = 0;
constexpr std::uint64_t kSubTestBase = 1;
constexpr std::uint64_t kSubMispecTrain = 2;
constexpr std::uint64_t kSubMispecTest = 3;
constexpr std::uint64_t kSubParams = 31;

constexpr int kShiftEnvironments = 9;

double sample_cov(const Vector& u, const Vector& v) {
  return ((u.array() - u.mean()) * (v.array() - v.mean())).sum() /
         static_cast<double>(u.size() - 1);
}

Vector feature_outcome_covs(const Dataset& d) {
  Vector covs(d.x.cols());
  for (Index j = 0; j < d.x.cols(); ++j) {
    covs[j] = sample_cov(d.x.col(j), d.y);
  }
  return covs;
}

double sample_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (const double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

bool is_classification(Family f) { return f == Family::C || f == Family::D; }
bool is_shift(Family f) { return f == Family::F || f == Family::G; }

std::vector<AdjustMethod> resolve_methods(const ExperimentConfig& cfg) {
  if (!cfg.adjustment_methods.empty()) return cfg.adjustment_methods;
  std::vector<AdjustMethod> methods{AdjustMethod::linear_residualize,
                                    AdjustMethod::linear_causality_aware};
  if (cfg.family == Family::E) {
    methods.push_back(AdjustMethod::additive_causality_aware);
  }
  return methods;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) {
    throw InvalidParam("replications must be >= 1");
  }
  if (cfg.n_train < 100 || cfg.n_test < 100) {
    throw InvalidParam("n_train and n_test must be >= 100");
  }
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0)) {
    throw InvalidParam("alpha must lie strictly between 0 and 1");
  }
  if (is_shift(cfg.family)) {
    for (const AdjustMethod m : cfg.adjustment_methods) {
      if (m == AdjustMethod::additive_residualize) {
        throw InvalidParam(
            "additive residualization is not defined for the stability "
            "families (no pooled fit exists that keeps one model per "
            "replication)");
      }
    }
  }
}

std::vector<std::pair<std::string, double>> snapshot(
    const ScmRegressionParams& p) {
  return {{"mu_a1", p.mu_a[0]},         {"mu_a2", p.mu_a[1]},
          {"mu_y", p.mu_y},             {"mu_x1", p.mu_x[0]},
          {"mu_x2", p.mu_x[1]},         {"beta_ya1", p.beta_ya[0]},
          {"beta_ya2", p.beta_ya[1]},   {"beta_xy1", p.beta_xy[0]},
          {"beta_xy2", p.beta_xy[1]},   {"beta_xa11", p.beta_xa(0, 0)},
          {"beta_xa12", p.beta_xa(0, 1)}, {"beta_xa21", p.beta_xa(1, 0)},
          {"beta_xa22", p.beta_xa(1, 1)}, {"sigma2_y", p.sigma2_y},
          {"rho_a", p.rho_a},           {"rho_x", p.rho_x}};
}

std::vector<std::pair<std::string, double>> snapshot(
    const ScmClassificationParams& p) {
  return {{"mu_y", p.mu_y},
          {"mu_x1", p.mu_x[0]},
          {"mu_x2", p.mu_x[1]},
          {"beta_ya1", p.beta_ya[0]},
          {"beta_ya2", p.beta_ya[1]},
          {"beta_xy1", p.beta_xy[0]},
          {"beta_xy2", p.beta_xy[1]},
          {"beta_xa11", p.beta_xa(0, 0)},
          {"beta_xa12", p.beta_xa(0, 1)},
          {"beta_xa21", p.beta_xa(1, 0)},
          {"beta_xa22", p.beta_xa(1, 1)},
          {"beta_xya11", p.beta_xya(0, 0)},
          {"beta_xya12", p.beta_xya(0, 1)},
          {"beta_xya21", p.beta_xya(1, 0)},
          {"beta_xya22", p.beta_xya(1, 1)},
          {"p11", p.p_cell[0]},
          {"p10", p.p_cell[1]},
          {"p01", p.p_cell[2]},
          {"p00", p.p_cell[3]},
          {"rho_x", p.rho_x}};
}

// One regression arm: generate, adjust with each method, fit, score, and
// (family E) diagnose the test predictions against the test confounders.
std::vector<MethodResult> regression_arm(const ExperimentConfig& cfg,
                                         const std::vector<AdjustMethod>& methods,
                                         const ScmRegressionParams& params,
                                         int rep, std::uint64_t train_sub,
                                         std::uint64_t test_sub,
                                         bool with_diagnostics) {
  RngStream train_rng(cfg.master_seed, static_cast<std::uint64_t>(rep), train_sub);
  RngStream test_rng(cfg.master_seed, static_cast<std::uint64_t>(rep), test_sub);
  const auto [train, test] =
      gen_regression_pair(params, cfg.n_train, cfg.n_test, train_rng, test_rng);

  std::vector<MethodResult> out;
  out.reserve(methods.size());
  for (const AdjustMethod method : methods) {
    const AdjustedPair adjusted = adjust_with(method, train, test);
    const TrainedModel model = fit_linear(adjusted.train.x, adjusted.train.y);
    const MetricReport metrics = evaluate(model, adjusted.test);
    MethodResult r;
    r.method = method;
    r.mse = metrics.mse;
    r.cov_xhat_y = feature_outcome_covs(adjusted.test);
    if (with_diagnostics) {
      r.diagnostics = ci_pattern(metrics.predictions, adjusted.test.y,
                                 adjusted.test.a);
      r.verdicts = classify_pattern(*r.diagnostics, cfg.alpha);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MethodResult> classification_arm(
    const ExperimentConfig& cfg, const std::vector<AdjustMethod>& methods,
    const ScmClassificationParams& params, int rep) {
  RngStream train_rng(cfg.master_seed, static_cast<std::uint64_t>(rep), kSubTrain);
  RngStream test_rng(cfg.master_seed, static_cast<std::uint64_t>(rep), kSubTestBase);
  const auto [train, test] = gen_classification_pair(
      params, cfg.n_train, cfg.n_test, train_rng, test_rng);

  std::vector<MethodResult> out;
  out.reserve(methods.size());
  for (const AdjustMethod method : methods) {
    const AdjustedPair adjusted = adjust_with(method, train, test);
    const TrainedModel model = fit_logistic(adjusted.train.x, adjusted.train.y);
    const MetricReport metrics = evaluate(model, adjusted.test);
    MethodResult r;
    r.method = method;
    r.accuracy = metrics.accuracy;
    r.cov_xhat_y = feature_outcome_covs(adjusted.test);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MethodResult> shift_arm(const ExperimentConfig& cfg,
                                    const std::vector<AdjustMethod>& methods,
                                    const ShiftScmParams& params, int rep) {
  RngStream train_rng(cfg.master_seed, static_cast<std::uint64_t>(rep), kSubTrain);
  const Dataset train = gen_shift_data(params, 0, cfg.n_train, train_rng);
  std::vector<Dataset> tests;
  tests.reserve(params.test_covs.size());
  for (std::size_t e = 0; e < params.test_covs.size(); ++e) {
    RngStream env_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                      kSubTestBase + e);
    tests.push_back(
        gen_shift_data(params, static_cast<int>(e) + 1, cfg.n_test, env_rng));
  }

  // The stability comparison scores one frozen model per method across all
  // nine environments; per environment only the test features change.
  std::vector<MethodResult> out;
  out.reserve(methods.size());
  for (const AdjustMethod method : methods) {
    MethodResult r;
    r.method = method;
    r.env_mse.reserve(tests.size());
    if (method == AdjustMethod::linear_residualize) {
      // Pooling train and test would retrain a different model per
      // environment, so here each split is residualized by its own regression
      // of X on A. That split-specific limit (each coefficient converging to
      // its split's Cov(X,A)/Var(A)) is also what expected_mse_shift assumes.
      const LinearFit train_fit = ols_fit(train.a, train.x, true);
      Dataset adjusted_train = train;
      adjusted_train.x = train_fit.residuals;
      const TrainedModel model = fit_linear(adjusted_train.x, adjusted_train.y);
      for (const Dataset& test : tests) {
        const LinearFit env_fit = ols_fit(test.a, test.x, true);
        Dataset adjusted_test = test;
        adjusted_test.x = env_fit.residuals;
        r.env_mse.push_back(*evaluate(model, adjusted_test).mse);
      }
    } else {
      // Causality-aware train features never read a test split, so adjusting
      // against each environment reproduces the identical train-side fit; the
      // model is trained once on the first pair and reused.
      TrainedModel model;
      bool trained = false;
      for (const Dataset& test : tests) {
        const AdjustedPair adjusted = adjust_with(method, train, test);
        if (!trained) {
          model = fit_linear(adjusted.train.x, adjusted.train.y);
          trained = true;
        }
        r.env_mse.push_back(*evaluate(model, adjusted.test).mse);
      }
    }
    r.stability_error = sample_sd(r.env_mse);
    out.push_back(std::move(r));
  }
  return out;
}

ReplicationResult run_one_replication(const ExperimentConfig& cfg,
                                      const std::vector<AdjustMethod>& methods,
                                      int rep) {
  ReplicationResult result;
  result.replication_index = rep;
  try {
    switch (cfg.family) {
      case Family::A:
      case Family::B: {
        RngStream params_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                             kSubParams);
        const ScmRegressionParams params =
            sample_regression_params(params_rng, cfg.family == Family::B);
        result.params = snapshot(params);
        result.methods = regression_arm(cfg, methods, params, rep, kSubTrain,
                                        kSubTestBase, false);
        break;
      }
      case Family::C:
      case Family::D: {
        RngStream params_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                             kSubParams);
        const ScmClassificationParams params =
            sample_classification_params(params_rng, cfg.family == Family::D);
        result.params = snapshot(params);
        result.methods = classification_arm(cfg, methods, params, rep);
        break;
      }
      case Family::E: {
        RngStream correct_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                              kSubParams);
        const ScmRegressionParams correct_params =
            sample_regression_params(correct_rng, false);
        RngStream mispec_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                             kSubParams);
        const ScmRegressionParams mispec_params =
            sample_regression_params(mispec_rng, true);
        result.params = snapshot(correct_params);
        result.methods = regression_arm(cfg, methods, correct_params, rep,
                                        kSubTrain, kSubTestBase, true);
        result.mispec_methods =
            regression_arm(cfg, methods, mispec_params, rep, kSubMispecTrain,
                           kSubMispecTest, true);
        break;
      }
      case Family::F:
      case Family::G: {
        RngStream params_rng(cfg.master_seed, static_cast<std::uint64_t>(rep),
                             kSubParams);
        ShiftScmParams params;
        params.beta_xy = params_rng.uniform(-3.0, 3.0);
        params.beta_xa = params_rng.uniform(-3.0, 3.0);
        const double sigma_ay_tr = params_rng.uniform(-0.8, 0.8);
        params.sigma2_x = 1.0;
        params.train_cov << 1.0, sigma_ay_tr, sigma_ay_tr, 1.0;
        const std::vector<double> ay = shift_sigma_ay_grid(cfg.paper_literal_grid);
        const std::vector<double> aa = shift_sigma_aa_grid();
        const std::vector<double> yy = shift_sigma_yy_grid(cfg.family);
        for (int e = 0; e < kShiftEnvironments; ++e) {
          Eigen::Matrix2d cov;
          cov << aa[static_cast<std::size_t>(e)], ay[static_cast<std::size_t>(e)],
              ay[static_cast<std::size_t>(e)], yy[static_cast<std::size_t>(e)];
          params.test_covs.push_back(cov);
        }
        result.params = {{"beta_xy", params.beta_xy},
                         {"beta_xa", params.beta_xa},
                         {"sigma_ay_tr", sigma_ay_tr},
                         {"sigma2_x", params.sigma2_x}};
        result.methods = shift_arm(cfg, methods, params, rep);
        break;
      }
    }
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
    result.methods.clear();
    result.mispec_methods.clear();
  }
  return result;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

void write_method_rows(std::ostream& out, int rep, const std::string& arm,
                       const MethodResult& r) {
  const std::string m = to_string(r.method);
  const auto row = [&](const std::string& key, const std::string& index,
                       const std::string& value) {
    out << rep << ',' << arm << ',' << m << ',' << key << ',' << index << ','
        << value << '\n';
  };
  if (r.mse) row("mse", "", fmt(*r.mse));
  if (r.accuracy) row("accuracy", "", fmt(*r.accuracy));
  for (Index j = 0; j < r.cov_xhat_y.size(); ++j) {
    row("cov_xhat_y", std::to_string(j), fmt(r.cov_xhat_y[j]));
  }
  for (std::size_t e = 0; e < r.env_mse.size(); ++e) {
    row("env_mse", std::to_string(e), fmt(r.env_mse[e]));
  }
  if (r.stability_error) row("stability_error", "", fmt(*r.stability_error));
  if (r.diagnostics) {
    const auto& pcs = r.diagnostics->per_confounder;
    for (std::size_t j = 0; j < pcs.size(); ++j) {
      const ConfounderPattern& p = pcs[j];
      const std::pair<const char*, const CorrelationTest*> tests[] = {
          {"yhat_y", &p.yhat_y},
          {"yhat_a", &p.yhat_a},
          {"a_y", &p.a_y},
          {"yhat_y_given_a", &p.yhat_y_given_a},
          {"yhat_a_given_y", &p.yhat_a_given_y},
          {"a_y_given_yhat", &p.a_y_given_yhat}};
      for (const auto& [name, t] : tests) {
        row(std::string("r.") + name, std::to_string(j), fmt(t->r));
        row(std::string("p.") + name, std::to_string(j), fmt(t->p_value));
      }
    }
  }
  for (std::size_t j = 0; j < r.verdicts.size(); ++j) {
    row("verdict", std::to_string(j), to_string(r.verdicts[j]));
  }
}

void write_replication_csv(const std::filesystem::path& path,
                           const ReplicationResult& r) {
  std::ofstream out(path);
  if (!out) throw InvalidParam("cannot open " + path.string() + " for writing");
  out << "replication,arm,method,key,index,value\n";
  if (r.failed) {
    out << r.replication_index << ",,,failed,,1\n";
    out << r.replication_index << ",,,error,," << sanitize(r.error) << '\n';
    return;
  }
  for (const auto& [name, value] : r.params) {
    out << r.replication_index << ",params,,param." << name << ",,"
        << fmt(value) << '\n';
  }
  for (const MethodResult& m : r.methods) {
    write_method_rows(out, r.replication_index, "main", m);
  }
  for (const MethodResult& m : r.mispec_methods) {
    write_method_rows(out, r.replication_index, "mispecified", m);
  }
}

const MethodResult* find_method(const std::vector<MethodResult>& methods,
                                AdjustMethod method) {
  for (const MethodResult& m : methods) {
    if (m.method == method) return &m;
  }
  return nullptr;
}

std::optional<double> family_metric(Family family, const MethodResult& r) {
  if (is_classification(family)) return r.accuracy;
  if (is_shift(family)) return r.stability_error;
  return r.mse;
}

std::vector<MethodSummary> summarize_arm(
    Family family, const std::vector<const std::vector<MethodResult>*>& arms) {
  // Collect the method order from the first nonempty arm.
  std::vector<AdjustMethod> order;
  for (const auto* arm : arms) {
    for (const MethodResult& m : *arm) {
      if (std::find(order.begin(), order.end(), m.method) == order.end()) {
        order.push_back(m.method);
      }
    }
  }
  std::vector<MethodSummary> out;
  for (const AdjustMethod method : order) {
    MethodSummary s;
    s.method = method;
    std::vector<double> metric;
    for (const auto* arm : arms) {
      const MethodResult* m = find_method(*arm, method);
      if (m == nullptr) continue;
      if (const std::optional<double> v = family_metric(family, *m)) {
        metric.push_back(*v);
      }
      if (!m->verdicts.empty()) {
        ++s.verdict_counts[to_string(m->verdicts.front())];
      }
    }
    if (!metric.empty()) {
      s.metric.count = static_cast<int>(metric.size());
      double sum = 0.0;
      for (const double v : metric) sum += v;
      s.metric.mean = sum / static_cast<double>(metric.size());
      s.metric.median = quantile(metric, 0.5);
      s.metric.q25 = quantile(metric, 0.25);
      s.metric.q75 = quantile(metric, 0.75);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::A: return "A";
    case Family::B: return "B";
    case Family::C: return "C";
    case Family::D: return "D";
    case Family::E: return "E";
    case Family::F: return "F";
    case Family::G: return "G";
  }
  throw InvalidParam("unknown family");
}

Family family_from_string(const std::string& name) {
  if (name.size() == 1) {
    const char c = static_cast<char>(std::toupper(name[0]));
    if (c >= 'A' && c <= 'G') return static_cast<Family>(c - 'A');
  }
  throw InvalidParam("family must be one of A..G, got '" + name + "'");
}

std::vector<double> shift_sigma_ay_grid(bool paper_literal_grid) {
  if (paper_literal_grid) {
    // The published list has 8 values for 9 environments; the final
    // environment reuses 0.8.
    return {-0.8, -0.6, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8, 0.8};
  }
  return {-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8};
}

std::vector<double> shift_sigma_aa_grid() {
  return {1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0};
}

std::vector<double> shift_sigma_yy_grid(Family family) {
  if (family == Family::G) {
    return {1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0};
  }
  return std::vector<double>(kShiftEnvironments, 1.0);
}

ExperimentSummary summarize(Family family,
                            const std::vector<ReplicationResult>& results) {
  if (results.empty()) {
    throw EmptyResults("no replications to summarize");
  }
  ExperimentSummary summary;
  summary.family = family;
  summary.replications = static_cast<int>(results.size());

  std::vector<const std::vector<MethodResult>*> main_arms;
  std::vector<const std::vector<MethodResult>*> mispec_arms;
  for (const ReplicationResult& r : results) {
    if (r.failed) {
      ++summary.failures;
      summary.failure_messages.push_back(
          "replication " + std::to_string(r.replication_index) + ": " + r.error);
      continue;
    }
    main_arms.push_back(&r.methods);
    if (!r.mispec_methods.empty()) mispec_arms.push_back(&r.mispec_methods);
  }
  if (main_arms.empty()) {
    throw EmptyResults("every replication failed");
  }
  summary.per_method = summarize_arm(family, main_arms);
  if (!mispec_arms.empty()) {
    summary.mispec_per_method = summarize_arm(family, mispec_arms);
  }

  int comparable = 0;
  int ca_wins = 0;
  for (const auto* arm : main_arms) {
    const MethodResult* ca =
        find_method(*arm, AdjustMethod::linear_causality_aware);
    const MethodResult* res =
        find_method(*arm, AdjustMethod::linear_residualize);
    if (ca == nullptr || res == nullptr) continue;
    const std::optional<double> mc = family_metric(family, *ca);
    const std::optional<double> mr = family_metric(family, *res);
    if (!mc || !mr) continue;
    ++comparable;
    const bool win = is_classification(family) ? (*mc >= *mr) : (*mc <= *mr);
    if (win) ++ca_wins;
  }
  if (comparable > 0) {
    summary.win_rate =
        static_cast<double>(ca_wins) / static_cast<double>(comparable);
  }

  int add_comparable = 0;
  int add_wins = 0;
  for (const auto* arm : mispec_arms) {
    const MethodResult* add =
        find_method(*arm, AdjustMethod::additive_causality_aware);
    const MethodResult* lin =
        find_method(*arm, AdjustMethod::linear_causality_aware);
    if (add == nullptr || lin == nullptr || !add->mse || !lin->mse) continue;
    ++add_comparable;
    if (*add->mse <= *lin->mse) ++add_wins;
  }
  if (add_comparable > 0) {
    summary.additive_vs_linear_win_rate =
        static_cast<double>(add_wins) / static_cast<double>(add_comparable);
  }
  return summary;
}

std::string summary_to_json(const ExperimentConfig& config,
                            const ExperimentSummary& summary) {
  json root;
  root["family"] = to_string(summary.family);
  root["replications"] = summary.replications;
  root["n_train"] = config.n_train;
  root["n_test"] = config.n_test;
  root["master_seed"] = config.master_seed;
  root["alpha"] = config.alpha;
  json methods = json::array();
  for (const AdjustMethod m : config.adjustment_methods.empty()
                                  ? resolve_methods(config)
                                  : config.adjustment_methods) {
    methods.push_back(to_string(m));
  }
  root["methods"] = methods;
  root["metric"] = is_classification(summary.family)  ? "accuracy"
                   : is_shift(summary.family)         ? "stability_error"
                                                      : "mse";
  root["failures"] = summary.failures;
  root["failure_messages"] = summary.failure_messages;

  const auto arm_json = [](const std::vector<MethodSummary>& arm) {
    json out;
    for (const MethodSummary& s : arm) {
      json m;
      m["count"] = s.metric.count;
      m["mean"] = s.metric.mean;
      m["median"] = s.metric.median;
      m["q25"] = s.metric.q25;
      m["q75"] = s.metric.q75;
      if (!s.verdict_counts.empty()) {
        m["verdicts"] = s.verdict_counts;
      }
      out[to_string(s.method)] = m;
    }
    return out;
  };
  root["main"] = arm_json(summary.per_method);
  if (!summary.mispec_per_method.empty()) {
    root["mispecified"] = arm_json(summary.mispec_per_method);
  }
  if (summary.win_rate) root["win_rate"] = *summary.win_rate;
  if (summary.additive_vs_linear_win_rate) {
    root["additive_vs_linear_win_rate"] = *summary.additive_vs_linear_win_rate;
  }
  if (is_shift(summary.family)) {
    root["grid"] = {{"sigma_ay", shift_sigma_ay_grid(config.paper_literal_grid)},
                    {"sigma_aa", shift_sigma_aa_grid()},
                    {"sigma_yy", shift_sigma_yy_grid(summary.family)}};
  }
  return root.dump(2) + "\n";
}

namespace {

void write_plotdata(const std::filesystem::path& dir,
                    const ExperimentConfig& cfg,
                    const std::vector<ReplicationResult>& results) {
  const Family family = cfg.family;
  std::ofstream metric_out;
  if (is_classification(family)) {
    metric_out.open(dir / "plotdata_accuracy.csv");
    metric_out << "replication,method,accuracy\n";
  } else if (!is_shift(family)) {
    metric_out.open(dir / "plotdata_mse.csv");
    metric_out << "replication,arm,method,mse\n";
  }
  metric_out << std::setprecision(17);

  std::ofstream cov_out;
  if (!is_shift(family)) {
    cov_out.open(dir / "plotdata_covariance.csv");
    cov_out << "replication,arm,method,feature,cov_xhat_y\n";
    cov_out << std::setprecision(17);
  }

  std::ofstream cor_out;
  std::ofstream verdict_out;
  if (family == Family::E) {
    cor_out.open(dir / "plotdata_correlations.csv");
    cor_out << "replication,arm,method,confounder,relation,r,p\n";
    cor_out << std::setprecision(17);
    verdict_out.open(dir / "plotdata_verdicts.csv");
    verdict_out << "replication,arm,method,confounder,verdict\n";
  }

  std::ofstream env_out;
  std::ofstream stab_out;
  if (is_shift(family)) {
    env_out.open(dir / "plotdata_env_mse.csv");
    env_out << "replication,method,environment,sigma_ay,sigma_aa,sigma_yy,mse\n";
    env_out << std::setprecision(17);
    stab_out.open(dir / "plotdata_stability.csv");
    stab_out << "replication,method,stability_error\n";
    stab_out << std::setprecision(17);
  }
  const std::vector<double> ay = shift_sigma_ay_grid(cfg.paper_literal_grid);
  const std::vector<double> aa = shift_sigma_aa_grid();
  const std::vector<double> yy = shift_sigma_yy_grid(family);

  for (const ReplicationResult& r : results) {
    if (r.failed) continue;
    const auto arm_rows = [&](const std::string& arm,
                              const std::vector<MethodResult>& methods) {
      for (const MethodResult& m : methods) {
        const std::string name = to_string(m.method);
        if (m.accuracy && metric_out.is_open() && is_classification(family)) {
          metric_out << r.replication_index << ',' << name << ','
                     << *m.accuracy << '\n';
        } else if (m.mse && metric_out.is_open()) {
          metric_out << r.replication_index << ',' << arm << ',' << name << ','
                     << *m.mse << '\n';
        }
        if (cov_out.is_open()) {
          for (Index j = 0; j < m.cov_xhat_y.size(); ++j) {
            cov_out << r.replication_index << ',' << arm << ',' << name << ','
                    << j << ',' << m.cov_xhat_y[j] << '\n';
          }
        }
        if (m.diagnostics && cor_out.is_open()) {
          const auto& pcs = m.diagnostics->per_confounder;
          for (std::size_t j = 0; j < pcs.size(); ++j) {
            const ConfounderPattern& p = pcs[j];
            const std::pair<const char*, const CorrelationTest*> tests[] = {
                {"yhat_y", &p.yhat_y},
                {"yhat_a", &p.yhat_a},
                {"a_y", &p.a_y},
                {"yhat_y_given_a", &p.yhat_y_given_a},
                {"yhat_a_given_y", &p.yhat_a_given_y},
                {"a_y_given_yhat", &p.a_y_given_yhat}};
            for (const auto& [rel, t] : tests) {
              cor_out << r.replication_index << ',' << arm << ',' << name
                      << ',' << j << ',' << rel << ',' << t->r << ','
                      << t->p_value << '\n';
            }
          }
        }
        if (verdict_out.is_open()) {
          for (std::size_t j = 0; j < m.verdicts.size(); ++j) {
            verdict_out << r.replication_index << ',' << arm << ',' << name
                        << ',' << j << ',' << to_string(m.verdicts[j]) << '\n';
          }
        }
        if (env_out.is_open()) {
          for (std::size_t e = 0; e < m.env_mse.size(); ++e) {
            env_out << r.replication_index << ',' << name << ',' << e << ','
                    << ay[e] << ',' << aa[e] << ',' << yy[e] << ','
                    << m.env_mse[e] << '\n';
          }
        }
        if (m.stability_error && stab_out.is_open()) {
          stab_out << r.replication_index << ',' << name << ','
                   << *m.stability_error << '\n';
        }
      }
    };
    arm_rows("main", r.methods);
    arm_rows("mispecified", r.mispec_methods);
  }
}

void persist(const ExperimentConfig& cfg, const FamilyRun& run) {
  const std::filesystem::path dir =
      cfg.output_dir / ("family_" + to_string(cfg.family));
  std::filesystem::create_directories(dir);
  for (const ReplicationResult& r : run.replications) {
    std::ostringstream name;
    name << "replication_" << std::setw(4) << std::setfill('0')
         << r.replication_index << ".csv";
    write_replication_csv(dir / name.str(), r);
  }
  std::ofstream summary_out(dir / "summary.json");
  summary_out << summary_to_json(cfg, run.summary);
  write_plotdata(dir, cfg, run.replications);
}

}  // namespace

FamilyRun run_family(const ExperimentConfig& config) {
  validate_config(config);
  const std::vector<AdjustMethod> methods = resolve_methods(config);

  std::vector<ReplicationResult> results(
      static_cast<std::size_t>(config.replications));
  if (config.parallel) {
#ifdef _OPENMP
    const int n_threads =
        config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
    for (int rep = 0; rep < config.replications; ++rep) {
      results[static_cast<std::size_t>(rep)] =
          run_one_replication(config, methods, rep);
    }
#else
    for (int rep = 0; rep < config.replications; ++rep) {
      results[static_cast<std::size_t>(rep)] =
          run_one_replication(config, methods, rep);
    }
#endif
  } else {
    for (int rep = 0; rep < config.replications; ++rep) {
      results[static_cast<std::size_t>(rep)] =
          run_one_replication(config, methods, rep);
    }
  }

  FamilyRun run;
  run.summary = summarize(config.family, results);
  run.replications = std::move(results);
  if (!config.output_dir.empty()) {
    persist(config, run);
  }
  return run;
}

}  // namespace deconfound
