#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "deconfound/adjust.hpp"
#include "deconfound/learners.hpp"
#include "support/anticausal_scm.hpp"
#include "support/scm_oracle.hpp"

using namespace deconfound;
using namespace deconfound::testing;

namespace {

Matrix pooled_x(const AdjustedPair& pair) {
  Matrix out(pair.train.rows() + pair.test.rows(), pair.train.x.cols());
  out.topRows(pair.train.rows()) = pair.train.x;
  out.bottomRows(pair.test.rows()) = pair.test.x;
  return out;
}

Vector pooled_y(const Dataset& train, const Dataset& test) {
  Vector out(train.rows() + test.rows());
  out.head(train.rows()) = train.y;
  out.tail(test.rows()) = test.y;
  return out;
}

double rms(const Matrix& m) {
  return std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
}

}  // namespace

TEST_CASE("method names round-trip") {
  const std::vector<AdjustMethod> all = {
      AdjustMethod::linear_residualize, AdjustMethod::linear_causality_aware,
      AdjustMethod::additive_residualize,
      AdjustMethod::additive_causality_aware};
  for (AdjustMethod m : all) CHECK(adjust_method_from_string(to_string(m)) == m);
  CHECK(to_string(AdjustMethod::linear_residualize) == "linear-res");
  CHECK(to_string(AdjustMethod::additive_causality_aware) == "additive-ca");
  CHECK_THROWS_AS(adjust_method_from_string("ridge"), InvalidParam);
}

TEST_CASE("no confounding means both adjustments barely touch the features") {
  // theta = phi = 0: the fitted confounder coefficients are pure noise of
  // order 1/sqrt(n), so adjusted minus raw features should be tiny.
  const auto scm = AnticausalScm::standardized_single(0.5, 0.0, 0.0);
  RngStream tr(7, 0, substream::kTrain), ts(7, 0, substream::test_env(1));
  auto [train, test] = draw_anticausal_pair(scm, 50000, 50000, tr, ts);

  const AdjustedPair res = residualize(train, test);
  CHECK(rms(res.train.x - train.x) < 0.02);
  CHECK(rms(res.test.x - test.x) < 0.02);

  const AdjustedPair ca = causality_aware(train, test);
  CHECK(rms(ca.train.x - train.x) < 0.02);
  CHECK(rms(ca.test.x - test.x) < 0.02);
}

TEST_CASE("pooled residuals are exactly uncorrelated with every confounder") {
  RngStream prng(11, 0, substream::kParams);
  const ScmRegressionParams params = sample_regression_params(prng);
  RngStream tr(11, 0, substream::kTrain), ts(11, 0, substream::test_env(1));
  auto [train, test] = gen_regression_pair(params, 3000, 2000, tr, ts);

  const AdjustedPair res = residualize(train, test);
  CHECK(res.method == AdjustMethod::linear_residualize);
  CHECK(res.linear_fit.has_value());
  CHECK(res.additive_fits.empty());
  CHECK(res.train.rows() == train.rows());
  CHECK(res.test.rows() == test.rows());
  CHECK((res.train.a.array() == train.a.array()).all());
  CHECK((res.train.y.array() == train.y.array()).all());
  CHECK(res.test.split == Split::test);

  const Matrix x = pooled_x(res);
  Matrix a(train.rows() + test.rows(), train.a.cols());
  a.topRows(train.rows()) = train.a;
  a.bottomRows(test.rows()) = test.a;
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < a.cols(); ++i)
      CHECK(std::abs(correlation(x.col(j), a.col(i))) < 1e-8);
}

TEST_CASE("chain covariance oracles: 0.42 residualized vs 0.50 causality-aware") {
  // Standardized chain with gamma_xy = 0.5, gamma_xa = 0.3, gamma_ya = 0.4.
  // Population values: Cov(X_r, Y) = 0.5 * (1 - 0.4^2) = 0.42 and
  // Cov(X_c, Y) = 0.5 on either split.
  const auto scm = AnticausalScm::standardized_single(0.5, 0.3, 0.4);
  RngStream tr(21, 0, substream::kTrain), ts(21, 0, substream::test_env(1));
  auto [train, test] = draw_anticausal_pair(scm, 500000, 500000, tr, ts);

  const AdjustedPair res = residualize(train, test);
  const double cov_r =
      cov_with(pooled_x(res).col(0), pooled_y(train, test));
  CHECK(std::abs(cov_r - 0.42) < 0.005);

  const AdjustedPair ca = causality_aware(train, test);
  CHECK(std::abs(cov_with(ca.train.x.col(0), train.y) - 0.50) < 0.005);
  CHECK(std::abs(cov_with(ca.test.x.col(0), test.y) - 0.50) < 0.005);
}

TEST_CASE("causality-aware training rows satisfy the subtraction identity") {
  // Adding the outcome component to the fit residuals must equal removing the
  // intercept and confounder components from the raw features.
  RngStream prng(31, 0, substream::kParams);
  const ScmRegressionParams params = sample_regression_params(prng);
  RngStream tr(31, 0, substream::kTrain), ts(31, 0, substream::test_env(1));
  auto [train, test] = gen_regression_pair(params, 4000, 1000, tr, ts);

  const AdjustedPair ca = causality_aware(train, test);
  const Index k = train.a.cols();
  const Matrix gamma_xa = ca.linear_fit->coefficients.topRows(k);
  const Matrix direct =
      train.x - ((train.a * gamma_xa).rowwise() + ca.linear_fit->intercept);
  CHECK((ca.train.x - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("causality-aware adjustment never reads the test outcome") {
  RngStream prng(41, 0, substream::kParams);
  const ScmRegressionParams params = sample_regression_params(prng);
  RngStream tr(41, 0, substream::kTrain), ts(41, 0, substream::test_env(1));
  auto [train, test] = gen_regression_pair(params, 600, 400, tr, ts);

  Dataset poisoned = test;
  poisoned.y.setConstant(123.0);

  const AdjustedPair a = causality_aware(train, test);
  const AdjustedPair b = causality_aware(train, poisoned);
  CHECK((a.test.x.array() == b.test.x.array()).all());
  CHECK((a.train.x.array() == b.train.x.array()).all());

  const AdjustedPair c = additive_causality_aware(train, test);
  const AdjustedPair d = additive_causality_aware(train, poisoned);
  CHECK((c.test.x.array() == d.test.x.array()).all());
}

TEST_CASE("additive adjustments agree with the linear ones on linear data") {
  // On a linear chain the spline components can only add smoothing noise, so
  // the covariance with the outcome and the downstream error must match the
  // linear adjustment closely.
  const auto scm = AnticausalScm::standardized_single(0.5, 0.3, 0.4);
  RngStream tr(51, 0, substream::kTrain), ts(51, 0, substream::test_env(1));
  auto [train, test] = draw_anticausal_pair(scm, 5000, 5000, tr, ts);

  const Vector y_all = pooled_y(train, test);

  const AdjustedPair lin_res = residualize(train, test);
  const AdjustedPair add_res = additive_residualize(train, test);
  CHECK(add_res.additive_fits.size() == 1);
  CHECK(std::abs(cov_with(pooled_x(add_res).col(0), y_all) -
                 cov_with(pooled_x(lin_res).col(0), y_all)) < 1e-3);
  CHECK(rms(pooled_x(add_res) - pooled_x(lin_res)) < 0.05);

  const AdjustedPair lin_ca = causality_aware(train, test);
  const AdjustedPair add_ca = additive_causality_aware(train, test);
  CHECK(std::abs(cov_with(add_ca.test.x.col(0), test.y) -
                 cov_with(lin_ca.test.x.col(0), test.y)) < 1e-3);
  CHECK(rms(add_ca.test.x - lin_ca.test.x) < 0.05);

  for (const AdjustedPair* pair : {&lin_res, &add_res, &lin_ca, &add_ca}) {
    const TrainedModel model = fit_linear(pair->train.x, pair->train.y);
    const double mse = *evaluate(model, pair->test).mse;
    CHECK(mse > 0.0);
    CHECK(mse < 1.0);
  }
  const double mse_lin =
      *evaluate(fit_linear(lin_res.train.x, train.y), lin_res.test).mse;
  const double mse_add =
      *evaluate(fit_linear(add_res.train.x, train.y), add_res.test).mse;
  CHECK(std::abs(mse_add - mse_lin) < 1e-3);
}

TEST_CASE("additive residualization removes curved confounding") {
  // X depends on the square of the confounder; a linear pooled regression
  // cannot strip that component but the spline one can.
  RngStream rng(61, 0, substream::kTrain);
  const Index n = 10000;
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    const Index half = n / 2;
    d->x.resize(half, 1);
    d->a.resize(half, 1);
    d->y.resize(half);
    for (Index i = 0; i < half; ++i) {
      const double a = rng.normal();
      const double y = 0.4 * a + rng.normal();
      d->a(i, 0) = a;
      d->y[i] = y;
      d->x(i, 0) = 0.7 * a * a + 0.5 * y + 0.5 * rng.normal();
    }
  }
  train.split = Split::train;
  test.split = Split::test;

  Vector a_sq(n);
  a_sq.head(n / 2) = train.a.col(0).array().square();
  a_sq.tail(n / 2) = test.a.col(0).array().square();

  const AdjustedPair lin = residualize(train, test);
  const AdjustedPair add = additive_residualize(train, test);
  const double cor_lin = std::abs(correlation(pooled_x(lin).col(0), a_sq));
  const double cor_add = std::abs(correlation(pooled_x(add).col(0), a_sq));
  CHECK(cor_lin > 0.2);
  CHECK(cor_add < 0.05);
}

TEST_CASE("additive causality-aware tracks the oracle on curved generators") {
  // Generators with squared confounder and outcome terms. The oracle subtracts
  // the TRUE confounder components (population moments from an independent
  // 2e5-row draw of the raw equations); the spline adjustment should land
  // within a hair of it, while the linear adjustment can only remove the
  // linear projection of the curved components and stays far away.
  for (int rep = 0; rep < 6; ++rep) {
    RngStream prng(71, rep, substream::kParams);
    const ScmRegressionParams params =
        sample_regression_params(prng, /*mispecified=*/true);
    RngStream tr(71, rep, substream::kTrainMispec);
    RngStream ts(71, rep, substream::kTestMispec);
    auto [train, test] = gen_regression_pair(params, 4000, 4000, tr, ts);
    RngStream pop(999, rep, 5);
    const RegressionOracle oracle(params, 200000, pop);
    const Dataset oracle_test = oracle.adjust(test);

    const AdjustedPair lin = causality_aware(train, test);
    const AdjustedPair add = additive_causality_aware(train, test);
    auto centered_rms = [](Vector v) {
      v.array() -= v.mean();
      return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
    };
    for (int j = 0; j < 2; ++j) {
      // Adjustments differ from the oracle by constants; compare centered.
      const double rms_add =
          centered_rms(add.test.x.col(j) - oracle_test.x.col(j));
      const double rms_lin =
          centered_rms(lin.test.x.col(j) - oracle_test.x.col(j));
      CHECK(rms_add < 0.05);        // observed 0.002-0.010 on sd ~ 1 features
      CHECK(rms_lin > 0.1);         // observed 0.23-0.69
      CHECK(rms_lin > 10 * rms_add);
    }
  }
}

TEST_CASE("svd reparameterization leaves both adjustments unchanged") {
  for (double rho : {0.0, 0.6}) {
    RngStream prng(81, 0, substream::kParams);
    ScmRegressionParams params = sample_regression_params(prng);
    params.rho_a = rho;
    RngStream tr(81, 0, substream::kTrain), ts(81, 0, substream::test_env(1));
    auto [train, test] = gen_regression_pair(params, 2000, 1000, tr, ts);

    auto [train_s, test_s] = svd_reparameterize(train, test);
    CHECK(train_s.a.cols() == train.a.cols());

    Matrix pooled(train.rows() + test.rows(), train_s.a.cols());
    pooled.topRows(train.rows()) = train_s.a;
    pooled.bottomRows(test.rows()) = test_s.a;
    const Matrix cov = sample_covariance(pooled);
    CHECK((cov - Matrix::Identity(cov.rows(), cov.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-8);

    const AdjustedPair res_a = residualize(train, test);
    const AdjustedPair res_b = residualize(train_s, test_s);
    CHECK((res_a.train.x - res_b.train.x).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((res_a.test.x - res_b.test.x).cwiseAbs().maxCoeff() < 1e-8);

    const AdjustedPair ca_a = causality_aware(train, test);
    const AdjustedPair ca_b = causality_aware(train_s, test_s);
    CHECK((ca_a.train.x - ca_b.train.x).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ca_a.test.x - ca_b.test.x).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("covariance advantage holds across random generators") {
  // For every feature of every correct-model draw, the causality-aware
  // features must carry at least as much outcome covariance (in absolute
  // value) as the residualized ones, up to sampling noise.
  for (int rep = 0; rep < 10; ++rep) {
    RngStream prng(91, rep, substream::kParams);
    const ScmRegressionParams params = sample_regression_params(prng);
    RngStream tr(91, rep, substream::kTrain);
    RngStream ts(91, rep, substream::test_env(1));
    auto [train, test] = gen_regression_pair(params, 50000, 50000, tr, ts);

    const AdjustedPair res = residualize(train, test);
    const AdjustedPair ca = causality_aware(train, test);
    const Vector y_all = pooled_y(train, test);
    const Matrix xr = pooled_x(res), xc = pooled_x(ca);
    for (Index j = 0; j < xr.cols(); ++j) {
      const double cr = std::abs(cov_with(xr.col(j), y_all));
      const double cc = std::abs(cov_with(xc.col(j), y_all));
      CHECK(cc >= cr - 0.01);
    }
  }
}

TEST_CASE("train/test shape mismatches are rejected") {
  const auto scm = AnticausalScm::standardized_single(0.5, 0.3, 0.4);
  RngStream tr(101, 0, substream::kTrain), ts(101, 0, substream::test_env(1));
  auto [train, test] = draw_anticausal_pair(scm, 300, 200, tr, ts);
  Dataset extra = test;
  extra.a = Matrix::Zero(test.rows(), 2);
  CHECK_THROWS_AS(residualize(train, extra), DimensionMismatch);
  CHECK_THROWS_AS(causality_aware(train, extra), DimensionMismatch);
  CHECK_THROWS_AS(additive_residualize(train, extra), DimensionMismatch);
  CHECK_THROWS_AS(additive_causality_aware(train, extra), DimensionMismatch);
}
