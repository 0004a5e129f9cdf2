#include "deconfound/scm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deconfound/core_linalg.hpp"

namespace deconfound {

namespace {

void check_rows(Index n) {
  if (n < 100)
    throw InsufficientRows("generator: need n >= 100, got " +
                           std::to_string(n));
}

void validate(const ScmRegressionParams& p) {
  if (!(std::abs(p.rho_a) < 1.0 && std::abs(p.rho_x) < 1.0))
    throw InvalidParam("regression params: |rho| must be < 1");
  if (!(p.sigma2_y > 0.0))
    throw InvalidParam("regression params: sigma2_y must be positive");
}

void validate(const ScmClassificationParams& p) {
  if (!(std::abs(p.rho_x) < 1.0))
    throw InvalidParam("classification params: |rho_x| must be < 1");
  double sum = 0.0;
  for (const double c : p.p_cell) {
    if (c < 0.0) throw InvalidParam("classification params: negative cell");
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw InvalidParam("classification params: cells must sum to 1");
}

// Lower Cholesky factor of a 2x2 covariance.
Eigen::Matrix2d chol2(const Eigen::Matrix2d& cov) {
  if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 || !(cov(0, 0) > 0.0) ||
      !(cov(1, 1) > 0.0) || !(cov.determinant() > 0.0))
    throw NotPositiveDefinite("2x2 covariance is not symmetric positive definite");
  Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
  l(0, 0) = std::sqrt(cov(0, 0));
  l(1, 0) = cov(1, 0) / l(0, 0);
  l(1, 1) = std::sqrt(cov(1, 1) - l(1, 0) * l(1, 0));
  return l;
}

Dataset gen_regression_raw(const ScmRegressionParams& p, Index n,
                           RngStream& rng, Split split) {
  validate(p);
  check_rows(n);
  const double a_mix = std::sqrt(1.0 - p.rho_a * p.rho_a);
  const double x_mix = std::sqrt(1.0 - p.rho_x * p.rho_x);
  const double sd_y = std::sqrt(p.sigma2_y);
  Dataset d;
  d.x.resize(n, 2);
  d.a.resize(n, 2);
  d.y.resize(n);
  d.split = split;
  for (Index i = 0; i < n; ++i) {
    const double wa1 = rng.normal();
    const double wa2 = p.rho_a * wa1 + a_mix * rng.normal();
    const double a1 = p.mu_a[0] + wa1;
    const double a2 = p.mu_a[1] + wa2;
    const double wy = sd_y * rng.normal();
    // Mispecified arm squares the confounders in Y and both the confounders
    // and the outcome in X, while all adjustment models stay linear.
    const double t1 = p.mispecified ? a1 * a1 : a1;
    const double t2 = p.mispecified ? a2 * a2 : a2;
    const double y = p.mu_y + p.beta_ya[0] * t1 + p.beta_ya[1] * t2 + wy;
    const double ty = p.mispecified ? y * y : y;
    const double wx1 = rng.normal();
    const double wx2 = p.rho_x * wx1 + x_mix * rng.normal();
    d.x(i, 0) = p.mu_x[0] + p.beta_xa(0, 0) * t1 + p.beta_xa(0, 1) * t2 +
                p.beta_xy[0] * ty + wx1;
    d.x(i, 1) = p.mu_x[1] + p.beta_xa(1, 0) * t1 + p.beta_xa(1, 1) * t2 +
                p.beta_xy[1] * ty + wx2;
    d.a(i, 0) = a1;
    d.a(i, 1) = a2;
    d.y[i] = y;
  }
  return d;
}

Dataset gen_classification_raw(const ScmClassificationParams& p, Index n,
                               RngStream& rng, Split split) {
  validate(p);
  check_rows(n);
  const double c1 = p.p_cell[0];
  const double c2 = c1 + p.p_cell[1];
  const double c3 = c2 + p.p_cell[2];
  const double x_mix = std::sqrt(1.0 - p.rho_x * p.rho_x);
  Dataset d;
  d.x.resize(n, 2);
  d.a.resize(n, 2);
  d.y.resize(n);
  d.split = split;
  d.binary_y = true;
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double a1 = (u < c2) ? 1.0 : 0.0;
    const double a2 = (u < c1 || (u >= c2 && u < c3)) ? 1.0 : 0.0;
    const double eta = p.mu_y + p.beta_ya[0] * a1 + p.beta_ya[1] * a2;
    const double y = (rng.uniform() < 1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0;
    const double wx1 = rng.normal();
    const double wx2 = p.rho_x * wx1 + x_mix * rng.normal();
    if (p.mispecified) {
      d.x(i, 0) = p.mu_x[0] + p.beta_xya(0, 0) * y * a1 +
                  p.beta_xya(0, 1) * y * a2 + wx1;
      d.x(i, 1) = p.mu_x[1] + p.beta_xya(1, 0) * y * a1 +
                  p.beta_xya(1, 1) * y * a2 + wx2;
    } else {
      d.x(i, 0) = p.mu_x[0] + p.beta_xa(0, 0) * a1 + p.beta_xa(0, 1) * a2 +
                  p.beta_xy[0] * y + wx1;
      d.x(i, 1) = p.mu_x[1] + p.beta_xa(1, 0) * a1 + p.beta_xa(1, 1) * a2 +
                  p.beta_xy[1] * y + wx2;
    }
    d.a(i, 0) = a1;
    d.a(i, 1) = a2;
    d.y[i] = y;
  }
  return d;
}

// Standardize x, a (and, unless the outcome is binary, y) on the rows of the
// given datasets taken together, writing the rescaled values back.
void standardize_joint(std::vector<Dataset*> parts) {
  Index total = 0;
  for (const Dataset* d : parts) total += d->rows();
  const Index p = parts.front()->x.cols(), k = parts.front()->a.cols();
  const bool scale_y = !parts.front()->binary_y;
  Matrix pooled(total, p + k + (scale_y ? 1 : 0));
  Index at = 0;
  for (const Dataset* d : parts) {
    pooled.block(at, 0, d->rows(), p) = d->x;
    pooled.block(at, p, d->rows(), k) = d->a;
    if (scale_y) pooled.block(at, p + k, d->rows(), 1) = d->y;
    at += d->rows();
  }
  pooled = standardize(pooled).first;
  at = 0;
  for (Dataset* d : parts) {
    d->x = pooled.block(at, 0, d->rows(), p);
    d->a = pooled.block(at, p, d->rows(), k);
    if (scale_y) d->y = pooled.block(at, p + k, d->rows(), 1);
    d->standardized = true;
    at += d->rows();
  }
}

}  // namespace

ScmRegressionParams sample_regression_params(RngStream& rng, bool mispecified) {
  ScmRegressionParams p;
  p.mu_a << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
  p.mu_y = rng.uniform(-3.0, 3.0);
  p.mu_x << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
  p.beta_ya << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.beta_xy << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.beta_xa << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0),
      rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.sigma2_y = rng.uniform(1.0, 3.0);
  p.rho_a = rng.uniform(-0.8, 0.8);
  p.rho_x = rng.uniform(-0.8, 0.8);
  p.mispecified = mispecified;
  return p;
}

ScmClassificationParams sample_classification_params(RngStream& rng,
                                                     bool mispecified) {
  ScmClassificationParams p;
  p.mu_y = rng.uniform(-3.0, 3.0);
  p.mu_x << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
  p.beta_ya << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.beta_xy << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.beta_xa << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0),
      rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  p.beta_xya << rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0),
      rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0);
  std::array<double, 3> cuts{rng.uniform(), rng.uniform(), rng.uniform()};
  std::sort(cuts.begin(), cuts.end());
  p.p_cell = {cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], 1.0 - cuts[2]};
  // Nudge the largest cell so the cells sum to exactly 1.0.
  for (int pass = 0; pass < 4; ++pass) {
    const double s =
        ((p.p_cell[0] + p.p_cell[1]) + p.p_cell[2]) + p.p_cell[3];
    if (s == 1.0) break;
    *std::max_element(p.p_cell.begin(), p.p_cell.end()) += 1.0 - s;
  }
  p.rho_x = rng.uniform(-0.8, 0.8);
  p.mispecified = mispecified;
  return p;
}

Dataset gen_regression(const ScmRegressionParams& params, Index n,
                       RngStream& rng) {
  Dataset d = gen_regression_raw(params, n, rng, Split::train);
  standardize_joint({&d});
  return d;
}

Dataset gen_classification(const ScmClassificationParams& params, Index n,
                           RngStream& rng) {
  Dataset d = gen_classification_raw(params, n, rng, Split::train);
  standardize_joint({&d});
  return d;
}

std::pair<Dataset, Dataset> gen_regression_pair(
    const ScmRegressionParams& params, Index n_train, Index n_test,
    RngStream& train_rng, RngStream& test_rng) {
  Dataset train = gen_regression_raw(params, n_train, train_rng, Split::train);
  Dataset test = gen_regression_raw(params, n_test, test_rng, Split::test);
  standardize_joint({&train, &test});
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> gen_classification_pair(
    const ScmClassificationParams& params, Index n_train, Index n_test,
    RngStream& train_rng, RngStream& test_rng) {
  Dataset train =
      gen_classification_raw(params, n_train, train_rng, Split::train);
  Dataset test =
      gen_classification_raw(params, n_test, test_rng, Split::test);
  standardize_joint({&train, &test});
  return {std::move(train), std::move(test)};
}

Dataset gen_shift_data(const ShiftScmParams& params, int environment, Index n,
                       RngStream& rng) {
  if (environment < 0 ||
      environment > static_cast<int>(params.test_covs.size()))
    throw InvalidParam("gen_shift_data: environment " +
                       std::to_string(environment) + " out of range");
  if (!(params.sigma2_x > 0.0))
    throw InvalidParam("gen_shift_data: sigma2_x must be positive");
  check_rows(n);
  const Eigen::Matrix2d cov = environment == 0
                                  ? params.train_cov
                                  : params.test_covs[environment - 1];
  const Eigen::Matrix2d l = chol2(cov);
  const double sd_x = std::sqrt(params.sigma2_x);
  Dataset d;
  d.x.resize(n, 1);
  d.a.resize(n, 1);
  d.y.resize(n);
  d.split = environment == 0 ? Split::train : Split::test;
  for (Index i = 0; i < n; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    const double a = l(0, 0) * z1;
    const double y = l(1, 0) * z1 + l(1, 1) * z2;
    d.a(i, 0) = a;
    d.y[i] = y;
    d.x(i, 0) = params.beta_xa * a + params.beta_xy * y + sd_x * rng.normal();
  }
  return d;
}

}  // namespace deconfound
