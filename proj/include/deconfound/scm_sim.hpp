#pragma once

#include <array>
#include <utility>
#include <vector>

#include "deconfound/errors.hpp"
#include "deconfound/rng.hpp"
#include "deconfound/types.hpp"

namespace deconfound {

// Parameters of the regression structural causal model: two correlated
// confounders A, an outcome Y <- A, and two features X <- (A, Y). The
// mispecified variant squares A in the Y and X equations and Y in the X
// equation while the adjustment models stay linear.
struct ScmRegressionParams {
  Eigen::Vector2d mu_a;
  double mu_y = 0.0;
  Eigen::Vector2d mu_x;
  Eigen::Vector2d beta_ya;
  Eigen::Vector2d beta_xy;
  Eigen::Matrix2d beta_xa;  // (j, i) = effect of confounder i on feature j
  double sigma2_y = 1.0;
  double rho_a = 0.0;
  double rho_x = 0.0;
  bool mispecified = false;
};

// Classification variant: binary confounders from a bivariate Bernoulli with
// cell probabilities (p11, p10, p01, p00), binary Y from a logistic model,
// continuous features. The mispecified variant generates features from pure
// Y*A interactions.
struct ScmClassificationParams {
  double mu_y = 0.0;
  Eigen::Vector2d mu_x;
  Eigen::Vector2d beta_ya;
  Eigen::Vector2d beta_xy;
  Eigen::Matrix2d beta_xa;
  Eigen::Matrix2d beta_xya;  // interaction coefficients (mispecified variant)
  std::array<double, 4> p_cell{};  // P(A1,A2) = (1,1), (1,0), (0,1), (0,0)
  double rho_x = 0.0;
  bool mispecified = false;
};

// Single-feature toy model for the dataset-shift stability experiment:
// X = beta_xa * A + beta_xy * Y + U_X with a per-environment joint normal
// covariance for (A, Y). Environment 0 is the training distribution and
// 1..test_covs.size() index the test environments.
struct ShiftScmParams {
  double beta_xy = 0.0;
  double beta_xa = 0.0;
  double sigma2_x = 1.0;
  Eigen::Matrix2d train_cov;              // Cov of (A, Y), in that order
  std::vector<Eigen::Matrix2d> test_covs;
};

enum class Split { train, test };

struct Dataset {
  Matrix x;  // n x p features
  Matrix a;  // n x k confounders
  Vector y;  // real outcome, or exact 0/1 for classification
  Split split = Split::train;
  bool standardized = false;
  bool binary_y = false;

  Index rows() const { return y.size(); }
};

// Parameter samplers; ranges follow the simulation protocols (intercepts
// U(-3,3), coefficients and sigma2_y U(1,3), correlations U(-0.8,0.8), cell
// probabilities by randomly splitting (0,1) into four pieces). The draw order
// is fixed, so correct and mispecified arms of one replication share numeric
// parameter values when given identical streams.
ScmRegressionParams sample_regression_params(RngStream& rng,
                                             bool mispecified = false);
ScmClassificationParams sample_classification_params(RngStream& rng,
                                                     bool mispecified = false);

// Single-dataset generators standardize on their own sample (X, A, and Y for
// regression; X and A only for classification; shift data is intentionally
// left raw because rescaling would erase the distribution shift).
Dataset gen_regression(const ScmRegressionParams& params, Index n,
                       RngStream& rng);
Dataset gen_classification(const ScmClassificationParams& params, Index n,
                           RngStream& rng);

// Train/test pair of one replication: same params, independent streams, and
// one standardization computed on the concatenated train+test rows so both
// splits live on a common scale.
std::pair<Dataset, Dataset> gen_regression_pair(
    const ScmRegressionParams& params, Index n_train, Index n_test,
    RngStream& train_rng, RngStream& test_rng);
std::pair<Dataset, Dataset> gen_classification_pair(
    const ScmClassificationParams& params, Index n_train, Index n_test,
    RngStream& train_rng, RngStream& test_rng);

// environment: 0 = train distribution, 1..E = test environment index.
Dataset gen_shift_data(const ShiftScmParams& params, int environment, Index n,
                       RngStream& rng);

}  // namespace deconfound
