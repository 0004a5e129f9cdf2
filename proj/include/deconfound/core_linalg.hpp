#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "deconfound/errors.hpp"
#include "deconfound/types.hpp"

namespace deconfound {

// Column means and sample standard deviations (denominator n - 1) captured by
// standardize(); reusable to put a second sample on the first sample's scale.
struct StandardizationStats {
  Vector means;
  Vector sds;
};

// Center and scale each column to zero mean / unit sample variance. When
// `stats` is given, those moments are applied instead of the sample's own
// (e.g. scaling a test split by training moments). Throws ConstantColumn for
// any zero-variance column and DimensionMismatch when stats do not match.
std::pair<Matrix, StandardizationStats> standardize(
    const Matrix& m, const std::optional<StandardizationStats>& stats = {});

// Inverse of standardize: m * sd + mean per column.
Matrix unstandardize(const Matrix& m, const StandardizationStats& stats);

// Ordinary least squares fit of (possibly multi-column) responses on a shared
// design. Residuals satisfy response = design * coefficients + intercept +
// residuals exactly as computed.
struct LinearFit {
  Matrix coefficients;   // q x m, row order follows design columns
  RowVector intercept;   // 1 x m, all zero when fitted without intercept
  Matrix residuals;      // n x m
  bool with_intercept = true;
  std::vector<std::string> regressor_names;  // optional labels, caller-set
  std::vector<std::string> response_names;

  Matrix predict(const Matrix& design) const;
};

// Solved through a Householder QR of the (intercept-augmented) design; the
// singular values of the triangular factor are checked so a numerically
// rank-deficient design raises RankDeficient instead of returning noise.
// Requires rows > design columns + 1 (InsufficientRows otherwise).
LinearFit ols_fit(const Matrix& design, const Matrix& response,
                  bool with_intercept = true);

// Scaled SVD of a column-centered matrix a (n x k, n > k): with a = U D V',
// u_tilde = sqrt(n-1) U and v_tilde = V / sqrt(n-1), so that
// u_tilde * diag(singular_values) * v_tilde' still reconstructs a while
// u_tilde'u_tilde / (n-1) = I. Replacing confounder columns by u_tilde is the
// orthonormalized reparameterization used by the adjustment invariance tests.
struct ScaledSvd {
  Matrix u_tilde;          // n x k
  Vector singular_values;  // k, nonincreasing
  Matrix v_tilde;          // k x k
};

ScaledSvd scaled_svd(const Matrix& a);

// Sample covariance matrix of the columns (denominator n - 1).
Matrix sample_covariance(const Matrix& columns);

// Pearson correlation, and partial correlation of x and y given z computed as
// the correlation of the two OLS residuals on [1, z]. DegenerateResidual when
// either residual variance falls below 1e-12 (e.g. y_hat == y exactly).
double correlation(const Vector& x, const Vector& y);
double partial_correlation(const Vector& x, const Vector& y, const Vector& z);

// One fitted component of an additive model. Continuous covariates get a
// penalized cubic B-spline (integrated squared second derivative penalty, so
// straight lines are unpenalized); covariates with exactly two distinct
// values get a two-level step whose split point is the midpoint. Either form
// is mean-centered over the training sample and evaluable at new points
// (spline evaluation clamps to the observed range).
struct SplineComponent {
  Vector knots;   // clamped knot vector (cubic: boundary knots repeated 4x)
  Vector coef;    // B-spline basis coefficients
  double center;  // training-sample mean of the raw spline values
  double evaluate(double x) const;
};

struct StepComponent {
  double threshold;  // midpoint between the two observed levels
  double low;        // centered fitted value for x < threshold
  double high;
  double evaluate(double x) const { return x < threshold ? low : high; }
};

struct AdditiveComponent {
  std::variant<SplineComponent, StepComponent> fn;
  Vector evaluate(const Vector& x) const;
};

struct AdditiveFit {
  double intercept = 0.0;
  std::vector<AdditiveComponent> components;  // one per covariate column
  Vector residuals;
  int sweeps = 0;

  Vector predict(const Matrix& covariates) const;
};

// Backfitting for target = intercept + sum_j f_j(covariate_j) + residual.
// Gauss-Seidel over columns in order; converged when the largest sup-norm
// change of any component across a sweep is <= 1e-6, NoConvergence after 10000
// sweeps (strong covariate concurvity legitimately needs sweep counts in the
// thousands). Interior spline knots sit at 10 equally spaced sample quantiles
// and the roughness penalty weight is fixed at 1.
AdditiveFit backfit(const Vector& target, const Matrix& covariates);

}  // namespace deconfound
