#include "deconfound/theory.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

namespace deconfound {

namespace {

constexpr double kUnitVarianceTol = 1e-8;

void require_spd(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    std::ostringstream msg;
    msg << name << " must be square, got " << m.rows() << "x" << m.cols();
    throw DimensionMismatch(msg.str());
  }
  if (m.rows() == 0) {
    throw DimensionMismatch(std::string(name) + " must be nonempty");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw NotPositiveDefinite(std::string(name) + " is not symmetric");
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(name) + " is not positive definite");
  }
}

// Validates shapes and definiteness, returns the outcome variance explained
// by the confounders, q = Γ_YA Cov(A) Γ_YAᵀ. Var(Y) = 1 forces the outcome
// noise variance to be 1 − q, so q may not exceed 1.
double validate(const TheoryParams& p) {
  const Index n_features = p.gamma_xy.size();
  const Index n_confounders = p.gamma_ya.size();
  if (n_features < 1 || n_confounders < 1) {
    throw DimensionMismatch("theory params need at least one feature and one confounder");
  }
  if (p.gamma_xa.rows() != n_features || p.gamma_xa.cols() != n_confounders) {
    std::ostringstream msg;
    msg << "gamma_xa must be " << n_features << "x" << n_confounders << ", got "
        << p.gamma_xa.rows() << "x" << p.gamma_xa.cols();
    throw DimensionMismatch(msg.str());
  }
  require_spd(p.cov_a, "cov_a");
  require_spd(p.sigma_w, "sigma_w");
  if (p.cov_a.rows() != n_confounders) {
    throw DimensionMismatch("cov_a size does not match gamma_ya");
  }
  if (p.sigma_w.rows() != n_features) {
    throw DimensionMismatch("sigma_w size does not match gamma_xy");
  }
  const double q = p.gamma_ya.dot(p.cov_a * p.gamma_ya);
  if (q > 1.0 + kUnitVarianceTol) {
    std::ostringstream msg;
    msg << "confounders explain variance " << q
        << " > 1; impossible when Var(Y) = 1";
    throw NotStandardized(msg.str());
  }
  return q;
}

}  // namespace

ClosedFormCovariances closed_form_covariances(const TheoryParams& params) {
  const double q = validate(params);
  const Matrix outer = params.gamma_xy * params.gamma_xy.transpose();
  ClosedFormCovariances out;
  out.cov_x_y = params.gamma_xy + params.gamma_xa * (params.cov_a * params.gamma_ya);
  out.cov_xc_y = params.gamma_xy;
  out.cov_xr_y = (1.0 - q) * params.gamma_xy;
  out.cov_xc = outer + params.sigma_w;
  // Cov(X_r) = Cov(X_c) − 2 Γ_XY Cov(Y,A) Γ_YAᵀ Γ_XYᵀ + Γ_XY Γ_YA Cov(A) Γ_YAᵀ Γ_XYᵀ;
  // Cov(Y,A) = Γ_YA Cov(A), so both correction terms are multiples of q·Γ_XY Γ_XYᵀ.
  out.cov_xr = out.cov_xc - q * outer;
  return out;
}

std::vector<bool> theorem2_check(const TheoryParams& params) {
  const ClosedFormCovariances cfc = closed_form_covariances(params);
  std::vector<bool> holds(static_cast<std::size_t>(cfc.cov_xc_y.size()));
  for (Index j = 0; j < cfc.cov_xc_y.size(); ++j) {
    holds[static_cast<std::size_t>(j)] =
        std::abs(cfc.cov_xc_y[j]) >= std::abs(cfc.cov_xr_y[j]);
  }
  return holds;
}

double expected_mse_general(const Matrix& cov_x, const Vector& cov_x_y,
                            double var_y) {
  require_spd(cov_x, "cov_x");
  if (cov_x.rows() != cov_x_y.size()) {
    throw DimensionMismatch("cov_x and cov_x_y disagree on the feature count");
  }
  Eigen::LLT<Matrix> llt(cov_x);
  const Vector beta = llt.solve(cov_x_y);
  return var_y - cov_x_y.dot(beta);
}

MsePair expected_mse_single(double gamma, double phi, double sigma2) {
  if (!(std::abs(phi) <= 1.0)) {
    throw InvalidParam("phi must satisfy |phi| <= 1");
  }
  if (!(sigma2 > 0.0)) {
    throw InvalidParam("sigma2 must be positive");
  }
  const double g2 = gamma * gamma;
  const double shrink = 1.0 - phi * phi;
  MsePair out;
  out.mse_c = 1.0 - g2 / (sigma2 + g2);
  out.mse_r = 1.0 - g2 * shrink * shrink / (sigma2 + g2 * shrink);
  return out;
}

MsePair expected_mse_two(double gamma1, double gamma2, double phi,
                         double sigma11, double sigma12, double sigma22) {
  if (!(std::abs(phi) <= 1.0)) {
    throw InvalidParam("phi must satisfy |phi| <= 1");
  }
  const double det = sigma11 * sigma22 - sigma12 * sigma12;
  if (!(sigma11 > 0.0) || !(sigma22 > 0.0) || !(det > 0.0)) {
    throw NotPositiveDefinite("feature-noise covariance is not positive definite");
  }
  const double quad =
      sigma11 * gamma2 * gamma2 + sigma22 * gamma1 * gamma1 -
      2.0 * gamma1 * gamma2 * sigma12;
  const double shrink = 1.0 - phi * phi;
  MsePair out;
  out.mse_c = 1.0 - quad / (det + quad);
  out.mse_r = 1.0 - quad * shrink * shrink / (det + quad * shrink);
  return out;
}

double expected_mse_shift(const ShiftTheoryParams& params, ShiftMethod method) {
  const double det =
      params.sigma_aa * params.sigma_yy - params.sigma_ay * params.sigma_ay;
  if (!(params.sigma_aa > 0.0) || !(params.sigma_yy > 0.0) || !(det > 0.0)) {
    throw NotPositiveDefinite("confounder-outcome covariance is not positive definite");
  }
  if (!(params.sigma2_x > 0.0)) {
    throw NotPositiveDefinite("sigma2_x must be positive");
  }
  const double beta_hat = params.beta_hat_tr;
  double var_x_adj = params.sigma2_x + params.beta_xy * params.beta_xy * params.sigma_yy;
  double cov_x_adj_y = params.beta_xy * params.sigma_yy;
  if (method == ShiftMethod::kResidualization) {
    const double leak = params.sigma_ay * params.sigma_ay / params.sigma_aa;
    var_x_adj -= params.beta_xy * params.beta_xy * leak;
    cov_x_adj_y -= params.beta_xy * leak;
  }
  return params.sigma_yy + beta_hat * beta_hat * var_x_adj -
         2.0 * beta_hat * cov_x_adj_y;
}

}  // namespace deconfound
