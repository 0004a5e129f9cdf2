#pragma once

#include <vector>

#include "deconfound/errors.hpp"
#include "deconfound/types.hpp"

namespace deconfound {

// Population path coefficients of the standardized anticausal model
//   Y = Γ_YA A + W_Y,   X = Γ_XY Y + Γ_XA A + W_X,
// with Var(Y) pinned at 1, so Var(W_Y) is implied as 1 − Γ_YA Cov(A) Γ_YAᵀ.
// Every operation below validates that the implied noise variance is
// nonnegative (NotStandardized otherwise) and that cov_a / sigma_w are
// symmetric positive definite (NotPositiveDefinite otherwise).
struct TheoryParams {
  Vector gamma_xy;  // p, direct outcome -> feature loadings
  Matrix gamma_xa;  // p x k, direct confounder -> feature loadings
  Vector gamma_ya;  // k, confounder -> outcome loadings
  Matrix cov_a;     // k x k confounder covariance
  Matrix sigma_w;   // p x p feature-noise covariance
};

// Population covariances of raw and adjusted features with the outcome.
// cov_x_y  = Γ_XY + Γ_XA Cov(A) Γ_YAᵀ          (raw features)
// cov_xc_y = Γ_XY                              (counterfactual adjustment)
// cov_xr_y = Γ_XY (1 − Γ_YA Cov(A) Γ_YAᵀ)      (residualization)
// cov_xc   = Γ_XY Γ_XYᵀ + Σ_W
// cov_xr   = cov_xc − (Γ_YA Cov(A) Γ_YAᵀ) Γ_XY Γ_XYᵀ
struct ClosedFormCovariances {
  Vector cov_x_y;
  Vector cov_xc_y;
  Vector cov_xr_y;
  Matrix cov_xc;
  Matrix cov_xr;
};

ClosedFormCovariances closed_form_covariances(const TheoryParams& params);

// Per-feature test of |Cov(X_c_j, Y)| >= |Cov(X_r_j, Y)|. Always true for
// valid standardized params, because the residualized covariance is the
// counterfactual one shrunk by a factor in [0, 1]; the function exists so
// property tests can sweep it over random parameter draws.
std::vector<bool> theorem2_check(const TheoryParams& params);

// Expected squared error of the population least-squares predictor built
// from the given feature covariance and feature-outcome covariance:
//   var_y − cov_x_yᵀ cov_x⁻¹ cov_x_y.
double expected_mse_general(const Matrix& cov_x, const Vector& cov_x_y,
                            double var_y);

// Expected error of each adjustment method on a standardized model.
struct MsePair {
  double mse_c = 0.0;  // counterfactual (causality-aware) adjustment
  double mse_r = 0.0;  // residualization
};

// One standardized feature X = γY + W with Var(W) = σ², one confounder with
// Cor(A, Y) = φ:
//   mse_c = 1 − γ² / (σ² + γ²)
//   mse_r = 1 − γ²(1−φ²)² / (σ² + γ²(1−φ²))
// mse_c <= mse_r always. InvalidParam when |φ| > 1 or σ² <= 0.
MsePair expected_mse_single(double gamma, double phi, double sigma2);

// Two standardized features with loadings γ₁, γ₂ and noise covariance
// [σ₁₁ σ₁₂; σ₁₂ σ₂₂]. With Q = σ₁₁γ₂² + σ₂₂γ₁² − 2γ₁γ₂σ₁₂ and
// d = σ₁₁σ₂₂ − σ₁₂²:
//   mse_c = 1 − Q / (d + Q)
//   mse_r = 1 − Q(1−φ²)² / (d + Q(1−φ²))
MsePair expected_mse_two(double gamma1, double gamma2, double phi,
                         double sigma11, double sigma12, double sigma22);

// Single-feature regression model X = β_XY Y + β_XA A + U_X evaluated in a
// test environment where (A, Y) is centered with covariance
// [σ_AA σ_AY; σ_AY σ_YY], scored by a frozen slope β̂ learned elsewhere.
struct ShiftTheoryParams {
  double beta_xy = 0.0;
  double beta_xa = 0.0;
  double sigma2_x = 1.0;  // Var(U_X) > 0
  double sigma_aa = 1.0;
  double sigma_ay = 0.0;
  double sigma_yy = 1.0;
  double beta_hat_tr = 0.0;  // frozen trained coefficient
};

enum class ShiftMethod {
  kCausalityAware,
  kResidualization,
};

// Expected squared error of ŷ = β̂ x̂ in the test environment, where x̂ is the
// population-adjusted feature. The counterfactual form
//   σ_YY + β̂²(σ²_X + β_XY² σ_YY) − 2 β̂ β_XY σ_YY
// does not involve σ_AY or σ_AA; the residualization form subtracts
// β_XY σ_AY²/σ_AA terms from both the variance and the covariance, so it
// moves with the confounder-outcome covariance of the environment. β_XA
// cancels out of both expressions. NotPositiveDefinite when the (A, Y)
// covariance is not positive definite or σ²_X <= 0.
double expected_mse_shift(const ShiftTheoryParams& params, ShiftMethod method);

}  // namespace deconfound
