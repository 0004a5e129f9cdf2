#include "deconfound/adjust.hpp"

#include <utility>

namespace deconfound {

namespace {

void check_compatible(const Dataset& train, const Dataset& test) {
  if (train.x.cols() != test.x.cols() || train.a.cols() != test.a.cols())
    throw DimensionMismatch("adjust: train/test disagree on p or k");
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

AdjustedPair make_pair_skeleton(const Dataset& train, const Dataset& test,
                                AdjustMethod method) {
  AdjustedPair out{train, test, method, std::nullopt, {}};
  // Adjusted features are on their own scale, whatever the inputs claimed.
  out.train.standardized = false;
  out.test.standardized = false;
  return out;
}

}  // namespace

std::string to_string(AdjustMethod m) {
  switch (m) {
    case AdjustMethod::linear_residualize:
      return "linear-res";
    case AdjustMethod::linear_causality_aware:
      return "linear-ca";
    case AdjustMethod::additive_residualize:
      return "additive-res";
    case AdjustMethod::additive_causality_aware:
      return "additive-ca";
  }
  throw InvalidParam("unknown adjust method");
}

AdjustMethod adjust_method_from_string(const std::string& s) {
  if (s == "linear-res") return AdjustMethod::linear_residualize;
  if (s == "linear-ca") return AdjustMethod::linear_causality_aware;
  if (s == "additive-res") return AdjustMethod::additive_residualize;
  if (s == "additive-ca") return AdjustMethod::additive_causality_aware;
  throw InvalidParam("unknown adjust method '" + s + "'");
}

AdjustedPair residualize(const Dataset& train, const Dataset& test) {
  check_compatible(train, test);
  const Matrix pooled_a = vstack(train.a, test.a);
  const Matrix pooled_x = vstack(train.x, test.x);
  LinearFit fit = ols_fit(pooled_a, pooled_x, /*with_intercept=*/true);

  AdjustedPair out =
      make_pair_skeleton(train, test, AdjustMethod::linear_residualize);
  out.train.x = fit.residuals.topRows(train.rows());
  out.test.x = fit.residuals.bottomRows(test.rows());
  out.linear_fit = std::move(fit);
  return out;
}

AdjustedPair causality_aware(const Dataset& train, const Dataset& test) {
  check_compatible(train, test);
  const Index k = train.a.cols();
  Matrix design(train.rows(), k + 1);
  design.leftCols(k) = train.a;
  design.col(k) = train.y;
  LinearFit fit = ols_fit(design, train.x, /*with_intercept=*/true);

  const Matrix gamma_xa = fit.coefficients.topRows(k);      // k x p
  const RowVector gamma_xy = fit.coefficients.row(k);       // 1 x p

  AdjustedPair out =
      make_pair_skeleton(train, test, AdjustMethod::linear_causality_aware);
  // Train: keep the outcome signal and the residual noise.
  out.train.x = train.y * gamma_xy + fit.residuals;
  // Test: strip the estimated confounder signal; y^test is never read.
  out.test.x =
      test.x - ((test.a * gamma_xa).rowwise() + fit.intercept);
  out.linear_fit = std::move(fit);
  return out;
}

AdjustedPair additive_residualize(const Dataset& train, const Dataset& test) {
  check_compatible(train, test);
  const Matrix pooled_a = vstack(train.a, test.a);
  const Matrix pooled_x = vstack(train.x, test.x);

  AdjustedPair out =
      make_pair_skeleton(train, test, AdjustMethod::additive_residualize);
  for (Index j = 0; j < pooled_x.cols(); ++j) {
    AdditiveFit fit = backfit(pooled_x.col(j), pooled_a);
    out.train.x.col(j) = fit.residuals.head(train.rows());
    out.test.x.col(j) = fit.residuals.tail(test.rows());
    out.additive_fits.push_back(std::move(fit));
  }
  return out;
}

AdjustedPair additive_causality_aware(const Dataset& train,
                                      const Dataset& test) {
  check_compatible(train, test);
  const Index k = train.a.cols();
  Matrix design(train.rows(), k + 1);
  design.col(0) = train.y;  // outcome component first, confounders after
  design.rightCols(k) = train.a;

  AdjustedPair out =
      make_pair_skeleton(train, test, AdjustMethod::additive_causality_aware);
  for (Index j = 0; j < train.x.cols(); ++j) {
    AdditiveFit fit = backfit(train.x.col(j), design);
    // Train: intercept + outcome component + residual.
    out.train.x.col(j) = Vector::Constant(train.rows(), fit.intercept) +
                         fit.components[0].evaluate(train.y) + fit.residuals;
    // Test: subtract the evaluated confounder components; y^test unused.
    Vector adjusted = test.x.col(j);
    for (Index i = 0; i < k; ++i)
      adjusted -= fit.components[i + 1].evaluate(test.a.col(i));
    out.test.x.col(j) = adjusted;
    out.additive_fits.push_back(std::move(fit));
  }
  return out;
}

std::pair<Dataset, Dataset> svd_reparameterize(const Dataset& train,
                                               const Dataset& test) {
  check_compatible(train, test);
  const ScaledSvd svd = scaled_svd(vstack(train.a, test.a));
  Dataset new_train = train, new_test = test;
  new_train.a = svd.u_tilde.topRows(train.rows());
  new_test.a = svd.u_tilde.bottomRows(test.rows());
  return {std::move(new_train), std::move(new_test)};
}

AdjustedPair adjust_with(AdjustMethod method, const Dataset& train,
                         const Dataset& test) {
  switch (method) {
    case AdjustMethod::linear_residualize:
      return residualize(train, test);
    case AdjustMethod::linear_causality_aware:
      return causality_aware(train, test);
    case AdjustMethod::additive_residualize:
      return additive_residualize(train, test);
    case AdjustMethod::additive_causality_aware:
      return additive_causality_aware(train, test);
  }
  throw InvalidParam("unknown adjustment method");
}

}  // namespace deconfound
