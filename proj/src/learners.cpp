#include "deconfound/learners.hpp"

#include <cmath>
#include <string>

#include "deconfound/core_linalg.hpp"

namespace deconfound {

TrainedModel fit_linear(const Matrix& x, const Vector& y) {
  const LinearFit fit = ols_fit(x, y, /*with_intercept=*/true);
  TrainedModel m;
  m.kind = TrainedModel::Kind::linear;
  m.weights = fit.coefficients.col(0);
  m.intercept = fit.intercept[0];
  return m;
}

TrainedModel fit_logistic(const Matrix& x, const Vector& y) {
  const Index n = x.rows(), p = x.cols();
  if (y.size() != n)
    throw DimensionMismatch("fit_logistic: x and y disagree on rows");
  bool saw0 = false, saw1 = false;
  for (Index i = 0; i < n; ++i) {
    if (y[i] == 0.0)
      saw0 = true;
    else if (y[i] == 1.0)
      saw1 = true;
    else
      throw InvalidParam("fit_logistic: outcome must be exactly 0 or 1");
  }
  if (!saw0 || !saw1)
    throw SingleClass("fit_logistic: only one outcome class present");

  Matrix design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;

  Vector theta = Vector::Zero(p + 1);  // (intercept, weights)
  for (int iter = 0; iter < 100; ++iter) {
    const Vector eta = design * theta;
    const Vector prob = 1.0 / (1.0 + (-eta.array()).exp());
    const Vector score = design.transpose() * (y - prob);
    if (score.cwiseAbs().maxCoeff() <= 1e-8) break;
    const Vector w = prob.array() * (1.0 - prob.array());
    Matrix hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal().array() += 1e-10;
    theta += hessian.ldlt().solve(score);
    if (!theta.allFinite() || theta.norm() > 1e3)
      throw Separation("fit_logistic: weights diverging (norm " +
                       std::to_string(theta.norm()) + ")");
  }

  TrainedModel m;
  m.kind = TrainedModel::Kind::logistic;
  m.intercept = theta[0];
  m.weights = theta.tail(p);
  return m;
}

MetricReport evaluate(const TrainedModel& model, const Dataset& test) {
  if (test.x.cols() != model.weights.size())
    throw DimensionMismatch("evaluate: feature count does not match model");
  const Vector eta =
      (test.x * model.weights).array() + model.intercept;
  MetricReport report;
  if (model.kind == TrainedModel::Kind::linear) {
    report.predictions = eta;
    report.mse = (test.y - eta).squaredNorm() /
                 static_cast<double>(test.rows());
  } else {
    report.predictions = 1.0 / (1.0 + (-eta.array()).exp());
    Index hits = 0;
    for (Index i = 0; i < test.rows(); ++i) {
      const double predicted = report.predictions[i] > 0.5 ? 1.0 : 0.0;
      if (predicted == test.y[i]) ++hits;
    }
    report.accuracy = static_cast<double>(hits) /
                      static_cast<double>(test.rows());
  }
  return report;
}

}  // namespace deconfound
