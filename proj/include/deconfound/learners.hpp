#pragma once

#include <optional>

#include "deconfound/scm_sim.hpp"

namespace deconfound {

struct TrainedModel {
  enum class Kind { linear, logistic };
  Kind kind = Kind::linear;
  Vector weights;
  double intercept = 0.0;
};

// Plain OLS with intercept; no regularization.
TrainedModel fit_linear(const Matrix& x, const Vector& y);

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares: converged when the largest score component is <= 1e-8 (or after
// 100 iterations); a 1e-10 ridge jitter keeps the weighted normal matrix
// invertible. Diverging weights (norm > 1e3, the separable-data signature)
// raise Separation rather than returning a clipped fit.
TrainedModel fit_logistic(const Matrix& x, const Vector& y);

// Test-set metrics. `predictions` carries the raw linear predictions, or the
// class-1 probabilities for logistic models (the diagnostics operate on
// those). Classification threshold is exactly 0.5 with ties going to class 0.
struct MetricReport {
  std::optional<double> mse;
  std::optional<double> accuracy;
  Vector predictions;
};

MetricReport evaluate(const TrainedModel& model, const Dataset& test);

}  // namespace deconfound
