#pragma once

// Test-support generator: a population-standardized anticausal SCM with a
// single confounder,
//   A ~ N(0,1);  Y = phi*A + W_Y, Var(W_Y) = 1 - phi^2;
//   X_j = gamma_j*Y + theta_j*A + W_Xj,  W_X ~ N(0, sigma_w).
// Every closed-form covariance oracle in the tests is written against these
// population parameters, so no empirical re-standardization is applied.

#include <cmath>
#include <utility>

#include <Eigen/Dense>
#include <doctest.h>

#include "deconfound/scm_sim.hpp"

namespace deconfound::testing {

struct AnticausalScm {
  Vector gamma;    // p, outcome -> feature paths
  Vector theta;    // p, confounder -> feature paths
  double phi;      // confounder -> outcome path, |phi| < 1
  Matrix sigma_w;  // p x p feature noise covariance, SPD

  // Single feature with Var(W_X) = var_w.
  static AnticausalScm single(double gamma, double theta, double phi,
                              double var_w) {
    AnticausalScm s;
    s.gamma = Vector::Constant(1, gamma);
    s.theta = Vector::Constant(1, theta);
    s.phi = phi;
    s.sigma_w = Matrix::Constant(1, 1, var_w);
    return s;
  }

  // Single feature with var_w chosen so Var(X) = 1.
  static AnticausalScm standardized_single(double gamma, double theta,
                                           double phi) {
    const double var_w =
        1.0 - (gamma * gamma + theta * theta + 2.0 * gamma * theta * phi);
    REQUIRE(var_w > 0.0);
    return single(gamma, theta, phi, var_w);
  }
};

inline Dataset draw_anticausal(const AnticausalScm& s, Index n, RngStream& rng,
                               Split split) {
  const Index p = s.gamma.size();
  const double sd_wy = std::sqrt(1.0 - s.phi * s.phi);
  const Eigen::LLT<Matrix> llt(s.sigma_w);
  REQUIRE(llt.info() == Eigen::Success);
  const Matrix chol = llt.matrixL();
  Dataset d;
  d.x.resize(n, p);
  d.a.resize(n, 1);
  d.y.resize(n);
  d.split = split;
  Vector z(p);
  for (Index i = 0; i < n; ++i) {
    const double a = rng.normal();
    const double y = s.phi * a + sd_wy * rng.normal();
    for (Index j = 0; j < p; ++j) z[j] = rng.normal();
    const Vector wx = chol * z;
    for (Index j = 0; j < p; ++j)
      d.x(i, j) = s.gamma[j] * y + s.theta[j] * a + wx[j];
    d.a(i, 0) = a;
    d.y[i] = y;
  }
  return d;
}

inline std::pair<Dataset, Dataset> draw_anticausal_pair(const AnticausalScm& s,
                                                        Index n_train,
                                                        Index n_test,
                                                        RngStream& train_rng,
                                                        RngStream& test_rng) {
  return {draw_anticausal(s, n_train, train_rng, Split::train),
          draw_anticausal(s, n_test, test_rng, Split::test)};
}

// Sample covariance of a feature column with the outcome.
inline double cov_with(const Vector& x, const Vector& y) {
  return (x.array() - x.mean()).matrix().dot((y.array() - y.mean()).matrix()) /
         static_cast<double>(x.size() - 1);
}

}  // namespace deconfound::testing
