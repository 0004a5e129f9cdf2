#pragma once

#include <string>
#include <vector>

#include "deconfound/errors.hpp"
#include "deconfound/types.hpp"

namespace deconfound {

// One tested relation: a (possibly partial) correlation plus its two-sided
// Fisher z-test p-value.
struct CorrelationTest {
  double r = 0.0;
  double p_value = 1.0;
};

// The six-relation (in)dependence pattern of a prediction, the outcome, and
// one confounder column. A prediction that carries outcome signal but no
// leftover confounder signal shows exactly one independence here:
// yhat_a_given_y, with the other five relations active.
struct ConfounderPattern {
  CorrelationTest yhat_y;          // cor(Ŷ, Y)
  CorrelationTest yhat_a;          // cor(Ŷ, A_j)
  CorrelationTest a_y;             // cor(A_j, Y)
  CorrelationTest yhat_y_given_a;  // cor(Ŷ, Y | A_j)
  CorrelationTest yhat_a_given_y;  // cor(Ŷ, A_j | Y)
  CorrelationTest a_y_given_yhat;  // cor(A_j, Y | Ŷ)
};

struct DiagnosticReport {
  Index n = 0;
  std::vector<ConfounderPattern> per_confounder;
};

// Computes the six marginal/partial correlations of (y_hat, y, a_j) for every
// confounder column j, with Fisher z p-values using effective degrees of
// freedom n − 3 for marginal and n − 4 for single-variable partial
// correlations. Requires equal lengths and n >= 20 (InsufficientRows,
// DimensionMismatch); DegenerateResidual propagates from the partial
// correlations, e.g. when y_hat reproduces y exactly.
DiagnosticReport ci_pattern(const Vector& y_hat, const Vector& y,
                            const Matrix& a);

enum class Verdict {
  deconfounded,         // only cor(Ŷ, A|Y) vanished; the other five active
  confounded,           // confounder visible both marginally and given Y
  residual_unfaithful,  // marginally invisible yet dependent given Y
  indeterminate,        // anything else (e.g. weak signal everywhere)
};

std::string to_string(Verdict verdict);

inline constexpr double kDefaultAlpha = 0.01;

// Classifies each confounder's pattern at significance level alpha:
//   deconfounded        <=> yhat_a_given_y non-significant AND the other five
//                           relations significant
//   residual_unfaithful <=> yhat_a non-significant AND yhat_a_given_y
//                           significant
//   confounded          <=> yhat_a AND yhat_a_given_y both significant
//   indeterminate       otherwise
// InvalidParam unless 0 < alpha < 1.
std::vector<Verdict> classify_pattern(const DiagnosticReport& report,
                                      double alpha = kDefaultAlpha);

}  // namespace deconfound
