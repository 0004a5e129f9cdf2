#include "deconfound/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deconfound/core_linalg.hpp"

namespace deconfound {

namespace {

constexpr Index kMinRows = 20;

// Two-sided p-value of atanh(r) * sqrt(n - 3 - n_conditioning) against a
// standard normal.
double fisher_z_p(double r, Index n, int n_conditioning) {
  const double df = static_cast<double>(n) - 3.0 - n_conditioning;
  const double clamped = std::clamp(r, -1.0, 1.0);
  const double stat = std::atanh(clamped) * std::sqrt(df);
  return std::erfc(std::abs(stat) / std::sqrt(2.0));
}

CorrelationTest marginal(const Vector& x, const Vector& y) {
  CorrelationTest t;
  t.r = correlation(x, y);
  t.p_value = fisher_z_p(t.r, x.size(), 0);
  return t;
}

CorrelationTest partial(const Vector& x, const Vector& y, const Vector& z) {
  CorrelationTest t;
  t.r = partial_correlation(x, y, z);
  t.p_value = fisher_z_p(t.r, x.size(), 1);
  return t;
}

}  // namespace

DiagnosticReport ci_pattern(const Vector& y_hat, const Vector& y,
                            const Matrix& a) {
  if (y_hat.size() != y.size() || a.rows() != y.size()) {
    std::ostringstream msg;
    msg << "ci_pattern: lengths disagree (y_hat " << y_hat.size() << ", y "
        << y.size() << ", a rows " << a.rows() << ")";
    throw DimensionMismatch(msg.str());
  }
  if (y.size() < kMinRows) {
    std::ostringstream msg;
    msg << "ci_pattern needs at least " << kMinRows << " rows, got "
        << y.size();
    throw InsufficientRows(msg.str());
  }

  DiagnosticReport report;
  report.n = y.size();
  report.per_confounder.reserve(static_cast<std::size_t>(a.cols()));
  for (Index j = 0; j < a.cols(); ++j) {
    const Vector aj = a.col(j);
    ConfounderPattern pattern;
    pattern.yhat_y = marginal(y_hat, y);
    pattern.yhat_a = marginal(y_hat, aj);
    pattern.a_y = marginal(aj, y);
    pattern.yhat_y_given_a = partial(y_hat, y, aj);
    pattern.yhat_a_given_y = partial(y_hat, aj, y);
    pattern.a_y_given_yhat = partial(aj, y, y_hat);
    report.per_confounder.push_back(pattern);
  }
  return report;
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::deconfounded:
      return "deconfounded";
    case Verdict::confounded:
      return "confounded";
    case Verdict::residual_unfaithful:
      return "residual_unfaithful";
    case Verdict::indeterminate:
      return "indeterminate";
  }
  throw InvalidParam("unknown verdict");
}

std::vector<Verdict> classify_pattern(const DiagnosticReport& report,
                                      double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) {
    throw InvalidParam("alpha must lie strictly between 0 and 1");
  }
  std::vector<Verdict> verdicts;
  verdicts.reserve(report.per_confounder.size());
  for (const ConfounderPattern& pattern : report.per_confounder) {
    const auto significant = [alpha](const CorrelationTest& t) {
      return t.p_value < alpha;
    };
    Verdict verdict = Verdict::indeterminate;
    if (!significant(pattern.yhat_a_given_y) && significant(pattern.yhat_y) &&
        significant(pattern.yhat_a) && significant(pattern.a_y) &&
        significant(pattern.yhat_y_given_a) &&
        significant(pattern.a_y_given_yhat)) {
      verdict = Verdict::deconfounded;
    } else if (significant(pattern.yhat_a_given_y)) {
      verdict = significant(pattern.yhat_a) ? Verdict::confounded
                                            : Verdict::residual_unfaithful;
    }
    verdicts.push_back(verdict);
  }
  return verdicts;
}

}  // namespace deconfound
