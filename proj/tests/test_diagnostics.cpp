#include <doctest.h>

#include <cmath>

#include "deconfound/adjust.hpp"
#include "deconfound/diagnostics.hpp"
#include "deconfound/learners.hpp"
#include "deconfound/rng.hpp"
#include "support/anticausal_scm.hpp"

using namespace deconfound;
using namespace deconfound::testing;

namespace {

Vector normals(Index n, RngStream& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Runs the chain SCM through adjust + fit + predict and diagnoses the test
// predictions against the test confounders.
DiagnosticReport chain_report(AdjustedPair (*adjust)(const Dataset&,
                                                     const Dataset&),
                              std::uint64_t seed) {
  const AnticausalScm scm = AnticausalScm::standardized_single(0.5, 0.3, 0.4);
  RngStream train_rng(seed, 0, 0);
  RngStream test_rng(seed, 0, 1);
  const auto [train, test] =
      draw_anticausal_pair(scm, 100000, 100000, train_rng, test_rng);
  const AdjustedPair pair = adjust(train, test);
  const TrainedModel model = fit_linear(pair.train.x, pair.train.y);
  const MetricReport metrics = evaluate(model, pair.test);
  return ci_pattern(metrics.predictions, pair.test.y, pair.test.a);
}

}  // namespace

TEST_CASE("an exact copy of the outcome cannot be diagnosed") {
  RngStream rng(1, 0, 0);
  const Vector y = normals(100, rng);
  const Matrix a = normals(100, rng);
  CHECK_THROWS_AS(ci_pattern(y, y, a), DegenerateResidual);
}

TEST_CASE("independent confounders show no spurious association") {
  RngStream rng(2, 0, 0);
  const Index n = 100000;
  const Vector y = normals(n, rng);
  const Vector y_hat = y + 0.8 * normals(n, rng);
  Matrix a(n, 2);
  a.col(0) = normals(n, rng);
  a.col(1) = normals(n, rng);

  const DiagnosticReport report = ci_pattern(y_hat, y, a);
  REQUIRE(report.per_confounder.size() == 2);
  CHECK(report.n == n);
  for (const ConfounderPattern& p : report.per_confounder) {
    CHECK(std::abs(p.yhat_a.r) <= 0.02);
    CHECK(std::abs(p.yhat_a_given_y.r) <= 0.02);
    CHECK(p.yhat_y.r > 0.7);
    CHECK(p.yhat_y.p_value < 1e-10);
    for (const CorrelationTest* t :
         {&p.yhat_y, &p.yhat_a, &p.a_y, &p.yhat_y_given_a, &p.yhat_a_given_y,
          &p.a_y_given_yhat}) {
      CHECK(t->r >= -1.0);
      CHECK(t->r <= 1.0);
      CHECK(t->p_value >= 0.0);
      CHECK(t->p_value <= 1.0);
    }
  }
}

TEST_CASE("unadjusted predictions stay confounded in the classic chain") {
  const AnticausalScm scm = AnticausalScm::standardized_single(0.5, 0.3, 0.4);
  RngStream train_rng(3, 0, 0);
  RngStream test_rng(3, 0, 1);
  const auto [train, test] =
      draw_anticausal_pair(scm, 100000, 100000, train_rng, test_rng);
  const TrainedModel model = fit_linear(train.x, train.y);
  const MetricReport metrics = evaluate(model, test);
  const DiagnosticReport report = ci_pattern(metrics.predictions, test.y, test.a);

  REQUIRE(report.per_confounder.size() == 1);
  CHECK(std::abs(report.per_confounder[0].yhat_a_given_y.r) > 0.05);
  const std::vector<Verdict> verdicts = classify_pattern(report);
  CHECK(verdicts[0] == Verdict::confounded);
}

TEST_CASE("counterfactual adjustment earns the deconfounded verdict") {
  const DiagnosticReport report = chain_report(&causality_aware, 4);
  REQUIRE(report.per_confounder.size() == 1);
  const ConfounderPattern& p = report.per_confounder[0];
  // The prediction still correlates with the confounder marginally (the
  // outcome links them); only the conditional relation vanishes.
  CHECK(p.yhat_a.p_value < 0.01);
  CHECK(std::abs(p.yhat_a_given_y.r) < 0.02);
  CHECK(classify_pattern(report)[0] == Verdict::deconfounded);
}

TEST_CASE("residualized predictions leave the unfaithful signature") {
  const DiagnosticReport report = chain_report(&residualize, 5);
  REQUIRE(report.per_confounder.size() == 1);
  const ConfounderPattern& p = report.per_confounder[0];
  // Marginally uncorrelated with the confounder, yet dependent given the
  // outcome: a pattern no single causal diagram over the triple produces.
  CHECK(std::abs(p.yhat_a.r) < 0.02);
  CHECK(p.yhat_a_given_y.p_value < 0.01);
  CHECK(classify_pattern(report)[0] == Verdict::residual_unfaithful);
}

TEST_CASE("affine rescaling never changes the report") {
  RngStream rng(6, 0, 0);
  const Index n = 2000;
  const Vector y = normals(n, rng);
  const Vector y_hat = 0.7 * y + 0.5 * normals(n, rng);
  Matrix a(n, 2);
  a.col(0) = 0.6 * y + normals(n, rng);
  a.col(1) = normals(n, rng);

  const DiagnosticReport base = ci_pattern(y_hat, y, a);
  Matrix a_scaled = a;
  a_scaled.col(0) = 2.5 * a.col(0).array() - 4.0;
  a_scaled.col(1) = 0.3 * a.col(1).array() + 9.0;
  const DiagnosticReport scaled =
      ci_pattern((3.2 * y_hat.array() - 7.0).matrix(),
                 (0.5 * y.array() + 11.0).matrix(), a_scaled);

  for (std::size_t j = 0; j < base.per_confounder.size(); ++j) {
    const ConfounderPattern& b = base.per_confounder[j];
    const ConfounderPattern& s = scaled.per_confounder[j];
    for (const auto& [bt, st] :
         {std::pair{&b.yhat_y, &s.yhat_y}, std::pair{&b.yhat_a, &s.yhat_a},
          std::pair{&b.a_y, &s.a_y},
          std::pair{&b.yhat_y_given_a, &s.yhat_y_given_a},
          std::pair{&b.yhat_a_given_y, &s.yhat_a_given_y},
          std::pair{&b.a_y_given_yhat, &s.a_y_given_yhat}}) {
      CHECK(bt->r == doctest::Approx(st->r).epsilon(1e-12));
      CHECK(bt->p_value == doctest::Approx(st->p_value).epsilon(1e-9));
    }
  }
}

TEST_CASE("conditional independence by construction passes at the nominal rate") {
  int deconfounded = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    RngStream rng(7, static_cast<std::uint64_t>(rep), 0);
    const Index n = 10000;
    const Vector y = normals(n, rng);
    Matrix a(n, 1);
    a.col(0) = 0.6 * y + 0.8 * normals(n, rng);
    const Vector y_hat = 0.9 * y + 0.5 * normals(n, rng);
    const std::vector<Verdict> verdicts =
        classify_pattern(ci_pattern(y_hat, y, a), 0.01);
    if (verdicts[0] == Verdict::deconfounded) ++deconfounded;
  }
  CHECK(deconfounded >= 190);
}

TEST_CASE("diagnostics reject malformed inputs") {
  RngStream rng(8, 0, 0);
  const Vector y = normals(30, rng);
  const Vector y_hat = normals(30, rng);
  const Matrix a = normals(30, rng);

  CHECK_THROWS_AS(ci_pattern(normals(29, rng), y, a), DimensionMismatch);
  CHECK_THROWS_AS(ci_pattern(y_hat.head(19), y.head(19), a.topRows(19)),
                  InsufficientRows);

  const DiagnosticReport report = ci_pattern(y_hat, y, a);
  CHECK_THROWS_AS(classify_pattern(report, 0.0), InvalidParam);
  CHECK_THROWS_AS(classify_pattern(report, 1.0), InvalidParam);
  CHECK_THROWS_AS(classify_pattern(report, -0.5), InvalidParam);

  CHECK(to_string(Verdict::deconfounded) == "deconfounded");
  CHECK(to_string(Verdict::confounded) == "confounded");
  CHECK(to_string(Verdict::residual_unfaithful) == "residual_unfaithful");
  CHECK(to_string(Verdict::indeterminate) == "indeterminate");
}
