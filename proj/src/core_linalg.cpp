#include "deconfound/core_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace deconfound {

namespace {

constexpr double kRankTol = 1e-10;        // smin/smax cutoff for designs
constexpr double kResidualVarTol = 1e-12; // below this a residual cannot be correlated
constexpr int kSplineOrder = 4;           // cubic
constexpr int kInteriorKnots = 10;
constexpr double kPenaltyWeight = 1.0;
constexpr double kBackfitTol = 1e-6;
// Gauss-Seidel backfitting contracts at roughly the squared multiple
// correlation between the covariates per sweep. The curved generators routinely
// push that above 0.99 (the outcome is nearly an additive function of the
// confounders), which needs sweep counts in the hundreds-to-thousands, so the
// budget is sized to let those honest fits finish while still catching cycles.
constexpr int kMaxSweeps = 10000;

// Type-7 (linear interpolation) sample quantile of already sorted values.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Vector column_means(const Matrix& m) { return m.colwise().mean(); }

Vector column_sds(const Matrix& m, const Vector& means) {
  const double denom = static_cast<double>(m.rows() - 1);
  Vector sds(m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    sds[j] = std::sqrt((m.col(j).array() - means[j]).square().sum() / denom);
  return sds;
}

// All cubic B-spline basis functions evaluated at one (already clamped) x,
// by the Cox-de Boor recursion over every order up to `order`.
Vector basis_row_order(const Vector& t, double x, int order) {
  const Index m = t.size();
  Vector n = Vector::Zero(m - 1);
  Index span = -1;
  for (Index i = 0; i + 1 < m; ++i)
    if (t[i] <= x && x < t[i + 1]) {
      span = i;
      break;
    }
  if (span < 0)  // x at (or clamped to) the right boundary
    for (Index i = m - 2; i >= 0; --i)
      if (t[i] < t[i + 1]) {
        span = i;
        break;
      }
  n[span] = 1.0;
  for (int k = 2; k <= order; ++k) {
    Vector nk = Vector::Zero(m - k);
    for (Index i = 0; i + k < m; ++i) {
      double acc = 0.0;
      const double d1 = t[i + k - 1] - t[i];
      const double d2 = t[i + k] - t[i + 1];
      if (d1 > 0.0) acc += (x - t[i]) / d1 * n[i];
      if (d2 > 0.0) acc += (t[i + k] - x) / d2 * n[i + 1];
      nk[i] = acc;
    }
    n = nk;
  }
  return n;
}

// Second derivatives of the cubic basis functions at x, via the standard
// derivative recursion applied twice to the degree-1 basis.
Vector basis_row_d2(const Vector& t, double x) {
  const Index m = t.size();
  const Vector n2 = basis_row_order(t, x, 2);
  Vector d3 = Vector::Zero(m - 3);
  for (Index i = 0; i + 3 < m; ++i) {
    double acc = 0.0;
    const double den1 = t[i + 2] - t[i];
    const double den2 = t[i + 3] - t[i + 1];
    if (den1 > 0.0) acc += n2[i] / den1;
    if (den2 > 0.0) acc -= n2[i + 1] / den2;
    d3[i] = 2.0 * acc;
  }
  Vector d4 = Vector::Zero(m - 4);
  for (Index i = 0; i + 4 < m; ++i) {
    double acc = 0.0;
    const double den1 = t[i + 3] - t[i];
    const double den2 = t[i + 4] - t[i + 1];
    if (den1 > 0.0) acc += d3[i] / den1;
    if (den2 > 0.0) acc -= d3[i + 1] / den2;
    d4[i] = 3.0 * acc;
  }
  return d4;
}

// Integrated squared second derivative, Omega_ij = int B_i'' B_j''. B'' is
// piecewise linear, so a 2-point Gauss rule per knot span is exact; the null
// space of Omega is then exactly the straight lines, which keeps linear
// signals unshrunk regardless of knot spacing.
Matrix curvature_penalty(const Vector& t) {
  const Index nb = t.size() - kSplineOrder;
  Matrix omega = Matrix::Zero(nb, nb);
  const double node = 0.5 / std::sqrt(3.0);
  for (Index l = 0; l + 1 < t.size(); ++l) {
    const double a = t[l], b = t[l + 1];
    if (!(b > a)) continue;
    const double h = b - a, mid = 0.5 * (a + b);
    for (const double x : {mid - h * node, mid + h * node}) {
      const Vector d2 = basis_row_d2(t, x);
      omega.noalias() += (0.5 * h) * d2 * d2.transpose();
    }
  }
  return omega;
}

Vector make_knots(const std::vector<double>& sorted) {
  const double lo = sorted.front(), hi = sorted.back();
  std::vector<double> interior;
  double prev = lo;
  for (int i = 1; i <= kInteriorKnots; ++i) {
    const double q =
        sorted_quantile(sorted, static_cast<double>(i) / (kInteriorKnots + 1));
    if (q > prev && q < hi) {
      interior.push_back(q);
      prev = q;
    }
  }
  Vector t(2 * kSplineOrder + static_cast<Index>(interior.size()));
  Index pos = 0;
  for (int i = 0; i < kSplineOrder; ++i) t[pos++] = lo;
  for (const double q : interior) t[pos++] = q;
  for (int i = 0; i < kSplineOrder; ++i) t[pos++] = hi;
  return t;
}

// Penalized-spline smoother for one continuous covariate: the basis and the
// factorization of B'B + Omega depend only on the covariate, so they are
// built once and reused across backfitting sweeps.
struct SplineSmoother {
  Vector knots;
  Matrix basis;  // n x nb
  Eigen::LDLT<Matrix> gram;
  Vector last_coef;

  explicit SplineSmoother(const Vector& x) {
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    knots = make_knots(sorted);
    const Index nb = knots.size() - kSplineOrder;
    basis.resize(x.size(), nb);
    for (Index i = 0; i < x.size(); ++i)
      basis.row(i) = basis_row_order(knots, x[i], kSplineOrder).transpose();
    const Matrix penalized =
        basis.transpose() * basis + kPenaltyWeight * curvature_penalty(knots);
    gram.compute(penalized);
  }

  Vector fit(const Vector& partial) {
    last_coef = gram.solve(basis.transpose() * partial);
    return basis * last_coef;
  }
};

// Two-level smoother for a binary covariate: fitted values are the group
// means of the partial residual.
struct StepSmoother {
  double x_low, x_high;
  std::vector<Index> low_rows, high_rows;
  double last_low = 0.0, last_high = 0.0;

  StepSmoother(const Vector& x, double lo, double hi) : x_low(lo), x_high(hi) {
    for (Index i = 0; i < x.size(); ++i)
      (x[i] == x_low ? low_rows : high_rows).push_back(i);
  }

  Vector fit(const Vector& partial) {
    double sum_low = 0.0, sum_high = 0.0;
    for (const Index i : low_rows) sum_low += partial[i];
    for (const Index i : high_rows) sum_high += partial[i];
    last_low = sum_low / static_cast<double>(low_rows.size());
    last_high = sum_high / static_cast<double>(high_rows.size());
    Vector out(partial.size());
    for (const Index i : low_rows) out[i] = last_low;
    for (const Index i : high_rows) out[i] = last_high;
    return out;
  }
};

}  // namespace

std::pair<Matrix, StandardizationStats> standardize(
    const Matrix& m, const std::optional<StandardizationStats>& stats) {
  if (m.rows() < 2) throw InsufficientRows("standardize: need at least 2 rows");
  if (m.cols() < 1) throw DimensionMismatch("standardize: no columns");
  StandardizationStats used;
  if (stats) {
    if (stats->means.size() != m.cols() || stats->sds.size() != m.cols())
      throw DimensionMismatch("standardize: stats do not match column count");
    used = *stats;
  } else {
    used.means = column_means(m);
    used.sds = column_sds(m, used.means);
  }
  for (Index j = 0; j < m.cols(); ++j)
    if (!(used.sds[j] > 0.0))
      throw ConstantColumn("standardize: column " + std::to_string(j) +
                           " has zero variance");
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    out.col(j) = (m.col(j).array() - used.means[j]) / used.sds[j];
  return {std::move(out), std::move(used)};
}

Matrix unstandardize(const Matrix& m, const StandardizationStats& stats) {
  if (stats.means.size() != m.cols() || stats.sds.size() != m.cols())
    throw DimensionMismatch("unstandardize: stats do not match column count");
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    out.col(j) = m.col(j).array() * stats.sds[j] + stats.means[j];
  return out;
}

Matrix LinearFit::predict(const Matrix& design) const {
  if (design.cols() != coefficients.rows())
    throw DimensionMismatch("predict: design has " +
                            std::to_string(design.cols()) + " columns, fit has " +
                            std::to_string(coefficients.rows()));
  return (design * coefficients).rowwise() + intercept;
}

LinearFit ols_fit(const Matrix& design, const Matrix& response,
                  bool with_intercept) {
  const Index n = design.rows(), q = design.cols();
  if (q < 1 || response.cols() < 1)
    throw DimensionMismatch("ols_fit: empty design or response");
  if (response.rows() != n)
    throw DimensionMismatch("ols_fit: design has " + std::to_string(n) +
                            " rows, response has " +
                            std::to_string(response.rows()));
  if (n <= q + 1)
    throw InsufficientRows("ols_fit: " + std::to_string(n) + " rows for " +
                           std::to_string(q) + " regressors");

  Matrix d;
  if (with_intercept) {
    d.resize(n, q + 1);
    d.col(0).setOnes();
    d.rightCols(q) = design;
  } else {
    d = design;
  }

  const Eigen::HouseholderQR<Matrix> qr(d);
  // Rank check on the triangular factor (same singular values as d, but only
  // a (q+1)^2 problem).
  const Matrix r = qr.matrixQR()
                       .topRows(d.cols())
                       .template triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Matrix> svd(r);
  const double smax = svd.singularValues()[0];
  const double smin = svd.singularValues()[svd.singularValues().size() - 1];
  if (!(smin > kRankTol * smax))
    throw RankDeficient("ols_fit: design numerically rank deficient (smin/smax = " +
                        std::to_string(smax > 0 ? smin / smax : 0.0) + ")");

  const Matrix coef_full = qr.solve(response);
  LinearFit fit;
  fit.with_intercept = with_intercept;
  if (with_intercept) {
    fit.intercept = coef_full.row(0);
    fit.coefficients = coef_full.bottomRows(q);
  } else {
    fit.intercept = RowVector::Zero(response.cols());
    fit.coefficients = coef_full;
  }
  fit.residuals = response - d * coef_full;
  return fit;
}

ScaledSvd scaled_svd(const Matrix& a) {
  const Index n = a.rows(), k = a.cols();
  if (n <= k) throw InsufficientRows("scaled_svd: need more rows than columns");
  const Vector means = column_means(a);
  if (means.cwiseAbs().maxCoeff() > 1e-6)
    throw InvalidParam("scaled_svd: input columns are not centered");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (!(s[k - 1] > kRankTol * s[0]))
    throw RankDeficient("scaled_svd: input numerically rank deficient");
  const double scale = std::sqrt(static_cast<double>(n - 1));
  return {svd.matrixU() * scale, s, svd.matrixV() / scale};
}

Matrix sample_covariance(const Matrix& columns) {
  if (columns.rows() < 2)
    throw InsufficientRows("sample_covariance: need at least 2 rows");
  const Matrix centered = columns.rowwise() - columns.colwise().mean();
  return centered.transpose() * centered /
         static_cast<double>(columns.rows() - 1);
}

double correlation(const Vector& x, const Vector& y) {
  if (x.size() != y.size())
    throw DimensionMismatch("correlation: length mismatch");
  if (x.size() < 3) throw InsufficientRows("correlation: need at least 3 rows");
  const double denom = static_cast<double>(x.size() - 1);
  const Vector cx = x.array() - x.mean();
  const Vector cy = y.array() - y.mean();
  const double vx = cx.squaredNorm() / denom;
  const double vy = cy.squaredNorm() / denom;
  if (vx < kResidualVarTol || vy < kResidualVarTol)
    throw DegenerateResidual("correlation: (near-)constant input");
  return std::clamp(cx.dot(cy) / denom / std::sqrt(vx * vy), -1.0, 1.0);
}

double partial_correlation(const Vector& x, const Vector& y, const Vector& z) {
  if (x.size() != y.size() || x.size() != z.size())
    throw DimensionMismatch("partial_correlation: length mismatch");
  if (x.size() < 4)
    throw InsufficientRows("partial_correlation: need at least 4 rows");
  const double denom = static_cast<double>(x.size() - 1);
  const Vector cz = z.array() - z.mean();
  const double vz = cz.squaredNorm() / denom;
  if (!(vz > 0.0))
    throw ConstantColumn("partial_correlation: conditioning variable constant");
  const Vector cx = x.array() - x.mean();
  const Vector cy = y.array() - y.mean();
  const Vector ex = cx - (cx.dot(cz) / cz.squaredNorm()) * cz;
  const Vector ey = cy - (cy.dot(cz) / cz.squaredNorm()) * cz;
  const double vex = ex.squaredNorm() / denom;
  const double vey = ey.squaredNorm() / denom;
  if (vex < kResidualVarTol || vey < kResidualVarTol)
    throw DegenerateResidual("partial_correlation: residual variance below 1e-12");
  return std::clamp(ex.dot(ey) / denom / std::sqrt(vex * vey), -1.0, 1.0);
}

double SplineComponent::evaluate(double x) const {
  const double lo = knots[0], hi = knots[knots.size() - 1];
  const double xc = std::clamp(x, lo, hi);
  return basis_row_order(knots, xc, kSplineOrder).dot(coef) - center;
}

Vector AdditiveComponent::evaluate(const Vector& x) const {
  Vector out(x.size());
  if (const auto* spline = std::get_if<SplineComponent>(&fn)) {
    for (Index i = 0; i < x.size(); ++i) out[i] = spline->evaluate(x[i]);
  } else {
    const auto& step = std::get<StepComponent>(fn);
    for (Index i = 0; i < x.size(); ++i) out[i] = step.evaluate(x[i]);
  }
  return out;
}

Vector AdditiveFit::predict(const Matrix& covariates) const {
  if (covariates.cols() != static_cast<Index>(components.size()))
    throw DimensionMismatch("predict: covariate count does not match fit");
  Vector out = Vector::Constant(covariates.rows(), intercept);
  for (std::size_t j = 0; j < components.size(); ++j)
    out += components[j].evaluate(covariates.col(static_cast<Index>(j)));
  return out;
}

AdditiveFit backfit(const Vector& target, const Matrix& covariates) {
  const Index n = target.size(), p = covariates.cols();
  if (covariates.rows() != n)
    throw DimensionMismatch("backfit: target and covariates disagree on rows");
  if (p < 1) throw DimensionMismatch("backfit: no covariates");
  if (n < 50) throw InsufficientRows("backfit: need at least 50 rows");

  // One smoother per covariate; binary columns get group means.
  std::vector<std::variant<SplineSmoother, StepSmoother>> smoothers;
  smoothers.reserve(p);
  for (Index j = 0; j < p; ++j) {
    std::vector<double> distinct(covariates.col(j).data(),
                                 covariates.col(j).data() + n);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    if (distinct.size() < 2)
      throw ConstantColumn("backfit: covariate " + std::to_string(j) +
                           " is constant");
    if (distinct.size() == 2)
      smoothers.emplace_back(std::in_place_type<StepSmoother>,
                             covariates.col(j), distinct[0], distinct[1]);
    else
      smoothers.emplace_back(std::in_place_type<SplineSmoother>,
                             covariates.col(j));
  }

  const double mu = target.mean();
  std::vector<Vector> fitted(p, Vector::Zero(n));
  std::vector<double> centers(p, 0.0);
  Vector total = Vector::Zero(n);
  int sweeps = 0;
  bool converged = false;
  while (sweeps < kMaxSweeps && !converged) {
    ++sweeps;
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const Vector partial =
          target.array() - mu - (total - fitted[j]).array();
      Vector vals = std::visit([&](auto& s) { return s.fit(partial); },
                               smoothers[j]);
      centers[j] = vals.mean();
      vals.array() -= centers[j];
      max_change =
          std::max(max_change, (vals - fitted[j]).lpNorm<Eigen::Infinity>());
      total += vals - fitted[j];
      fitted[j] = std::move(vals);
    }
    converged = max_change <= kBackfitTol;
  }
  if (!converged)
    throw NoConvergence("backfit: no convergence in " +
                        std::to_string(kMaxSweeps) + " sweeps");

  AdditiveFit fit;
  fit.intercept = mu;
  fit.sweeps = sweeps;
  fit.residuals = target.array() - mu - total.array();
  fit.components.reserve(p);
  for (Index j = 0; j < p; ++j) {
    AdditiveComponent comp;
    if (auto* spline = std::get_if<SplineSmoother>(&smoothers[j])) {
      comp.fn = SplineComponent{spline->knots, spline->last_coef, centers[j]};
    } else {
      const auto& step = std::get<StepSmoother>(smoothers[j]);
      comp.fn = StepComponent{0.5 * (step.x_low + step.x_high),
                              step.last_low - centers[j],
                              step.last_high - centers[j]};
    }
    fit.components.push_back(std::move(comp));
  }
  return fit;
}

}  // namespace deconfound
