#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deconfound/core_linalg.hpp"
#include "deconfound/scm_sim.hpp"

namespace deconfound {

enum class AdjustMethod {
  linear_residualize,
  linear_causality_aware,
  additive_residualize,
  additive_causality_aware,
};

// CLI / config spellings: linear-res, linear-ca, additive-res, additive-ca.
std::string to_string(AdjustMethod m);
AdjustMethod adjust_method_from_string(const std::string& s);

// A train/test pair whose feature block has been replaced by adjusted
// features; confounders and outcomes pass through untouched. Carries the fit
// artifacts (one linear fit, or one additive fit per feature) for inspection.
struct AdjustedPair {
  Dataset train;
  Dataset test;
  AdjustMethod method;
  std::optional<LinearFit> linear_fit;
  std::vector<AdditiveFit> additive_fits;
};

// Residualization: one OLS of the features on the confounders over the
// concatenated train+test rows; adjusted features are the residuals of that
// pooled fit (intercept included and subtracted), so the pooled adjusted
// features are exactly uncorrelated with every confounder column.
AdjustedPair residualize(const Dataset& train, const Dataset& test);

// Causality-aware counterfactual adjustment: one training-set OLS of X on
// (A, Y). Train features add the estimated residuals back onto the Y
// component; test features subtract the estimated confounder component only,
// so the test outcome is never read.
AdjustedPair causality_aware(const Dataset& train, const Dataset& test);

// Additive-model variants of the above; smooth confounder (and, for the
// causality-aware variant, outcome) components fitted by backfit().
AdjustedPair additive_residualize(const Dataset& train, const Dataset& test);
AdjustedPair additive_causality_aware(const Dataset& train,
                                      const Dataset& test);

// Dispatch by method tag.
AdjustedPair adjust_with(AdjustMethod method, const Dataset& train,
                         const Dataset& test);

// Replace the confounder block of both splits by the scaled-SVD scores of the
// pooled confounder matrix. Both adjustments are invariant under this
// reparameterization; the harness uses it as a structural self-check.
std::pair<Dataset, Dataset> svd_reparameterize(const Dataset& train,
                                               const Dataset& test);

}  // namespace deconfound
