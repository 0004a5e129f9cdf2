#pragma once

#include <stdexcept>
#include <string>

namespace deconfound {

// Base class for all library errors so callers can catch the whole family.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DECONFOUND_DEFINE_ERROR(NAME)                             \
  class NAME : public Error {                                     \
   public:                                                        \
    explicit NAME(const std::string& what) : Error(what) {}       \
  }

DECONFOUND_DEFINE_ERROR(ConstantColumn);      // zero-variance column where variation is required
DECONFOUND_DEFINE_ERROR(DimensionMismatch);   // incompatible row/column counts
DECONFOUND_DEFINE_ERROR(InsufficientRows);    // not enough observations for the requested fit
DECONFOUND_DEFINE_ERROR(RankDeficient);       // design matrix numerically rank deficient
DECONFOUND_DEFINE_ERROR(DegenerateResidual);  // residual variance too small to correlate
DECONFOUND_DEFINE_ERROR(NoConvergence);       // iterative fit exceeded its sweep budget
DECONFOUND_DEFINE_ERROR(NotPositiveDefinite); // covariance input fails a Cholesky check
DECONFOUND_DEFINE_ERROR(NotStandardized);     // parameters inconsistent with unit-variance scaling
DECONFOUND_DEFINE_ERROR(InvalidParam);        // parameter outside its admissible range
DECONFOUND_DEFINE_ERROR(SingleClass);         // classification target has one class only
DECONFOUND_DEFINE_ERROR(Separation);          // logistic fit diverging (separable data)
DECONFOUND_DEFINE_ERROR(EmptyResults);        // summary requested over zero replications

#undef DECONFOUND_DEFINE_ERROR

}  // namespace deconfound
