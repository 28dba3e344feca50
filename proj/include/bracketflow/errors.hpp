#pragma once

#include <stdexcept>
#include <string>

namespace bracketflow {

// Base class for all library errors. kind() gives a stable machine-readable
// tag (the class name) for structured error reports.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const { return "Error"; }
};

#define BRACKETFLOW_DEFINE_ERROR(Name)                                       \
  struct Name : Error {                                                      \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {}     \
    const char* kind() const override { return #Name; }                      \
  }

// bracket_space
BRACKETFLOW_DEFINE_ERROR(IndexOutOfRange);
BRACKETFLOW_DEFINE_ERROR(ConflictingEntry);
BRACKETFLOW_DEFINE_ERROR(SingularMatrix);
BRACKETFLOW_DEFINE_ERROR(NonpositiveScale);
BRACKETFLOW_DEFINE_ERROR(DimensionMismatch);
BRACKETFLOW_DEFINE_ERROR(NotALieBracket);

// curvature
BRACKETFLOW_DEFINE_ERROR(ZeroBracket);
BRACKETFLOW_DEFINE_ERROR(SplittingViolation);
BRACKETFLOW_DEFINE_ERROR(ScalModNonnegative);

// stratification
BRACKETFLOW_DEFINE_ERROR(NoConvergence);
BRACKETFLOW_DEFINE_ERROR(FlatBracket);
BRACKETFLOW_DEFINE_ERROR(DecompositionSingular);
BRACKETFLOW_DEFINE_ERROR(NegativeComponent);
BRACKETFLOW_DEFINE_ERROR(GaugeFailed);

// flows
BRACKETFLOW_DEFINE_ERROR(JacobiDrift);
BRACKETFLOW_DEFINE_ERROR(NonTriangularGauge);
BRACKETFLOW_DEFINE_ERROR(OutOfRange);

// catalog / cli
BRACKETFLOW_DEFINE_ERROR(UnknownEntry);
BRACKETFLOW_DEFINE_ERROR(BadConfig);

#undef BRACKETFLOW_DEFINE_ERROR

}  // namespace bracketflow
