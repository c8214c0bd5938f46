#pragma once

#include <stdexcept>
#include <string>

namespace picmatch {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rank deficiency / ill-conditioning of a design or covariance matrix.
struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SeparationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double last_score_norm)
      : std::runtime_error(what), score_norm(last_score_norm) {}
  double score_norm;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace picmatch
