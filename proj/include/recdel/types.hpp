#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace recdel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Scalar scoring function over feature vectors.
using ScoreFn = std::function<double(const Vector&)>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration or CLI input; maps to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed or inconsistent input data.
struct DataError : Error {
  using Error::Error;
};

/// Singular systems, divergence, leverage guards; maps to exit code 1.
struct NumericError : Error {
  using Error::Error;
};

/// The constrained problem has no solution (v = 0 with u != 0).
struct NoSolutionError : NumericError {
  using NumericError::NumericError;
};

}  // namespace recdel
