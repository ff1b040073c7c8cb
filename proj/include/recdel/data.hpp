#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recdel/types.hpp"

namespace recdel {

struct Dataset {
  Matrix X;  // n x d
  Vector y;  // n
  std::vector<std::string> feature_names;

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }
};

struct StandardizationState {
  Vector mean;   // per feature
  Vector scale;  // per feature, population sd, > 0
};

struct FoldSplit {
  std::vector<int> assignment;  // one fold id per test index
  int folds = 0;
};

struct RecourseTargeting {
  double s = 0.0;
  std::vector<bool> needs_recourse;  // true iff score < s
};

/// Loads a numeric CSV (UTF-8, comma-separated, header row, '.' decimal).
/// The named target column becomes y; all other columns become X in header
/// order. Exact duplicate rows are dropped, keeping the first occurrence.
Dataset load_csv(const std::string& path, const std::string& target_column);

/// Centers and scales every feature to mean 0 and population sd 1.
/// Constant features are rejected. y is left untouched.
std::pair<Dataset, StandardizationState> standardize(const Dataset& ds);

/// Inverse of standardize on the feature matrix.
Dataset unstandardize(const Dataset& ds, const StandardizationState& state);

/// Target score s = median of the scores (lower median for even length) and
/// the mask of points strictly below it.
RecourseTargeting median_target(const Vector& scores);

/// Balanced deterministic fold assignment for n_test points.
FoldSplit make_folds(int n_test, int folds, std::uint64_t seed);

/// Gaussian regression data y = X beta* + noise with a planted coefficient
/// vector. A fraction of rows gets its features scaled by 5 and its clean
/// target sign-flipped, so high-leverage, high-residual points exist by
/// construction.
Dataset synth_regression(int n, int d, double noise_sd, double outlier_fraction,
                         std::uint64_t seed);

/// Row indices that synth_regression marks as planted outliers for the same
/// arguments. Exposed so experiments can check hit rates.
std::vector<int> synth_outlier_indices(int n, double outlier_fraction,
                                       std::uint64_t seed);

}  // namespace recdel
