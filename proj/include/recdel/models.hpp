#pragma once

#include <variant>

#include "recdel/data.hpp"
#include "recdel/types.hpp"

namespace recdel {

/// Binary inclusion vector over training points. Entry 0 deletes the point.
class DataWeights {
 public:
  explicit DataWeights(Index n) : w_(Vector::Ones(n)) {}

  static DataWeights from_vector(const Vector& w);

  Index size() const { return w_.size(); }
  double operator[](Index i) const { return w_[i]; }
  void set(Index i, bool keep);
  bool is_all_ones() const;
  Index active_count() const { return static_cast<Index>(w_.sum()); }
  const Vector& vec() const { return w_; }

  std::vector<int> removed_indices() const;

 private:
  Vector w_;
};

struct LinearModel {
  Vector w;  // length d
};

struct NtkModel {
  Vector w;        // dual weights, length n; exact zeros at deleted indices
  Matrix X_train;  // n x d
  double beta = 0.0;
  Vector omega_fit;  // weights used at fit time
};

struct LogisticModel {
  Vector w;  // length d
  double l2 = 0.0;
  bool converged = false;
  double grad_norm = 0.0;
  int iterations = 0;
};

using FittedModel = std::variant<LinearModel, NtkModel, LogisticModel>;

/// Weighted least squares w = (X' O X)^{-1} X' O y with O = diag(omega).
/// Cholesky on the weighted Gram matrix, rank-revealing QR fallback.
LinearModel fit_linear_weighted(const Dataset& ds, const DataWeights& omega);

/// Weighted least squares on explicit (possibly fractional) weights.
Vector linear_weighted_solve(const Matrix& X, const Vector& y, const Vector& omega);

double predict_linear(const LinearModel& m, const Vector& x);

/// Arc-cosine kernel K(x0, x) = x0'x (pi - arccos(cos angle)) / (2 pi).
/// K(x, 0) := 0 by convention; the cosine argument is clamped to [-1, 1].
double ntk_kernel(const Vector& x0, const Vector& x);

/// Entrywise kernel matrix between the rows of A and B; OpenMP-parallel.
Matrix ntk_gram(const Matrix& A, const Matrix& B);

/// Serial reference for ntk_gram, kept for testing and benchmarking.
Matrix ntk_gram_serial(const Matrix& A, const Matrix& B);

/// Kernel ridge fit w = O^{1/2} (O^{1/2} K O^{1/2} + beta I)^{-1} O^{1/2} y.
/// Dual weights at deleted indices are exactly zero.
NtkModel fit_ntk_weighted(const Dataset& ds, const DataWeights& omega, double beta);

/// Dual solve for explicit fractional weights; returns the dual vector
/// w = S z with S = diag(sqrt(omega)) and the inner solution z.
struct NtkDualSolution {
  Vector w;
  Vector z;
};
NtkDualSolution ntk_weighted_dual(const Matrix& K, const Vector& y,
                                  const Vector& omega, double beta);

double predict_ntk(const NtkModel& m, const Vector& x);

/// Gradient of predict_ntk at x; analytic derivative of the arc-cosine form
/// with the cosine argument clamped to [-1 + 1e-12, 1 - 1e-12].
Vector ntk_input_gradient(const NtkModel& m, const Vector& x);

/// Gradient of ntk_kernel(x, x0) with respect to x.
Vector ntk_kernel_input_gradient(const Vector& x, const Vector& x0);

/// Monte-Carlo estimate of P[w'xi >= 0 and w'xj >= 0] for w ~ N(0, I).
/// Sampling is chunked with counter-based seeds, so the count is identical
/// for the serial and parallel versions and for any thread count.
double mc_coactivation_probability(const Vector& xi, const Vector& xj,
                                   std::int64_t samples, std::uint64_t seed);
double mc_coactivation_probability_serial(const Vector& xi, const Vector& xj,
                                          std::int64_t samples, std::uint64_t seed);

/// Weighted logistic regression (labels in {0,1}) by damped Newton, run to
/// gradient norm <= 1e-8 or 100 iterations. Objective:
///   sum_i omega_i * ce(y_i, sigmoid(w'x_i)) + l2/2 * |w|^2.
LogisticModel fit_logistic_weighted(const Dataset& ds, const DataWeights& omega,
                                    double l2);

double predict_logistic_score(const LogisticModel& m, const Vector& x);

/// Score function (model output as a plain callable) for each model kind.
/// Logistic models score with the logit.
ScoreFn make_score_fn(const FittedModel& m);

}  // namespace recdel
