#pragma once

#include "recdel/models.hpp"

namespace recdel {

/// Parameter change w - w_{-i} from deleting row i, with the leverage and
/// residual the closed form is built from.
struct InfluenceVector {
  Vector d;            // parameter-space difference
  Index index = -1;    // deleted row
  double residual = 0.0;
  double leverage = 0.0;
};

/// d_i = (X'X)^{-1} x_i r_i / (1 - h_ii); requires the model to be the full
/// unweighted fit. Deletions with h_ii > 1 - 1e-12 are rejected.
InfluenceVector loo_linear(const LinearModel& m, const Dataset& ds, Index i);

/// All single-deletion influence vectors, sharing one factorization.
std::vector<InfluenceVector> loo_linear_all(const LinearModel& m, const Dataset& ds);

/// Rank-one leave-one-out update of the dual weights,
///   w_{-i} = (Q^{-1} - q_i q_i' / q_ii) y,  Q = K + beta I,
/// with the deleted coordinate set to exactly zero.
NtkModel loo_ntk(const NtkModel& m, const Dataset& ds, Index i);

enum class LossKind { squared, logistic };

/// Cached pieces for w_IJ(omega) = w - H^{-1} G_{omega - 1}: the factorized
/// Hessian of the mean loss at the full fit plus all per-sample gradients.
class JackknifeContext {
 public:
  static JackknifeContext for_linear(const Dataset& ds, const LinearModel& m);
  static JackknifeContext for_logistic(const Dataset& ds, const LogisticModel& m);

  /// One-Newton-step approximation to the re-weighted fit.
  Vector update(const DataWeights& omega) const;
  Vector update(const Vector& omega) const;

  /// H^{-1} g_i / n for every sample, the per-deletion step directions.
  const Matrix& solved_gradients() const { return solved_grads_; }
  const Vector& base_weights() const { return w_; }

 private:
  JackknifeContext(const Dataset& ds, Vector w, Matrix grads, Matrix hessian);

  Vector w_;            // base parameters
  Matrix grads_;        // n x d per-sample loss gradients
  Matrix solved_grads_; // n x d rows H^{-1} g_i / n
  Eigen::LDLT<Matrix> hess_ldlt_;
};

struct ModelHyper {
  double beta = 5.0;  // ntk ridge
  double l2 = 1.0;    // logistic regularization
};

enum class ModelKind { linear, ntk, logistic };

/// Ground-truth refit on the omega-masked data; the oracle the approximate
/// updates are checked against.
FittedModel refit_exact(const Dataset& ds, const DataWeights& omega, ModelKind kind,
                        const ModelHyper& hyper);

}  // namespace recdel
