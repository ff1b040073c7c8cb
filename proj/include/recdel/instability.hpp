#pragma once

#include <optional>

#include "recdel/influence.hpp"
#include "recdel/models.hpp"

namespace recdel {

/// |f_old(x_cf) - f_new(x_cf)|: score drift at a fixed prescribed recourse.
double outcome_instability(const ScoreFn& f_old, const ScoreFn& f_new,
                           const Vector& x_cf);

/// True iff the recourse no longer clears the target; ties invalidate.
bool outcome_invalidation(const ScoreFn& f_new, const Vector& x_cf, double s);

/// p-norm distance between two recourse actions for the same factual.
double action_instability(const Vector& delta_old, const Vector& delta_new, double p);

/// |x_cf|_2 * max_i |d_i|_2 over all single deletions of the linear fit.
double bound_outcome_linear(const Dataset& ds, const LinearModel& m, const Vector& x_cf);

/// |K(x_cf, X)|_2 * max_i |d_i|_2 with d_i = q_i q_i' y / q_ii taken from the
/// columns of (K + beta I)^{-1}.
double bound_outcome_ntk(const Dataset& ds, const NtkModel& m, const Vector& x_cf);

/// (max_i |d_i|) * 4 sqrt(2) |x| / min(|w|, min_i |w_{-i}|); only claimed in
/// the s = 0, lambda -> 0 regime and only when w'w_{-i} >= 0 for every i.
double bound_action_linear(const Dataset& ds, const LinearModel& m, const Vector& x);

/// Midpoint quadrature of the recourse Jacobian's operator norm along the
/// segment between two parameter vectors, times the segment length. The
/// Jacobian comes from central finite differences.
struct PathBound {
  double bound = 0.0;     // quadrature of |D delta / D w| times |w_a - w_b|
  double measured = 0.0;  // |delta(w_a) - delta(w_b)|
};
PathBound bound_action_path(const std::function<Vector(const Vector&)>& delta_fn,
                            const Vector& w_a, const Vector& w_b, int segments);

/// Per-test-point audit row produced by the instability sweep.
struct InstabilityRecord {
  double delta = 0.0;                  // measured outcome instability
  bool invalidated = false;
  std::optional<double> phi;           // measured action instability (p = 2)
  double bound_delta = 0.0;
  std::optional<double> bound_phi;     // absent if the bound precondition fails
  std::vector<int> deleted_indices;
};

}  // namespace recdel
