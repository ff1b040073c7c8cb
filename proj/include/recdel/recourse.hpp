#pragma once

#include "recdel/models.hpp"
#include "recdel/types.hpp"

namespace recdel {

struct RecourseConfig {
  double s = 0.0;              // target score
  double lambda = 1e-6;        // tradeoff weight on the squared step length
  int max_iters = 1000;        // gradient method budget
  double step_size = 0.05;     // gradient method step (standardized features)
  double validity_margin = 0;  // valid iff achieved >= s - validity_margin
};

enum class RecourseMethod { closed_linear, closed_ntk, gradient };

struct RecourseResult {
  Vector x;       // factual
  Vector delta;   // action
  Vector x_cf;    // x + delta
  double achieved_score = 0.0;
  bool valid = false;
  RecourseMethod method = RecourseMethod::closed_linear;
};

/// Closed-form minimizer of (w'(x+d) - s)^2 + lambda |d|^2:
///   d = (s - w'x) / (lambda + |w|^2) * w.
RecourseResult scfe_linear(const LinearModel& m, const Vector& x,
                           const RecourseConfig& cfg);

/// First-order step along the model's input gradient with the linear step
/// length; the achieved score is recomputed exactly, not Taylor-estimated.
RecourseResult scfe_ntk(const NtkModel& m, const Vector& x, const RecourseConfig& cfg);

/// Gradient descent on the squared-gap objective from delta = 0, stopping at
/// the first iterate whose score reaches s - validity_margin; otherwise the
/// best iterate by objective is returned with valid = false.
struct DifferentiableScore {
  ScoreFn value;
  std::function<Vector(const Vector&)> gradient;
};

/// Wraps a score function with central finite-difference gradients.
DifferentiableScore with_fd_gradient(ScoreFn f, double h = 1e-6);

/// Score and analytic gradient for a fitted model (constant w for the linear
/// scorers, the kernel input gradient for NTK).
DifferentiableScore make_differentiable_score(const FittedModel& m);

RecourseResult scfe_gradient(const DifferentiableScore& predict, const Vector& x,
                             const RecourseConfig& cfg);

}  // namespace recdel
