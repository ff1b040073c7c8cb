#pragma once

#include <functional>

#include "recdel/data.hpp"
#include "recdel/types.hpp"

namespace recdel {

/// Differentiable kernels for the counterfactual sensitivity analysis.
/// Custom kernels fall back to central finite differences for the gradient.
class SensKernel {
 public:
  static SensKernel linear();
  static SensKernel rbf(double gamma);
  static SensKernel ntk();
  static SensKernel custom(std::function<double(const Vector&, const Vector&)> k);

  double operator()(const Vector& x, const Vector& x2) const;
  Vector grad_x(const Vector& x, const Vector& x2) const;

  bool is_ntk() const { return kind_ == Kind::ntk; }

 private:
  enum class Kind { linear, rbf, ntk, custom };
  SensKernel(Kind kind, double gamma,
             std::function<double(const Vector&, const Vector&)> k)
      : kind_(kind), gamma_(gamma), custom_(std::move(k)) {}

  Kind kind_;
  double gamma_ = 1.0;
  std::function<double(const Vector&, const Vector&)> custom_;
};

/// Kernel feature vector k_X(x) = [k(x, X_i)]_i.
Vector kernel_vector(const SensKernel& k, const Matrix& X, const Vector& x);

/// n x d Jacobian of k_X at x: row i = grad_x k(x, X_i).
Matrix kernel_jacobian(const SensKernel& k, const Matrix& X, const Vector& x);

/// Everything the rank-one sensitivity closed form needs at a counterfactual
/// x_cf with k_X(x_cf)'w = t: the kernel Jacobian J, v = J'w and u = -k_X(x_cf).
struct KernelCounterfactualContext {
  Matrix X;
  SensKernel kernel = SensKernel::linear();
  Vector w;
  Vector x_cf;
  double t = 0.0;
  Matrix J_kX;  // n x d
  Vector v;     // J_kX' w
  Vector u;     // -k_X(x_cf)
  bool degenerate = false;  // v = 0
};

KernelCounterfactualContext build_context(const Dataset& ds, const SensKernel& kernel,
                                          const Vector& w, const Vector& x_cf,
                                          double t);

/// Minimal-norm Jacobian action (v u' / |v|^2) dw. If v = 0: the zero vector
/// when u = 0, otherwise there is no solution and an error is raised.
Vector jacobian_action(const KernelCounterfactualContext& ctx, const Vector& dw);

struct FirstOrderUpdate {
  Vector x;                 // x_cf + eps * jacobian_action(dw)
  bool normalized = false;  // set when dw had to be normalized to unit length
};

/// First-order counterfactual under the weight perturbation w + eps * dw.
FirstOrderUpdate first_order_update(const KernelCounterfactualContext& ctx,
                                    const Vector& dw, double eps);

/// Numeric ground truth: the nearest point to x_start with k_X(x)'w_new = t,
/// by quadratic-penalty continuation (penalty up to 1e6) plus a final
/// constraint-restoration polish.
Vector minimal_change_counterfactual_oracle(const Dataset& ds, const SensKernel& kernel,
                                            const Vector& w_new, const Vector& x_start,
                                            double t);

}  // namespace recdel
