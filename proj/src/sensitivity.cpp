#include "recdel/sensitivity.hpp"

#include <cmath>
#include <sstream>

#include "recdel/models.hpp"

namespace recdel {

SensKernel SensKernel::linear() { return SensKernel(Kind::linear, 0.0, nullptr); }
SensKernel SensKernel::rbf(double gamma) {
  if (gamma <= 0.0) throw ConfigError("rbf kernel: gamma must be > 0");
  return SensKernel(Kind::rbf, gamma, nullptr);
}
SensKernel SensKernel::ntk() { return SensKernel(Kind::ntk, 0.0, nullptr); }
SensKernel SensKernel::custom(std::function<double(const Vector&, const Vector&)> k) {
  return SensKernel(Kind::custom, 0.0, std::move(k));
}

double SensKernel::operator()(const Vector& x, const Vector& x2) const {
  switch (kind_) {
    case Kind::linear:
      return x.dot(x2);
    case Kind::rbf:
      return std::exp(-gamma_ * (x - x2).squaredNorm());
    case Kind::ntk:
      return ntk_kernel(x, x2);
    case Kind::custom:
      return custom_(x, x2);
  }
  throw Error("unknown kernel");
}

Vector SensKernel::grad_x(const Vector& x, const Vector& x2) const {
  switch (kind_) {
    case Kind::linear:
      return x2;
    case Kind::rbf:
      return -2.0 * gamma_ * std::exp(-gamma_ * (x - x2).squaredNorm()) * (x - x2);
    case Kind::ntk:
      return ntk_kernel_input_gradient(x, x2);
    case Kind::custom: {
      const double h = 1e-6;
      Vector g(x.size());
      Vector probe = x;
      for (Index j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = custom_(probe, x2);
        probe[j] = x[j] - h;
        const double down = custom_(probe, x2);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
      }
      return g;
    }
  }
  throw Error("unknown kernel");
}

Vector kernel_vector(const SensKernel& k, const Matrix& X, const Vector& x) {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out[i] = k(x, X.row(i).transpose());
  return out;
}

Matrix kernel_jacobian(const SensKernel& k, const Matrix& X, const Vector& x) {
  Matrix J(X.rows(), x.size());
  for (Index i = 0; i < X.rows(); ++i) {
    J.row(i) = k.grad_x(x, X.row(i).transpose()).transpose();
  }
  return J;
}

KernelCounterfactualContext build_context(const Dataset& ds, const SensKernel& kernel,
                                          const Vector& w, const Vector& x_cf,
                                          double t) {
  if (w.size() != ds.n()) throw Error("build_context: weight length mismatch");
  if (x_cf.size() != ds.d()) throw Error("build_context: x_cf dimension mismatch");
  if (kernel.is_ntk() && x_cf.squaredNorm() == 0.0) {
    throw NumericError("build_context: zero counterfactual under the ntk kernel");
  }
  const Vector kx = kernel_vector(kernel, ds.X, x_cf);
  const double residual = kx.dot(w) - t;
  if (std::abs(residual) > 1e-6) {
    std::ostringstream oss;
    oss << "build_context: counterfactual constraint violated, |k_X(x_cf)'w - t| = "
        << std::abs(residual);
    throw NumericError(oss.str());
  }
  KernelCounterfactualContext ctx;
  ctx.X = ds.X;
  ctx.kernel = kernel;
  ctx.w = w;
  ctx.x_cf = x_cf;
  ctx.t = t;
  ctx.J_kX = kernel_jacobian(kernel, ds.X, x_cf);
  ctx.v = ctx.J_kX.transpose() * w;
  ctx.u = -kx;
  ctx.degenerate = ctx.v.norm() == 0.0;
  return ctx;
}

Vector jacobian_action(const KernelCounterfactualContext& ctx, const Vector& dw) {
  if (dw.size() != ctx.u.size()) throw Error("jacobian_action: dw length mismatch");
  const double vsq = ctx.v.squaredNorm();
  if (vsq == 0.0) {
    if (ctx.u.norm() < 1e-12) return Vector::Zero(ctx.x_cf.size());
    throw NoSolutionError(
        "jacobian_action: v = 0 with u != 0; the weight vector is not represented "
        "in the input space, the constrained problem has no solution");
  }
  return ctx.v * (ctx.u.dot(dw) / vsq);
}

FirstOrderUpdate first_order_update(const KernelCounterfactualContext& ctx,
                                    const Vector& dw, double eps) {
  if (std::abs(eps) > 0.1) {
    throw ConfigError("first_order_update: |eps| must be <= 0.1 for the linearization");
  }
  FirstOrderUpdate out;
  Vector unit = dw;
  const double norm = dw.norm();
  if (std::abs(norm - 1.0) > 1e-12) {
    if (norm == 0.0) throw Error("first_order_update: zero perturbation direction");
    unit /= norm;
    out.normalized = true;
  }
  out.x = ctx.x_cf + eps * jacobian_action(ctx, unit);
  return out;
}

Vector minimal_change_counterfactual_oracle(const Dataset& ds, const SensKernel& kernel,
                                            const Vector& w_new, const Vector& x_start,
                                            double t) {
  const auto constraint = [&](const Vector& x) {
    return kernel_vector(kernel, ds.X, x).dot(w_new) - t;
  };
  const auto constraint_grad = [&](const Vector& x) {
    return Vector(kernel_jacobian(kernel, ds.X, x).transpose() * w_new);
  };

  Vector x = x_start;
  constexpr double kFinalPenalty = 1e6;
  constexpr double kGradTol = 1e-10;
  for (double rho = 1.0; rho <= kFinalPenalty; rho *= 10.0) {
    const auto objective = [&](const Vector& p) {
      const double c = constraint(p);
      return (p - x_start).squaredNorm() + rho * c * c;
    };
    for (int iter = 0; iter < 200; ++iter) {
      const double c = constraint(x);
      const Vector cg = constraint_grad(x);
      const Vector grad = 2.0 * (x - x_start) + 2.0 * rho * c * cg;
      if (grad.norm() <= kGradTol * std::max(1.0, x.norm())) break;
      // Gauss-Newton step: the Hessian model 2I + 2 rho cg cg' inverts in
      // closed form, which handles the stiff penalty direction exactly.
      const double denom = 1.0 + rho * cg.squaredNorm();
      const Vector step =
          0.5 * (grad - cg * (rho * cg.dot(grad) / denom));
      const double f0 = objective(x);
      double scale = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Vector cand = x - scale * step;
        if (objective(cand) < f0) {
          x = cand;
          moved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!moved) break;
    }
  }

  // Stationarity at the final penalty level.
  {
    const double c = constraint(x);
    const Vector grad =
        2.0 * (x - x_start) + 2.0 * kFinalPenalty * c * constraint_grad(x);
    if (grad.norm() > 1e-6 * std::max(1.0, x.norm())) {
      throw NumericError("counterfactual oracle: penalized problem did not converge");
    }
  }

  // Constraint restoration along the constraint gradient.
  for (int iter = 0; iter < 50; ++iter) {
    const double c = constraint(x);
    if (std::abs(c) <= 1e-12) break;
    const Vector g = constraint_grad(x);
    const double gsq = g.squaredNorm();
    if (gsq == 0.0) break;
    x -= g * (c / gsq);
  }
  if (std::abs(constraint(x)) > 1e-6) {
    throw NumericError("counterfactual oracle: no feasible point reached");
  }
  return x;
}

}  // namespace recdel
