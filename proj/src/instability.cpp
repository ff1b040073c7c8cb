#include "recdel/instability.hpp"

#include <cmath>
#include <sstream>

namespace recdel {

double outcome_instability(const ScoreFn& f_old, const ScoreFn& f_new,
                           const Vector& x_cf) {
  return std::abs(f_old(x_cf) - f_new(x_cf));
}

bool outcome_invalidation(const ScoreFn& f_new, const Vector& x_cf, double s) {
  return f_new(x_cf) <= s;
}

double action_instability(const Vector& delta_old, const Vector& delta_new, double p) {
  if (delta_old.size() != delta_new.size()) {
    throw Error("action_instability: dimension mismatch");
  }
  if (p < 1.0) throw ConfigError("action_instability: p must be >= 1");
  if (std::isinf(p)) return (delta_old - delta_new).cwiseAbs().maxCoeff();
  const Eigen::ArrayXd diff = (delta_old - delta_new).array().abs();
  return std::pow(diff.pow(p).sum(), 1.0 / p);
}

double bound_outcome_linear(const Dataset& ds, const LinearModel& m,
                            const Vector& x_cf) {
  double max_norm = 0.0;
  for (const auto& iv : loo_linear_all(m, ds)) {
    max_norm = std::max(max_norm, iv.d.norm());
  }
  return x_cf.norm() * max_norm;
}

double bound_outcome_ntk(const Dataset& ds, const NtkModel& m, const Vector& x_cf) {
  const Index n = ds.n();
  Matrix Q = ntk_gram(ds.X, ds.X);
  Q.diagonal().array() += m.beta;
  const Matrix Qinv = Q.llt().solve(Matrix::Identity(n, n));
  double max_norm = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector qi = Qinv.col(i);
    // d_i = q_i (q_i' y) / q_ii
    max_norm = std::max(max_norm, qi.norm() * std::abs(qi.dot(ds.y)) / Qinv(i, i));
  }
  Vector kx(n);
  for (Index i = 0; i < n; ++i) kx[i] = ntk_kernel(x_cf, ds.X.row(i).transpose());
  return kx.norm() * max_norm;
}

double bound_action_linear(const Dataset& ds, const LinearModel& m, const Vector& x) {
  const auto influences = loo_linear_all(m, ds);
  double max_d = 0.0;
  double min_w = m.w.norm();
  for (const auto& iv : influences) {
    const Vector w_minus = m.w - iv.d;
    if (m.w.dot(w_minus) < 0.0) {
      std::ostringstream oss;
      oss << "bound_action_linear: diametrical weight change at index " << iv.index
          << " (w'w_{-i} = " << m.w.dot(w_minus) << " < 0)";
      throw NumericError(oss.str());
    }
    max_d = std::max(max_d, iv.d.norm());
    min_w = std::min(min_w, w_minus.norm());
  }
  if (min_w == 0.0) {
    throw NumericError("bound_action_linear: vanishing weight norm along a deletion");
  }
  return max_d * 4.0 * std::sqrt(2.0) * x.norm() / min_w;
}

PathBound bound_action_path(const std::function<Vector(const Vector&)>& delta_fn,
                            const Vector& w_a, const Vector& w_b, int segments) {
  if (segments < 1) throw ConfigError("bound_action_path: segments must be >= 1");
  PathBound out;
  out.measured = (delta_fn(w_a) - delta_fn(w_b)).norm();
  const Vector diff = w_a - w_b;
  const double dist = diff.norm();
  if (dist == 0.0) return out;

  double integral = 0.0;
  for (int k = 0; k < segments; ++k) {
    const double gamma = (static_cast<double>(k) + 0.5) / segments;
    const Vector w_mid = w_b + gamma * diff;
    const double h = 1e-6 * std::max(1.0, w_mid.norm());
    // Central finite-difference Jacobian of the recourse map at w_mid.
    Matrix jac;
    Vector probe = w_mid;
    for (Index j = 0; j < w_mid.size(); ++j) {
      probe[j] = w_mid[j] + h;
      const Vector up = delta_fn(probe);
      probe[j] = w_mid[j] - h;
      const Vector down = delta_fn(probe);
      probe[j] = w_mid[j];
      if (jac.size() == 0) jac.resize(up.size(), w_mid.size());
      jac.col(j) = (up - down) / (2.0 * h);
    }
    if (!jac.allFinite()) {
      throw NumericError("bound_action_path: non-finite Jacobian along the path");
    }
    const double op_norm = jac.jacobiSvd().singularValues()[0];
    integral += op_norm / segments;
  }
  out.bound = integral * dist;
  return out;
}

}  // namespace recdel
