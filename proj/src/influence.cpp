#include "recdel/influence.hpp"

#include <cmath>
#include <sstream>

namespace recdel {

namespace {

constexpr double kLeverageGuard = 1.0 - 1e-12;

Eigen::LDLT<Matrix> factor_gram(const Dataset& ds) {
  const Matrix gram = ds.X.transpose() * ds.X;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError("loo_linear: X'X is not factorizable");
  }
  return ldlt;
}

InfluenceVector loo_from_factor(const Eigen::LDLT<Matrix>& gram_ldlt,
                                const LinearModel& m, const Dataset& ds, Index i) {
  if (i < 0 || i >= ds.n()) throw Error("loo_linear: index out of range");
  const Vector xi = ds.X.row(i).transpose();
  const Vector gx = gram_ldlt.solve(xi);
  const double h = xi.dot(gx);
  if (h > kLeverageGuard) {
    std::ostringstream oss;
    oss << "loo_linear: leverage h_" << i << i << " = " << h
        << " too close to 1; deletion leaves a rank-deficient fit";
    throw NumericError(oss.str());
  }
  InfluenceVector iv;
  iv.index = i;
  iv.residual = ds.y[i] - m.w.dot(xi);
  iv.leverage = h;
  iv.d = gx * (iv.residual / (1.0 - h));
  return iv;
}

}  // namespace

InfluenceVector loo_linear(const LinearModel& m, const Dataset& ds, Index i) {
  return loo_from_factor(factor_gram(ds), m, ds, i);
}

std::vector<InfluenceVector> loo_linear_all(const LinearModel& m, const Dataset& ds) {
  const auto ldlt = factor_gram(ds);
  std::vector<InfluenceVector> out;
  out.reserve(static_cast<std::size_t>(ds.n()));
  for (Index i = 0; i < ds.n(); ++i) out.push_back(loo_from_factor(ldlt, m, ds, i));
  return out;
}

NtkModel loo_ntk(const NtkModel& m, const Dataset& ds, Index i) {
  if (i < 0 || i >= ds.n()) throw Error("loo_ntk: index out of range");
  if (m.omega_fit.minCoeff() != 1.0) {
    throw Error("loo_ntk: model must be the full fit (omega = 1)");
  }
  Matrix Q = ntk_gram(ds.X, ds.X);
  Q.diagonal().array() += m.beta;
  const Eigen::LLT<Matrix> llt(Q);
  if (llt.info() != Eigen::Success) {
    throw NumericError("loo_ntk: kernel system is not positive definite");
  }
  // i-th column of Q^{-1}.
  Vector qi = llt.solve(Vector::Unit(ds.n(), i));
  const double qii = qi[i];
  if (qii == 0.0) throw NumericError("loo_ntk: zero diagonal in the inverse");

  NtkModel updated = m;
  updated.w = m.w - qi * (qi.dot(ds.y) / qii);
  updated.w[i] = 0.0;  // exact zero at the deleted coordinate
  updated.omega_fit[i] = 0.0;
  return updated;
}

JackknifeContext::JackknifeContext(const Dataset& ds, Vector w, Matrix grads,
                                   Matrix hessian)
    : w_(std::move(w)), grads_(std::move(grads)) {
  hess_ldlt_.compute(hessian);
  const Vector pivots = hess_ldlt_.vectorD().cwiseAbs();
  if (hess_ldlt_.info() != Eigen::Success ||
      !(pivots.minCoeff() > pivots.maxCoeff() * 1e-12)) {
    throw NumericError("jackknife: Hessian of the mean loss is singular");
  }
  const double n = static_cast<double>(ds.n());
  solved_grads_.resize(grads_.rows(), grads_.cols());
  for (Index i = 0; i < grads_.rows(); ++i) {
    solved_grads_.row(i) = hess_ldlt_.solve(grads_.row(i).transpose()).transpose() / n;
  }
}

JackknifeContext JackknifeContext::for_linear(const Dataset& ds, const LinearModel& m) {
  const Index n = ds.n();
  const double dn = static_cast<double>(n);
  // Squared loss l_i = (y_i - w'x_i)^2 / 2: gradient -x_i r_i, Hessian x_i x_i'.
  Matrix grads(n, ds.d());
  for (Index i = 0; i < n; ++i) {
    const double r = ds.y[i] - m.w.dot(ds.X.row(i).transpose());
    grads.row(i) = -r * ds.X.row(i);
  }
  const Matrix hess = ds.X.transpose() * ds.X / dn;
  return JackknifeContext(ds, m.w, std::move(grads), hess);
}

JackknifeContext JackknifeContext::for_logistic(const Dataset& ds,
                                                const LogisticModel& m) {
  const Index n = ds.n();
  const double dn = static_cast<double>(n);
  Matrix grads(n, ds.d());
  Matrix hess = m.l2 * Matrix::Identity(ds.d(), ds.d());
  for (Index i = 0; i < n; ++i) {
    const double z = ds.X.row(i).dot(m.w);
    const double p = 1.0 / (1.0 + std::exp(-z));
    grads.row(i) = (p - ds.y[i]) * ds.X.row(i);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(ds.X.row(i).transpose(),
                                                    p * (1.0 - p));
  }
  hess = Matrix(hess.selfadjointView<Eigen::Lower>()) / dn;
  return JackknifeContext(ds, m.w, std::move(grads), hess);
}

Vector JackknifeContext::update(const Vector& omega) const {
  if (omega.size() != grads_.rows()) throw Error("jackknife: weight length mismatch");
  // w - H^{-1} G, G = (1/n) sum (omega_i - 1) g_i; affine in omega.
  Vector w = w_;
  for (Index i = 0; i < omega.size(); ++i) {
    const double c = omega[i] - 1.0;
    if (c != 0.0) w -= c * solved_grads_.row(i).transpose();
  }
  return w;
}

Vector JackknifeContext::update(const DataWeights& omega) const {
  return update(omega.vec());
}

FittedModel refit_exact(const Dataset& ds, const DataWeights& omega, ModelKind kind,
                        const ModelHyper& hyper) {
  switch (kind) {
    case ModelKind::linear:
      return fit_linear_weighted(ds, omega);
    case ModelKind::ntk:
      return fit_ntk_weighted(ds, omega, hyper.beta);
    case ModelKind::logistic:
      return fit_logistic_weighted(ds, omega, hyper.l2);
  }
  throw Error("refit_exact: unknown model kind");
}

}  // namespace recdel
