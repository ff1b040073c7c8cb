#include "recdel/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "recdel/parallel.hpp"
#include "recdel/rng.hpp"

namespace recdel {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_dims(Index got, Index want, const char* where) {
  if (got != want) {
    std::ostringstream oss;
    oss << where << ": dimension mismatch (" << got << " vs " << want << ")";
    throw Error(oss.str());
  }
}

std::string cond_string(double cond) {
  std::ostringstream oss;
  oss << cond;
  return oss.str();
}

// Solves A w = b for SPD A, falling back to rank-revealing QR on the
// sqrt-weighted design when A is numerically singular.
Vector solve_normal_equations(const Matrix& X, const Vector& y, const Vector& omega) {
  const Index d = X.cols();
  Matrix A = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (Index i = 0; i < X.rows(); ++i) {
    if (omega[i] == 0.0) continue;
    A.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), omega[i]);
    b += omega[i] * y[i] * X.row(i).transpose();
  }
  A = A.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    return llt.solve(b);
  }

  // Rank-revealing fallback on rows scaled by sqrt(omega).
  Index active = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    if (omega[i] > 0.0) ++active;
  }
  Matrix Xw(active, d);
  Vector yw(active);
  Index r = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    if (omega[i] == 0.0) continue;
    const double s = std::sqrt(omega[i]);
    Xw.row(r) = s * X.row(i);
    yw[r] = s * y[i];
    ++r;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(Xw);
  if (qr.rank() < d) {
    const auto diag = qr.matrixR().diagonal().cwiseAbs();
    const double cond = diag.size() > 0 && diag.minCoeff() > 0.0
                            ? diag.maxCoeff() / diag.minCoeff()
                            : std::numeric_limits<double>::infinity();
    std::ostringstream oss;
    oss << "weighted Gram matrix is rank-deficient: rank " << qr.rank() << " < " << d
        << " (condition estimate " << cond_string(cond) << ")";
    throw NumericError(oss.str());
  }
  return qr.solve(yw);
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace

DataWeights DataWeights::from_vector(const Vector& w) {
  DataWeights dw(w.size());
  bool any = false;
  for (Index i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0 && w[i] != 1.0) {
      throw DataError("data weights must be 0 or 1");
    }
    if (w[i] == 1.0) any = true;
  }
  if (!any) throw DataError("data weights must keep at least one point");
  dw.w_ = w;
  return dw;
}

void DataWeights::set(Index i, bool keep) {
  if (i < 0 || i >= w_.size()) throw Error("data weight index out of range");
  if (!keep && w_.sum() - w_[i] == 0.0) {
    throw DataError("data weights must keep at least one point");
  }
  w_[i] = keep ? 1.0 : 0.0;
}

bool DataWeights::is_all_ones() const { return w_.minCoeff() == 1.0; }

std::vector<int> DataWeights::removed_indices() const {
  std::vector<int> out;
  for (Index i = 0; i < w_.size(); ++i) {
    if (w_[i] == 0.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

LinearModel fit_linear_weighted(const Dataset& ds, const DataWeights& omega) {
  check_dims(omega.size(), ds.n(), "fit_linear_weighted");
  return LinearModel{solve_normal_equations(ds.X, ds.y, omega.vec())};
}

Vector linear_weighted_solve(const Matrix& X, const Vector& y, const Vector& omega) {
  check_dims(omega.size(), X.rows(), "linear_weighted_solve");
  return solve_normal_equations(X, y, omega);
}

double predict_linear(const LinearModel& m, const Vector& x) {
  check_dims(x.size(), m.w.size(), "predict_linear");
  return m.w.dot(x);
}

double ntk_kernel(const Vector& x0, const Vector& x) {
  check_dims(x.size(), x0.size(), "ntk_kernel");
  const double sa = x0.squaredNorm();
  const double sb = x.squaredNorm();
  if (sa == 0.0 || sb == 0.0) return 0.0;  // K(x, 0) := 0
  const double g = x0.dot(x);
  double u;
  if (g == sa && g == sb) {
    u = 1.0;  // identical vectors: keep K(x, x) = |x|^2 / 2 exact
  } else {
    u = std::clamp(g / std::sqrt(sa * sb), -1.0, 1.0);
  }
  return g * ((kPi - std::acos(u)) / (2.0 * kPi));
}

Matrix ntk_gram_serial(const Matrix& A, const Matrix& B) {
  check_dims(B.cols(), A.cols(), "ntk_gram");
  Matrix K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      K(i, j) = ntk_kernel(A.row(i).transpose(), B.row(j).transpose());
    }
  }
  return K;
}

Matrix ntk_gram(const Matrix& A, const Matrix& B) {
  check_dims(B.cols(), A.cols(), "ntk_gram");
  Matrix K(A.rows(), B.rows());
  const Index nb = B.rows();
  parallel_for(A.rows(), [&](std::int64_t i) {
    for (Index j = 0; j < nb; ++j) {
      K(static_cast<Index>(i), j) =
          ntk_kernel(A.row(static_cast<Index>(i)).transpose(), B.row(j).transpose());
    }
  });
  return K;
}

NtkDualSolution ntk_weighted_dual(const Matrix& K, const Vector& y,
                                  const Vector& omega, double beta) {
  if (beta <= 0.0) throw ConfigError("ntk fit: beta must be > 0");
  check_dims(K.rows(), y.size(), "ntk_weighted_dual");
  check_dims(omega.size(), y.size(), "ntk_weighted_dual");
  const Vector s = omega.cwiseSqrt();
  Matrix M = s.asDiagonal() * K * s.asDiagonal();
  M.diagonal().array() += beta;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw NumericError("ntk fit: weighted kernel system is not positive definite");
  }
  NtkDualSolution sol;
  sol.z = llt.solve(s.cwiseProduct(y));
  sol.w = s.cwiseProduct(sol.z);
  return sol;
}

NtkModel fit_ntk_weighted(const Dataset& ds, const DataWeights& omega, double beta) {
  check_dims(omega.size(), ds.n(), "fit_ntk_weighted");
  const Matrix K = ntk_gram(ds.X, ds.X);
  NtkDualSolution sol = ntk_weighted_dual(K, ds.y, omega.vec(), beta);
  for (Index i = 0; i < sol.w.size(); ++i) {
    if (omega[i] == 0.0) sol.w[i] = 0.0;
  }
  return NtkModel{std::move(sol.w), ds.X, beta, omega.vec()};
}

double predict_ntk(const NtkModel& m, const Vector& x) {
  check_dims(x.size(), m.X_train.cols(), "predict_ntk");
  double acc = 0.0;
  for (Index i = 0; i < m.X_train.rows(); ++i) {
    if (m.w[i] == 0.0) continue;
    acc += m.w[i] * ntk_kernel(x, m.X_train.row(i).transpose());
  }
  return acc;
}

Vector ntk_kernel_input_gradient(const Vector& x, const Vector& x0) {
  check_dims(x0.size(), x.size(), "ntk_kernel_input_gradient");
  const double sa = x.squaredNorm();
  if (sa == 0.0) throw NumericError("ntk gradient undefined at the zero vector");
  const double sb = x0.squaredNorm();
  if (sb == 0.0) return Vector::Zero(x.size());
  const double g = x.dot(x0);
  const double denom = std::sqrt(sa * sb);
  // 1/sqrt(1-u^2) is singular at colinearity, so the cosine is kept strictly
  // inside (-1, 1) here.
  const double u = std::clamp(g / denom, -1.0 + 1e-12, 1.0 - 1e-12);
  const double theta = (kPi - std::acos(u)) / (2.0 * kPi);
  const double dtheta_du = 1.0 / (2.0 * kPi * std::sqrt(1.0 - u * u));
  const Vector grad_u = (x0 - (g / sa) * x) / denom;
  return theta * x0 + (g * dtheta_du) * grad_u;
}

Vector ntk_input_gradient(const NtkModel& m, const Vector& x) {
  check_dims(x.size(), m.X_train.cols(), "ntk_input_gradient");
  if (x.squaredNorm() == 0.0) {
    throw NumericError("ntk_input_gradient: undefined at the zero vector");
  }
  Vector grad = Vector::Zero(x.size());
  for (Index i = 0; i < m.X_train.rows(); ++i) {
    if (m.w[i] == 0.0) continue;
    grad += m.w[i] * ntk_kernel_input_gradient(x, m.X_train.row(i).transpose());
  }
  return grad;
}

namespace {

constexpr std::int64_t kMcChunk = 8192;

std::int64_t mc_chunk_hits(const Vector& xi, const Vector& xj, std::int64_t count,
                           std::uint64_t chunk_seed) {
  Rng rng(chunk_seed);
  const Index d = xi.size();
  Vector w(d);
  std::int64_t hits = 0;
  for (std::int64_t s = 0; s < count; ++s) {
    for (Index k = 0; k < d; ++k) w[k] = rng.normal();
    if (w.dot(xi) >= 0.0 && w.dot(xj) >= 0.0) ++hits;
  }
  return hits;
}

}  // namespace

double mc_coactivation_probability_serial(const Vector& xi, const Vector& xj,
                                          std::int64_t samples, std::uint64_t seed) {
  check_dims(xj.size(), xi.size(), "mc_coactivation_probability");
  if (samples < 1) throw ConfigError("mc samples must be >= 1");
  const std::int64_t chunks = (samples + kMcChunk - 1) / kMcChunk;
  std::int64_t hits = 0;
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t count = std::min(kMcChunk, samples - c * kMcChunk);
    hits += mc_chunk_hits(xi, xj, count,
                          derive_seed({seed, 0x6d63ULL, static_cast<std::uint64_t>(c)}));
  }
  return static_cast<double>(hits) / static_cast<double>(samples);
}

double mc_coactivation_probability(const Vector& xi, const Vector& xj,
                                   std::int64_t samples, std::uint64_t seed) {
  check_dims(xj.size(), xi.size(), "mc_coactivation_probability");
  if (samples < 1) throw ConfigError("mc samples must be >= 1");
  const std::int64_t chunks = (samples + kMcChunk - 1) / kMcChunk;
  std::vector<std::int64_t> hits(static_cast<std::size_t>(chunks));
  parallel_for(chunks, [&](std::int64_t c) {
    const std::int64_t count = std::min(kMcChunk, samples - c * kMcChunk);
    hits[static_cast<std::size_t>(c)] =
        mc_chunk_hits(xi, xj, count,
                      derive_seed({seed, 0x6d63ULL, static_cast<std::uint64_t>(c)}));
  });
  std::int64_t total = 0;
  for (std::int64_t h : hits) total += h;
  return static_cast<double>(total) / static_cast<double>(samples);
}

LogisticModel fit_logistic_weighted(const Dataset& ds, const DataWeights& omega,
                                    double l2) {
  check_dims(omega.size(), ds.n(), "fit_logistic_weighted");
  if (l2 < 0.0) throw ConfigError("logistic fit: l2 must be >= 0");
  const Index n = ds.n();
  const Index d = ds.d();

  bool has_pos = false;
  bool has_neg = false;
  for (Index i = 0; i < n; ++i) {
    if (ds.y[i] != 0.0 && ds.y[i] != 1.0) {
      throw DataError("logistic fit: labels must be 0 or 1");
    }
    if (omega[i] == 0.0) continue;
    (ds.y[i] == 1.0 ? has_pos : has_neg) = true;
  }
  if (l2 == 0.0 && !(has_pos && has_neg)) {
    throw DataError("logistic fit: both classes required among active rows when l2 = 0");
  }

  const auto loss = [&](const Vector& w) {
    double acc = 0.5 * l2 * w.squaredNorm();
    for (Index i = 0; i < n; ++i) {
      if (omega[i] == 0.0) continue;
      const double z = ds.X.row(i).dot(w);
      acc += omega[i] * (log1pexp(z) - ds.y[i] * z);
    }
    return acc;
  };

  LogisticModel model;
  model.w = Vector::Zero(d);
  model.l2 = l2;
  double cur_loss = loss(model.w);

  const auto check_separation = [&](const Vector& w) {
    if (l2 != 0.0) return;
    // A vanishing gradient with every fitted probability at its label means
    // the data is separated and the unregularized optimum diverges.
    for (Index i = 0; i < n; ++i) {
      if (omega[i] == 0.0) continue;
      if (std::abs(sigmoid(ds.X.row(i).dot(w)) - ds.y[i]) >= 1e-4) return;
    }
    throw NumericError(
        "logistic fit: data is separated and l2 = 0; the optimum diverges");
  };

  constexpr int kMaxIters = 100;
  constexpr double kGradTol = 1e-8;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Vector grad = l2 * model.w;
    Matrix hess = l2 * Matrix::Identity(d, d);
    for (Index i = 0; i < n; ++i) {
      if (omega[i] == 0.0) continue;
      const double p = sigmoid(ds.X.row(i).dot(model.w));
      grad += omega[i] * (p - ds.y[i]) * ds.X.row(i).transpose();
      hess.selfadjointView<Eigen::Lower>().rankUpdate(ds.X.row(i).transpose(),
                                                      omega[i] * p * (1.0 - p));
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    model.grad_norm = grad.norm();
    model.iterations = iter;
    if (model.grad_norm <= kGradTol) {
      check_separation(model.w);
      model.converged = true;
      return model;
    }

    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("logistic fit: singular Hessian (possible separation with l2 = 0)");
    }
    const Vector step = ldlt.solve(grad);
    double scale = 1.0;
    bool accepted = false;
    // Rounding slack: near the optimum the true decrease sits below the loss
    // resolution, and full Newton steps must not be rejected there.
    const double slack = 1e-10 * (std::abs(cur_loss) + 1.0);
    for (int halvings = 0; halvings <= 30; ++halvings) {
      const Vector cand = model.w - scale * step;
      const double cand_loss = loss(cand);
      if (std::isfinite(cand_loss) && cand_loss <= cur_loss + slack) {
        model.w = cand;
        cur_loss = cand_loss;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }

  // Final gradient check in case the loop exited at the iteration cap.
  Vector grad = l2 * model.w;
  for (Index i = 0; i < n; ++i) {
    if (omega[i] == 0.0) continue;
    const double p = sigmoid(ds.X.row(i).dot(model.w));
    grad += omega[i] * (p - ds.y[i]) * ds.X.row(i).transpose();
  }
  model.grad_norm = grad.norm();
  if (model.grad_norm <= kGradTol) {
    check_separation(model.w);
    model.converged = true;
    return model;
  }
  std::ostringstream oss;
  oss << "logistic fit did not converge: gradient norm " << model.grad_norm
      << " after " << kMaxIters << " Newton iterations";
  if (l2 == 0.0) oss << " (unregularized fit; data may be separable)";
  throw NumericError(oss.str());
}

double predict_logistic_score(const LogisticModel& m, const Vector& x) {
  check_dims(x.size(), m.w.size(), "predict_logistic_score");
  return m.w.dot(x);
}

ScoreFn make_score_fn(const FittedModel& m) {
  if (const auto* lin = std::get_if<LinearModel>(&m)) {
    return [model = *lin](const Vector& x) { return predict_linear(model, x); };
  }
  if (const auto* ntk = std::get_if<NtkModel>(&m)) {
    return [model = *ntk](const Vector& x) { return predict_ntk(model, x); };
  }
  const auto& lg = std::get<LogisticModel>(m);
  return [model = lg](const Vector& x) { return predict_logistic_score(model, x); };
}

}  // namespace recdel
