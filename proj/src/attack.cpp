#include "recdel/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "recdel/parallel.hpp"
#include "recdel/rng.hpp"

namespace recdel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

int count_below(const Vector& scores, double s) {
  int c = 0;
  for (Index j = 0; j < scores.size(); ++j) {
    if (scores[j] < s) ++c;
  }
  return c;
}

double rate_below(const Vector& scores, double s) {
  return scores.size() == 0
             ? 0.0
             : static_cast<double>(count_below(scores, s)) / scores.size();
}

// Closed-form minimizer of (w'(x+d) - s)^2 + lambda |d|^2 for linear scores.
Vector linear_delta(const Vector& w, const Vector& x, const RecourseConfig& rc) {
  const double sq = w.squaredNorm();
  if (sq == 0.0 && rc.lambda == 0.0) {
    throw NumericError("recourse: zero weight vector with lambda = 0");
  }
  return ((rc.s - w.dot(x)) / (rc.lambda + sq)) * w;
}

Vector recourse_delta_for(const FittedModel& model, RecourseMethod kind,
                          const Vector& x, const RecourseConfig& rc) {
  switch (kind) {
    case RecourseMethod::closed_linear: {
      if (const auto* lin = std::get_if<LinearModel>(&model)) {
        return linear_delta(lin->w, x, rc);
      }
      if (const auto* lg = std::get_if<LogisticModel>(&model)) {
        return linear_delta(lg->w, x, rc);
      }
      throw ConfigError("closed_linear recourse needs a linear-scoring model");
    }
    case RecourseMethod::closed_ntk: {
      const auto* ntk = std::get_if<NtkModel>(&model);
      if (ntk == nullptr) throw ConfigError("closed_ntk recourse needs an NTK model");
      return scfe_ntk(*ntk, x, rc).delta;
    }
    case RecourseMethod::gradient:
      return scfe_gradient(make_differentiable_score(model), x, rc).delta;
  }
  throw Error("unknown recourse method");
}

double phi_sum_against(const Matrix& base_deltas, const FittedModel& model,
                       const RecourseMethod kind, const Matrix& factual,
                       const RecourseConfig& rc, std::vector<double>* per_point) {
  double acc = 0.0;
  for (Index j = 0; j < factual.rows(); ++j) {
    const Vector d = recourse_delta_for(model, kind, factual.row(j).transpose(), rc);
    const double phi = (d - base_deltas.row(j).transpose()).norm();
    if (per_point != nullptr) per_point->push_back(phi);
    acc += phi;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Candidate engines: closed-form (linear, NTK) or jackknife (logistic) weight
// updates under one extra deletion, against a refreshed current state.
// ---------------------------------------------------------------------------

struct CandidateEval {
  Vector scores;  // at the counterfactual rows
  double phi_sum = 0.0;
};

class LinearEngine {
 public:
  LinearEngine(const Dataset& ds, const AttackConfig& cfg) : ds_(ds), cfg_(cfg) {}

  void refresh(const Vector& omega) {
    const Index d = ds_.d();
    A_ = Matrix::Zero(d, d);
    b_ = Vector::Zero(d);
    for (Index i = 0; i < ds_.n(); ++i) {
      if (omega[i] == 0.0) continue;
      A_.selfadjointView<Eigen::Lower>().rankUpdate(ds_.X.row(i).transpose(), 1.0);
      b_ += ds_.y[i] * ds_.X.row(i).transpose();
    }
    A_ = A_.selfadjointView<Eigen::Lower>();
  }

  bool candidate(Index i, const RecourseSet& rs, bool want_phi,
                 CandidateEval& out) const {
    Matrix A = A_;
    A.selfadjointView<Eigen::Lower>().rankUpdate(ds_.X.row(i).transpose(), -1.0);
    A = A.selfadjointView<Eigen::Lower>();
    const Vector b = b_ - ds_.y[i] * ds_.X.row(i).transpose();
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) return false;
    const Vector w = llt.solve(b);
    out.scores = rs.counterfactual * w;
    if (want_phi) {
      out.phi_sum = 0.0;
      const Matrix base = rs.deltas();
      for (Index j = 0; j < rs.factual.rows(); ++j) {
        const Vector d =
            linear_delta(w, rs.factual.row(j).transpose(), cfg_.recourse);
        out.phi_sum += (d - base.row(j).transpose()).norm();
      }
    }
    return true;
  }

 private:
  const Dataset& ds_;
  const AttackConfig& cfg_;
  Matrix A_;
  Vector b_;
};

class NtkEngine {
 public:
  NtkEngine(const Dataset& ds, const AttackConfig& cfg, const RecourseSet& rs)
      : ds_(ds), cfg_(cfg) {
    K_ = ntk_gram(ds.X, ds.X);
    if (rs.size() > 0) Kcheck_ = ntk_gram(rs.counterfactual, ds.X);
  }

  void refresh(const Vector& omega) {
    omega_ = omega;
    Matrix M = omega.asDiagonal() * K_ * omega.asDiagonal();
    M.diagonal().array() += cfg_.hyper.beta;
    P_ = M.llt().solve(Matrix::Identity(ds_.n(), ds_.n()));
    z_ = P_ * omega.cwiseProduct(ds_.y);
  }

  bool candidate(Index i, const RecourseSet& rs, bool want_phi,
                 CandidateEval& out) const {
    // Exact reduced refit by the block-inversion rank-one identity.
    Vector z = z_ - P_.col(i) * (z_[i] / P_(i, i));
    z[i] = 0.0;
    out.scores = rs.size() > 0 ? Vector(Kcheck_ * z) : Vector();
    if (want_phi) {
      Vector omega = omega_;
      omega[i] = 0.0;
      const NtkModel cand{z, ds_.X, cfg_.hyper.beta, omega};
      out.phi_sum = 0.0;
      const Matrix base = rs.deltas();
      for (Index j = 0; j < rs.factual.rows(); ++j) {
        const Vector d = scfe_ntk(cand, rs.factual.row(j).transpose(), cfg_.recourse).delta;
        out.phi_sum += (d - base.row(j).transpose()).norm();
      }
    }
    return true;
  }

 private:
  const Dataset& ds_;
  const AttackConfig& cfg_;
  Matrix K_;
  Matrix Kcheck_;
  Matrix P_;
  Vector z_;
  Vector omega_;
};

class LogisticEngine {
 public:
  LogisticEngine(const Dataset& ds, const AttackConfig& cfg)
      : cfg_(cfg),
        ctx_(JackknifeContext::for_logistic(
            ds, fit_logistic_weighted(ds, DataWeights(ds.n()), cfg.hyper.l2))) {}

  void refresh(const Vector& omega) { w_cur_ = ctx_.update(omega); }

  bool candidate(Index i, const RecourseSet& rs, bool want_phi,
                 CandidateEval& out) const {
    const Vector w = w_cur_ + ctx_.solved_gradients().row(i).transpose();
    out.scores = rs.counterfactual * w;
    if (want_phi) {
      out.phi_sum = 0.0;
      const Matrix base = rs.deltas();
      for (Index j = 0; j < rs.factual.rows(); ++j) {
        const Vector d = linear_delta(w, rs.factual.row(j).transpose(), cfg_.recourse);
        out.phi_sum += (d - base.row(j).transpose()).norm();
      }
    }
    return true;
  }

 private:
  const AttackConfig& cfg_;
  JackknifeContext ctx_;
  Vector w_cur_;
};

double metric_from(const AttackConfig& cfg, const CandidateEval& eval) {
  if (cfg.metric == AttackMetric::outcome_count) {
    return static_cast<double>(count_below(eval.scores, cfg.s_invalid));
  }
  return eval.phi_sum;
}

template <class Engine>
AttackResult greedy_impl(const Dataset& ds, const RecourseSet& rs,
                         const AttackConfig& cfg, Engine engine) {
  const Index n = ds.n();
  const bool want_phi = cfg.metric == AttackMetric::action_sum;

  Vector omega = Vector::Ones(n);
  AttackResult result;

  engine.refresh(omega);

  const auto ground_point = [&](int k) {
    const auto gt = evaluate_ground_truth(ds, DataWeights::from_vector(omega), rs, cfg);
    return CurvePoint{k, gt.metric_value, gt.invalidation_rate, 0.0, 0.0};
  };

  // k = 0 baseline; under the full model the surrogate equals ground truth.
  const CurvePoint base = ground_point(0);
  result.curve.push_back(base);
  result.ground_truth.push_back(base);

  std::vector<double> cand_metric(static_cast<std::size_t>(n));
  std::vector<double> cand_rate(static_cast<std::size_t>(n));
  for (int round = 1; round <= cfg.M; ++round) {
    std::fill(cand_metric.begin(), cand_metric.end(), kNegInf);
    parallel_for(n, [&](std::int64_t i) {
      if (omega[static_cast<Index>(i)] == 0.0) return;
      try {
        CandidateEval eval;
        if (!engine.candidate(static_cast<Index>(i), rs, want_phi, eval)) return;
        cand_metric[static_cast<std::size_t>(i)] = metric_from(cfg, eval);
        cand_rate[static_cast<std::size_t>(i)] = rate_below(eval.scores, cfg.s_invalid);
      } catch (const Error&) {
        // candidate left at -inf
      }
    });

    Index best = -1;
    double best_metric = kNegInf;
    for (Index i = 0; i < n; ++i) {
      if (cand_metric[static_cast<std::size_t>(i)] > best_metric) {
        best_metric = cand_metric[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    if (best < 0) {
      throw NumericError("greedy_attack: every remaining candidate deletion is rank-deficient");
    }

    omega[best] = 0.0;
    result.removed_indices.push_back(static_cast<int>(best));
    engine.refresh(omega);
    result.curve.push_back(CurvePoint{round, best_metric,
                                      cand_rate[static_cast<std::size_t>(best)], 0.0, 0.0});
    result.ground_truth.push_back(ground_point(round));
  }

  result.final_omega = omega;
  return result;
}

void validate_attack_config(const Dataset& ds, const AttackConfig& cfg) {
  if (cfg.M < 0 || cfg.M >= ds.n()) {
    throw ConfigError("attack: M must satisfy 0 <= M < n");
  }
}

}  // namespace

AttackResult greedy_attack(const Dataset& ds, const RecourseSet& rs,
                           const AttackConfig& cfg) {
  validate_attack_config(ds, cfg);
  switch (cfg.model_kind) {
    case ModelKind::linear:
      return greedy_impl(ds, rs, cfg, LinearEngine(ds, cfg));
    case ModelKind::ntk:
      return greedy_impl(ds, rs, cfg, NtkEngine(ds, cfg, rs));
    case ModelKind::logistic:
      return greedy_impl(ds, rs, cfg, LogisticEngine(ds, cfg));
  }
  throw Error("greedy_attack: unknown model kind");
}

// ---------------------------------------------------------------------------
// SGD attack with Gaussian stochastic gates.
// ---------------------------------------------------------------------------

namespace {

// Differentiable soft objective m(omega) and its gradient for fractional
// weights; one implementation per closed-form or IJ weight path.
class SoftObjective {
 public:
  SoftObjective(const Dataset& ds, const RecourseSet& rs, const AttackConfig& cfg)
      : ds_(ds), rs_(rs), cfg_(cfg), base_deltas_(rs.deltas()) {
    if (cfg.model_kind == ModelKind::ntk) {
      K_ = ntk_gram(ds.X, ds.X);
      if (rs.size() > 0) Kcheck_ = ntk_gram(rs.counterfactual, ds.X);
      if (cfg.metric == AttackMetric::action_sum) {
        kfact_.resize(static_cast<std::size_t>(rs.size()));
        jfact_.resize(static_cast<std::size_t>(rs.size()));
        for (Index j = 0; j < rs.size(); ++j) {
          const Vector x = rs_.factual.row(j).transpose();
          Vector kx(ds.n());
          Matrix J(ds.n(), ds.d());
          for (Index i = 0; i < ds.n(); ++i) {
            kx[i] = ntk_kernel(x, ds.X.row(i).transpose());
            J.row(i) = ntk_kernel_input_gradient(x, ds.X.row(i).transpose()).transpose();
          }
          kfact_[static_cast<std::size_t>(j)] = std::move(kx);
          jfact_[static_cast<std::size_t>(j)] = std::move(J);
        }
      }
    } else if (cfg.model_kind == ModelKind::logistic) {
      ctx_.emplace(JackknifeContext::for_logistic(
          ds, fit_logistic_weighted(ds, DataWeights(ds.n()), cfg.hyper.l2)));
    }
  }

  // Returns the soft metric at fractional omega and fills d metric / d omega.
  double eval(const Vector& omega, Vector& grad) const {
    switch (cfg_.model_kind) {
      case ModelKind::linear:
        return eval_linear_like(omega, grad);
      case ModelKind::logistic:
        return eval_ij(omega, grad);
      case ModelKind::ntk:
        return eval_ntk(omega, grad);
    }
    throw Error("sgd_attack: unknown model kind");
  }

 private:
  // Soft metric and its gradient with respect to a linear score weight w.
  double metric_and_wgrad(const Vector& w, Vector& g_w) const {
    const Index q = rs_.size();
    g_w = Vector::Zero(w.size());
    if (q == 0) return 0.0;
    double m = 0.0;
    if (cfg_.metric == AttackMetric::outcome_count) {
      const double tau = cfg_.sgd.tau;
      for (Index j = 0; j < q; ++j) {
        const Vector xc = rs_.counterfactual.row(j).transpose();
        const double z = (cfg_.s_invalid - w.dot(xc)) / tau;
        const double sig = sigmoid(z);
        m += sig;
        g_w -= (sig * (1.0 - sig) / tau) * xc;
      }
    } else {
      const auto& rc = cfg_.recourse;
      for (Index j = 0; j < q; ++j) {
        const Vector x = rs_.factual.row(j).transpose();
        const double denom = rc.lambda + w.squaredNorm();
        const double gap = rc.s - w.dot(x);
        const double c = gap / denom;
        const Vector delta = c * w;
        const Vector diff = delta - base_deltas_.row(j).transpose();
        const double phi = diff.norm();
        m += phi;
        if (phi < 1e-12) continue;
        const Vector u = diff / phi;
        const Vector grad_c = (-x * denom - 2.0 * gap * w) / (denom * denom);
        g_w += grad_c * w.dot(u) + c * u;
      }
    }
    const double dq = static_cast<double>(q);
    g_w /= dq;
    return m / dq;
  }

  double eval_linear_like(const Vector& omega, Vector& grad) const {
    const Index n = ds_.n();
    const Index d = ds_.d();
    Matrix A = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (Index i = 0; i < n; ++i) {
      if (omega[i] == 0.0) continue;
      A.selfadjointView<Eigen::Lower>().rankUpdate(ds_.X.row(i).transpose(), omega[i]);
      b += omega[i] * ds_.y[i] * ds_.X.row(i).transpose();
    }
    A = A.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
      throw NumericError("sgd_attack: weighted normal equations became singular");
    }
    const Vector w = llt.solve(b);
    Vector g_w;
    const double m = metric_and_wgrad(w, g_w);
    // dw/domega_i = A^{-1} x_i r_i, so the adjoint a = A^{-1} g_w gives
    // dm/domega_i = a'x_i r_i.
    const Vector a = llt.solve(g_w);
    grad.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double r = ds_.y[i] - ds_.X.row(i).dot(w);
      grad[i] = a.dot(ds_.X.row(i).transpose()) * r;
    }
    return m;
  }

  double eval_ij(const Vector& omega, Vector& grad) const {
    const Vector w = ctx_->update(omega);
    Vector g_w;
    const double m = metric_and_wgrad(w, g_w);
    const Index n = ds_.n();
    grad.resize(n);
    for (Index i = 0; i < n; ++i) {
      grad[i] = -ctx_->solved_gradients().row(i).dot(g_w);
    }
    return m;
  }

  double eval_ntk(const Vector& omega, Vector& grad) const {
    const Index n = ds_.n();
    const Index q = rs_.size();
    const Vector s = omega.cwiseSqrt();
    Matrix M = s.asDiagonal() * K_ * s.asDiagonal();
    M.diagonal().array() += cfg_.hyper.beta;
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
      throw NumericError("sgd_attack: weighted kernel system is not positive definite");
    }
    const Vector z = llt.solve(s.cwiseProduct(ds_.y));
    const Vector w_dual = s.cwiseProduct(z);

    Vector g_dual = Vector::Zero(n);
    double m = 0.0;
    if (q > 0) {
      if (cfg_.metric == AttackMetric::outcome_count) {
        const double tau = cfg_.sgd.tau;
        const Vector f = Kcheck_ * w_dual;
        for (Index j = 0; j < q; ++j) {
          const double zj = (cfg_.s_invalid - f[j]) / tau;
          const double sig = sigmoid(zj);
          m += sig;
          g_dual -= (sig * (1.0 - sig) / tau) * Kcheck_.row(j).transpose();
        }
      } else {
        const auto& rc = cfg_.recourse;
        for (Index j = 0; j < q; ++j) {
          const auto& kx = kfact_[static_cast<std::size_t>(j)];
          const auto& J = jfact_[static_cast<std::size_t>(j)];
          const Vector v = J.transpose() * w_dual;
          const double denom = rc.lambda + v.squaredNorm();
          const double gap = rc.s - kx.dot(w_dual);
          const double c = gap / denom;
          const Vector delta = c * v;
          const Vector diff = delta - base_deltas_.row(j).transpose();
          const double phi = diff.norm();
          m += phi;
          if (phi < 1e-12) continue;
          const Vector u = diff / phi;
          const Vector grad_c = (-kx * denom - 2.0 * gap * (J * v)) / (denom * denom);
          g_dual += grad_c * v.dot(u) + c * (J * u);
        }
      }
      const double dq = static_cast<double>(q);
      m /= dq;
      g_dual /= dq;
    }

    const Vector b = llt.solve(s.cwiseProduct(g_dual));
    const Vector Kw = K_ * w_dual;
    const Vector KSb = K_ * s.cwiseProduct(b);
    grad = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (omega[i] <= 0.0) continue;  // closed gate: chain derivative is zero
      const double c = 0.5 / std::sqrt(omega[i]);
      grad[i] = c * (g_dual[i] * z[i] + b[i] * ds_.y[i] - b[i] * Kw[i] - KSb[i] * z[i]);
    }
    return m;
  }

  const Dataset& ds_;
  const RecourseSet& rs_;
  const AttackConfig& cfg_;
  Matrix base_deltas_;
  Matrix K_;
  Matrix Kcheck_;
  std::vector<Vector> kfact_;  // kernel vectors at factual points
  std::vector<Matrix> jfact_;  // kernel Jacobians at factual points
  std::optional<JackknifeContext> ctx_;
};

}  // namespace

double sgd_soft_objective(const Dataset& ds, const RecourseSet& rs,
                          const AttackConfig& cfg, const Vector& omega,
                          Vector* grad) {
  const SoftObjective objective(ds, rs, cfg);
  Vector g;
  const double value = objective.eval(omega, g);
  if (grad != nullptr) *grad = std::move(g);
  return value;
}

AttackResult sgd_attack(const Dataset& ds, const RecourseSet& rs,
                        const AttackConfig& cfg) {
  validate_attack_config(ds, cfg);
  const auto& p = cfg.sgd;
  if (p.mc_samples < 1) throw ConfigError("sgd_attack: K must be >= 1");
  if (p.sigma < 0.0) throw ConfigError("sgd_attack: sigma must be >= 0");
  if (p.eta < 0.0) throw ConfigError("sgd_attack: eta must be >= 0");
  if (p.lr <= 0.0) throw ConfigError("sgd_attack: learning rate must be > 0");
  if (cfg.metric == AttackMetric::action_sum && cfg.model_kind == ModelKind::logistic &&
      cfg.recourse_kind == RecourseMethod::gradient) {
    throw ConfigError(
        "sgd_attack: action metric needs a closed-form recourse; the iterative "
        "gradient recourse is not differentiable in the data weights");
  }

  const Index n = ds.n();
  const SoftObjective objective(ds, rs, cfg);

  Vector mu = Vector::Ones(n);
  Vector eps = Vector::Zero(n);
  for (int step = 1; step <= p.steps; ++step) {
    Vector total = Vector::Zero(n);
    for (int k = 1; k <= p.mc_samples; ++k) {
      if (p.sigma > 0.0) {
        Rng rng(derive_seed({cfg.seed, 0x73676431ULL, static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(k)}));
        for (Index i = 0; i < n; ++i) eps[i] = p.sigma * rng.normal();
      }
      Vector gate = (mu + eps).cwiseMax(0.0).cwiseMin(1.0);
      Vector g;
      objective.eval(gate, g);
      for (Index i = 0; i < n; ++i) {
        const double t = mu[i] + eps[i];
        if (t < 0.0 || t > 1.0) g[i] = 0.0;  // clamp subgradient
      }
      total += g;
    }
    total /= static_cast<double>(p.mc_samples);
    if (p.sigma > 0.0) {
      // maximize m - eta * sum_i Phi((1 - mu_i) / sigma)
      for (Index i = 0; i < n; ++i) {
        total[i] += p.eta * norm_pdf((1.0 - mu[i]) / p.sigma) / p.sigma;
      }
    }
    if (!total.allFinite()) throw NumericError("sgd_attack: non-finite gradient");
    mu += p.lr * total;
  }

  // Stable ascending argsort; the M smallest gate means are removed.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mu[a] < mu[b]; });

  AttackResult result;
  result.sgd_mu = mu;
  Vector omega = Vector::Ones(n);
  result.ground_truth.reserve(static_cast<std::size_t>(cfg.M) + 1);
  for (int k = 0; k <= cfg.M; ++k) {
    if (k > 0) {
      const int idx = order[static_cast<std::size_t>(k - 1)];
      omega[idx] = 0.0;
      result.removed_indices.push_back(idx);
    }
    const auto gt = evaluate_ground_truth(ds, DataWeights::from_vector(omega), rs, cfg);
    result.ground_truth.push_back(
        CurvePoint{k, gt.metric_value, gt.invalidation_rate, 0.0, 0.0});
  }
  result.curve = result.ground_truth;
  result.final_omega = omega;
  return result;
}

RandomBaselineResult random_baseline(const Dataset& ds, const RecourseSet& rs,
                                     const AttackConfig& cfg, int trials) {
  validate_attack_config(ds, cfg);
  if (trials < 1) throw ConfigError("random_baseline: trials must be >= 1");
  const Index n = ds.n();

  RandomBaselineResult result;
  result.trial_curves.resize(static_cast<std::size_t>(trials));
  result.trial_removed.resize(static_cast<std::size_t>(trials));

  std::vector<std::string> trial_errors(static_cast<std::size_t>(trials));
  parallel_for(trials, [&](std::int64_t t) {
    try {
      Rng rng(derive_seed({cfg.seed, 0xba5e11ULL, static_cast<std::uint64_t>(t)}));
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      std::vector<CurvePoint> curve;
      Vector omega = Vector::Ones(n);
      for (int k = 0; k <= cfg.M; ++k) {
        if (k > 0) omega[order[static_cast<std::size_t>(k - 1)]] = 0.0;
        const auto gt =
            evaluate_ground_truth(ds, DataWeights::from_vector(omega), rs, cfg);
        curve.push_back(CurvePoint{k, gt.metric_value, gt.invalidation_rate, 0.0, 0.0});
      }
      result.trial_curves[static_cast<std::size_t>(t)] = std::move(curve);
      result.trial_removed[static_cast<std::size_t>(t)] =
          std::vector<int>(order.begin(), order.begin() + cfg.M);
    } catch (const std::exception& e) {
      trial_errors[static_cast<std::size_t>(t)] = e.what();
    }
  });
  for (const auto& err : trial_errors) {
    if (!err.empty()) throw NumericError("random_baseline trial failed: " + err);
  }

  result.mean_curve.resize(static_cast<std::size_t>(cfg.M) + 1);
  for (int k = 0; k <= cfg.M; ++k) {
    double m_mean = 0.0;
    double r_mean = 0.0;
    for (int t = 0; t < trials; ++t) {
      m_mean += result.trial_curves[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].metric_value;
      r_mean += result.trial_curves[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)].invalidation_rate;
    }
    m_mean /= trials;
    r_mean /= trials;
    double m_var = 0.0;
    double r_var = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto& pt = result.trial_curves[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
      m_var += (pt.metric_value - m_mean) * (pt.metric_value - m_mean);
      r_var += (pt.invalidation_rate - r_mean) * (pt.invalidation_rate - r_mean);
    }
    const double ddof = trials > 1 ? trials - 1.0 : 1.0;
    result.mean_curve[static_cast<std::size_t>(k)] =
        CurvePoint{k, m_mean, r_mean, std::sqrt(m_var / ddof), std::sqrt(r_var / ddof)};
  }
  return result;
}

AttackResult brute_force_attack(const Dataset& ds, const RecourseSet& rs,
                                const AttackConfig& cfg) {
  validate_attack_config(ds, cfg);
  const Index n = ds.n();
  if (cfg.M > 3 || n > 16) {
    throw ConfigError("brute_force_attack: instance too large (cap: M <= 3, n <= 16)");
  }
  double combos = 1.0;
  for (int k = 1; k <= cfg.M; ++k) combos *= static_cast<double>(n - k + 1) / k;
  if (combos > 1e6) throw ConfigError("brute_force_attack: instance too large");

  AttackResult result;
  double best_metric = kNegInf;
  double best_rate = 0.0;
  std::vector<int> best_set;

  for (int size = 0; size <= cfg.M; ++size) {
    // lexicographic enumeration of all subsets of this size
    std::vector<int> comb(static_cast<std::size_t>(size));
    std::iota(comb.begin(), comb.end(), 0);
    bool more = size <= n;
    while (more) {
      Vector omega = Vector::Ones(n);
      for (int idx : comb) omega[idx] = 0.0;
      try {
        const auto gt =
            evaluate_ground_truth(ds, DataWeights::from_vector(omega), rs, cfg);
        if (gt.metric_value > best_metric) {
          best_metric = gt.metric_value;
          best_rate = gt.invalidation_rate;
          best_set = comb;
        }
      } catch (const NumericError&) {
        // rank-deficient refit: subset skipped
      }
      // advance combination
      if (size == 0) break;
      int pos = size - 1;
      while (pos >= 0 && comb[static_cast<std::size_t>(pos)] ==
                             static_cast<int>(n) - size + pos) {
        --pos;
      }
      if (pos < 0) {
        more = false;
      } else {
        ++comb[static_cast<std::size_t>(pos)];
        for (int t = pos + 1; t < size; ++t) {
          comb[static_cast<std::size_t>(t)] = comb[static_cast<std::size_t>(t - 1)] + 1;
        }
      }
    }
    result.curve.push_back(CurvePoint{size, best_metric, best_rate, 0.0, 0.0});
  }

  result.removed_indices = best_set;
  Vector omega = Vector::Ones(n);
  for (int idx : best_set) omega[idx] = 0.0;
  result.final_omega = omega;
  result.ground_truth = result.curve;
  return result;
}

GroundTruthMetrics evaluate_ground_truth(const Dataset& ds, const DataWeights& omega,
                                         const RecourseSet& rs,
                                         const AttackConfig& cfg) {
  const FittedModel full = refit_exact(ds, DataWeights(ds.n()), cfg.model_kind, cfg.hyper);
  const FittedModel refit = refit_exact(ds, omega, cfg.model_kind, cfg.hyper);
  const ScoreFn f_old = make_score_fn(full);
  const ScoreFn f_new = make_score_fn(refit);

  GroundTruthMetrics gt;
  const Index q = rs.size();
  for (Index j = 0; j < q; ++j) {
    const Vector xc = rs.counterfactual.row(j).transpose();
    gt.delta.push_back(std::abs(f_old(xc) - f_new(xc)));
    const bool inval = f_new(xc) < cfg.s_invalid;
    gt.invalidated.push_back(inval);
    if (inval) ++gt.invalidation_count;
  }
  gt.invalidation_rate =
      q == 0 ? 0.0 : static_cast<double>(gt.invalidation_count) / static_cast<double>(q);
  gt.phi_sum = phi_sum_against(rs.deltas(), refit, cfg.recourse_kind, rs.factual,
                               cfg.recourse, &gt.phi);
  gt.metric_value = cfg.metric == AttackMetric::outcome_count
                        ? static_cast<double>(gt.invalidation_count)
                        : gt.phi_sum;
  return gt;
}

}  // namespace recdel
