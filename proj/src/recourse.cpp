#include "recdel/recourse.hpp"

#include <cmath>

namespace recdel {

namespace {

RecourseResult finish(Vector x, Vector delta, double score, const RecourseConfig& cfg,
                      RecourseMethod method) {
  RecourseResult r;
  r.x_cf = x + delta;
  r.x = std::move(x);
  r.delta = std::move(delta);
  r.achieved_score = score;
  r.valid = score >= cfg.s - cfg.validity_margin;
  r.method = method;
  return r;
}

}  // namespace

RecourseResult scfe_linear(const LinearModel& m, const Vector& x,
                           const RecourseConfig& cfg) {
  const double sq = m.w.squaredNorm();
  if (sq == 0.0 && cfg.lambda == 0.0) {
    throw NumericError("scfe_linear: zero weight vector with lambda = 0, score unreachable");
  }
  const double gap = cfg.s - m.w.dot(x);
  const Vector delta = (gap / (cfg.lambda + sq)) * m.w;
  return finish(x, delta, m.w.dot(x + delta), cfg, RecourseMethod::closed_linear);
}

RecourseResult scfe_ntk(const NtkModel& m, const Vector& x, const RecourseConfig& cfg) {
  const double current = predict_ntk(m, x);
  const double gap = cfg.s - current;
  if (gap == 0.0) {
    return finish(x, Vector::Zero(x.size()), current, cfg, RecourseMethod::closed_ntk);
  }
  const Vector grad = ntk_input_gradient(m, x);
  const double sq = grad.squaredNorm();
  if (sq == 0.0 && cfg.lambda == 0.0) {
    throw NumericError("scfe_ntk: vanishing input gradient with lambda = 0");
  }
  const Vector delta = (gap / (cfg.lambda + sq)) * grad;
  return finish(x, delta, predict_ntk(m, x + delta), cfg, RecourseMethod::closed_ntk);
}

DifferentiableScore make_differentiable_score(const FittedModel& m) {
  if (const auto* lin = std::get_if<LinearModel>(&m)) {
    const Vector w = lin->w;
    return DifferentiableScore{[w](const Vector& x) { return w.dot(x); },
                               [w](const Vector&) { return w; }};
  }
  if (const auto* lg = std::get_if<LogisticModel>(&m)) {
    const Vector w = lg->w;
    return DifferentiableScore{[w](const Vector& x) { return w.dot(x); },
                               [w](const Vector&) { return w; }};
  }
  const NtkModel ntk = std::get<NtkModel>(m);
  return DifferentiableScore{
      [ntk](const Vector& x) { return predict_ntk(ntk, x); },
      [ntk](const Vector& x) { return ntk_input_gradient(ntk, x); }};
}

DifferentiableScore with_fd_gradient(ScoreFn f, double h) {
  auto grad = [f, h](const Vector& x) {
    Vector g(x.size());
    Vector probe = x;
    for (Index j = 0; j < x.size(); ++j) {
      const double orig = probe[j];
      probe[j] = orig + h;
      const double up = f(probe);
      probe[j] = orig - h;
      const double down = f(probe);
      probe[j] = orig;
      g[j] = (up - down) / (2.0 * h);
    }
    return g;
  };
  return DifferentiableScore{std::move(f), std::move(grad)};
}

RecourseResult scfe_gradient(const DifferentiableScore& predict, const Vector& x,
                             const RecourseConfig& cfg) {
  if (cfg.max_iters < 1) throw ConfigError("scfe_gradient: max_iters must be >= 1");
  if (cfg.step_size <= 0.0) throw ConfigError("scfe_gradient: step_size must be > 0");

  const auto objective = [&](const Vector& delta, double score) {
    const double gap = score - cfg.s;
    return gap * gap + cfg.lambda * delta.squaredNorm();
  };

  Vector delta = Vector::Zero(x.size());
  double score = predict.value(x);
  if (score >= cfg.s - cfg.validity_margin) {
    return finish(x, delta, score, cfg, RecourseMethod::gradient);
  }

  double best_obj = objective(delta, score);
  Vector best_delta = delta;
  double best_score = score;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Vector g_score = predict.gradient(x + delta);
    const Vector g_obj = 2.0 * (score - cfg.s) * g_score + 2.0 * cfg.lambda * delta;
    delta -= cfg.step_size * g_obj;
    score = predict.value(x + delta);
    const double obj = objective(delta, score);
    if (!std::isfinite(obj)) {
      throw NumericError("scfe_gradient: objective diverged (step size too large)");
    }
    if (score >= cfg.s - cfg.validity_margin) {
      return finish(x, delta, score, cfg, RecourseMethod::gradient);
    }
    if (obj < best_obj) {
      best_obj = obj;
      best_delta = delta;
      best_score = score;
    }
  }
  return finish(x, best_delta, best_score, cfg, RecourseMethod::gradient);
}

}  // namespace recdel
