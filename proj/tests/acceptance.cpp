// Acceptance suite: one pass/fail line per criterion. Exits nonzero if any
// criterion fails. argv[1] must point at the CLI binary (used by the
// determinism criterion).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "recdel/attack.hpp"
#include "recdel/cli.hpp"
#include "recdel/instability.hpp"
#include "recdel/sensitivity.hpp"

using namespace recdel;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, double seconds,
            const std::string& detail) {
  std::printf("[%s] criterion %2d: %-34s (%.2fs) %s\n", pass ? "PASS" : "FAIL",
              number, name.c_str(), seconds, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run(int number, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& fn,
         double time_limit = 0.0) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = fn();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0.0 && seconds >= time_limit) {
    pass = false;
    detail += " [over the " + std::to_string(time_limit) + "s limit]";
  }
  report(number, name, pass, seconds, detail);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Recourse targets for a probe matrix under a score function: median target,
// overshoot recourses, invalid ones dropped.
RecourseSet closed_form_recourses(const Matrix& probes, const ScoreFn& score,
                                  const FittedModel& model, double overshoot,
                                  double& s_out) {
  Vector scores(probes.rows());
  for (Index i = 0; i < probes.rows(); ++i) scores[i] = score(probes.row(i).transpose());
  const auto targeting = median_target(scores);
  s_out = targeting.s;
  RecourseConfig rc;
  rc.s = targeting.s + overshoot;
  rc.lambda = 1e-6;

  std::vector<Vector> fact;
  std::vector<Vector> cf;
  for (Index i = 0; i < probes.rows(); ++i) {
    if (!targeting.needs_recourse[static_cast<std::size_t>(i)]) continue;
    const Vector x = probes.row(i).transpose();
    Vector delta;
    if (const auto* lin = std::get_if<LinearModel>(&model)) {
      delta = scfe_linear(*lin, x, rc).delta;
    } else {
      delta = scfe_ntk(std::get<NtkModel>(model), x, rc).delta;
    }
    const Vector xcf = x + delta;
    if (score(xcf) >= targeting.s) {
      fact.push_back(x);
      cf.push_back(xcf);
    }
  }
  RecourseSet rs;
  rs.factual.resize(static_cast<Index>(fact.size()), probes.cols());
  rs.counterfactual.resize(static_cast<Index>(fact.size()), probes.cols());
  for (std::size_t j = 0; j < fact.size(); ++j) {
    rs.factual.row(static_cast<Index>(j)) = fact[j].transpose();
    rs.counterfactual.row(static_cast<Index>(j)) = cf[j].transpose();
  }
  return rs;
}

std::pair<bool, std::string> c1_loo_linear() {
  Rng rng(1001);
  const Dataset ds = oracles::random_dataset(50, 5, rng);
  const LinearModel m = fit_linear_weighted(ds, DataWeights(50));
  double worst = 0.0;
  for (Index i = 0; i < 50; ++i) {
    const InfluenceVector iv = loo_linear(m, ds, i);
    DataWeights omega(50);
    omega.set(i, false);
    const Vector refit = oracles::qr_least_squares(ds.X, ds.y, omega.vec());
    worst = std::max(worst, ((m.w - iv.d) - refit).cwiseAbs().maxCoeff());
  }
  std::ostringstream oss;
  oss << "max |(w - d_i) - refit| = " << worst;
  return {worst <= 1e-8, oss.str()};
}

std::pair<bool, std::string> c2_loo_ntk() {
  Rng rng(1002);
  const Dataset ds = oracles::random_dataset(30, 4, rng);
  const NtkModel m = fit_ntk_weighted(ds, DataWeights(30), 5.0);
  Matrix probes = oracles::random_matrix(50, 4, rng);
  double worst = 0.0;
  for (Index i = 0; i < 30; ++i) {
    const NtkModel upd = loo_ntk(m, ds, i);
    const oracles::ReducedKernelFit reduced(
        ds.X, ds.y, {static_cast<int>(i)}, 5.0,
        [](const Vector& a, const Vector& b) { return ntk_kernel(a, b); });
    for (Index p = 0; p < probes.rows(); ++p) {
      const Vector x = probes.row(p).transpose();
      worst = std::max(worst, std::abs(predict_ntk(upd, x) - reduced.predict(x)));
    }
  }
  std::ostringstream oss;
  oss << "sup |rank-1 - reduced refit| = " << worst;
  return {worst <= 1e-8, oss.str()};
}

std::pair<bool, std::string> c3_mc_kernel() {
  double max_rel = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double deg = 120.0 * i / 9.0;
    const double rad = deg * M_PI / 180.0;
    Vector xi(2);
    xi << 1, 0;
    Vector xj(2);
    xj << std::cos(rad), std::sin(rad);
    const double closed = ntk_kernel(xi, xj);
    const double p = mc_coactivation_probability(xi, xj, 1000000,
                                                 derive_seed({1003, (std::uint64_t)i}));
    const double mc = xi.dot(xj) * p;
    if (closed != 0.0) max_rel = std::max(max_rel, std::abs(mc - closed) / std::abs(closed));
  }
  std::ostringstream oss;
  oss << "max relative error = " << max_rel;
  return {max_rel <= 1e-2, oss.str()};
}

std::pair<bool, std::string> c4_closed_form_recourse() {
  Rng rng(1004);
  double worst_gap = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector w = oracles::random_vector(4, rng).normalized() * rng.uniform(0.5, 3.0);
    const Vector x = oracles::random_vector(4, rng);
    RecourseConfig rc;
    rc.s = w.dot(x) + rng.uniform(0.1, 2.0);
    rc.lambda = 1e-6;
    const auto r = scfe_linear(LinearModel{w}, x, rc);
    worst_gap = std::max(worst_gap, std::abs(r.achieved_score - rc.s));
  }

  const Vector w = oracles::random_vector(3, rng).normalized() * 1.5;
  const Vector x = oracles::random_vector(3, rng);
  RecourseConfig rc;
  rc.s = w.dot(x) + 1.0;
  rc.lambda = 1e-6;
  rc.max_iters = 5000;
  rc.step_size = 0.05;
  const DifferentiableScore f{[&](const Vector& p) { return w.dot(p); },
                              [&](const Vector&) { return w; }};
  const auto gd = scfe_gradient(f, x, rc);
  const auto closed = scfe_linear(LinearModel{w}, x, rc);
  const double dist = (gd.delta - closed.delta).norm();

  std::ostringstream oss;
  oss << "max |f(x_cf) - s| = " << worst_gap << ", |gd - closed| = " << dist;
  return {worst_gap <= 1e-4 && dist <= 1e-4, oss.str()};
}

std::pair<bool, std::string> c5_bound_domination() {
  int delta_checks = 0;
  int phi_checks = 0;
  int ntk_checks = 0;
  int violations = 0;
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(derive_seed({1005, (std::uint64_t)inst}));
    const Dataset ds = oracles::random_dataset(30, 4, rng);
    const LinearModel m = fit_linear_weighted(ds, DataWeights(30));
    const auto influences = loo_linear_all(m, ds);
    const Vector xc = oracles::random_vector(4, rng);
    const double bound_delta = bound_outcome_linear(ds, m, xc);
    for (const auto& iv : influences) {
      ++delta_checks;
      if (std::abs(iv.d.dot(xc)) > bound_delta) ++violations;
    }

    bool precondition = true;
    for (const auto& iv : influences) {
      if (m.w.dot(m.w - iv.d) < 0.0) precondition = false;
    }
    if (precondition) {
      RecourseConfig rc;
      rc.s = 0.0;
      rc.lambda = 1e-10;
      const Vector x = oracles::random_vector(4, rng);
      const double bound_phi = bound_action_linear(ds, m, x);
      const Vector delta_full = scfe_linear(m, x, rc).delta;
      for (const auto& iv : influences) {
        ++phi_checks;
        const Vector delta_i = scfe_linear(LinearModel{m.w - iv.d}, x, rc).delta;
        if ((delta_full - delta_i).norm() > bound_phi) ++violations;
      }
    }

    const NtkModel ntk = fit_ntk_weighted(ds, DataWeights(30), 5.0);
    const double bound_ntk = bound_outcome_ntk(ds, ntk, xc);
    for (Index i = 0; i < 30; ++i) {
      ++ntk_checks;
      const NtkModel upd = loo_ntk(ntk, ds, i);
      if (std::abs(predict_ntk(ntk, xc) - predict_ntk(upd, xc)) > bound_ntk) {
        ++violations;
      }
    }
  }
  std::ostringstream oss;
  oss << violations << " violations over " << delta_checks << "+" << phi_checks << "+"
      << ntk_checks << " checks";
  return {violations == 0 && delta_checks > 0 && phi_checks > 0, oss.str()};
}

std::pair<bool, std::string> c6_greedy_vs_brute() {
  const Dataset ds = synth_regression(12, 2, 0.1, 0.25, 1);
  const LinearModel m = fit_linear_weighted(ds, DataWeights(12));
  FittedModel model = m;
  const ScoreFn score = make_score_fn(model);
  Rng rng(1001);
  const Matrix probes = oracles::random_matrix(20, 2, rng);
  double s = 0.0;
  const RecourseSet rs = closed_form_recourses(probes, score, model, 0.05, s);

  AttackConfig cfg;
  cfg.M = 3;
  cfg.model_kind = ModelKind::linear;
  cfg.recourse_kind = RecourseMethod::closed_linear;
  cfg.recourse.s = s + 0.05;
  cfg.recourse.lambda = 1e-6;
  cfg.s_invalid = s;

  const AttackResult greedy = greedy_attack(ds, rs, cfg);
  const AttackResult brute = brute_force_attack(ds, rs, cfg);

  const bool k1 = greedy.curve[1].metric_value == brute.curve[1].metric_value;
  bool dominance = true;
  bool floor = true;
  for (int k = 2; k <= 3; ++k) {
    dominance = dominance && brute.curve[(std::size_t)k].metric_value >=
                                 greedy.curve[(std::size_t)k].metric_value;
    floor = floor && greedy.curve[(std::size_t)k].metric_value >=
                         0.8 * brute.curve[(std::size_t)k].metric_value;
  }
  std::ostringstream oss;
  oss << "greedy k=1..3: " << greedy.curve[1].metric_value << "/"
      << greedy.curve[2].metric_value << "/" << greedy.curve[3].metric_value
      << ", brute: " << brute.curve[1].metric_value << "/"
      << brute.curve[2].metric_value << "/" << brute.curve[3].metric_value << " (of "
      << rs.size() << ")";
  return {k1 && dominance && floor, oss.str()};
}

std::pair<bool, std::string> c7_attack_effectiveness() {
  const Dataset ds = synth_regression(100, 5, 0.1, 0.1, 1007);
  const LinearModel m = fit_linear_weighted(ds, DataWeights(100));
  FittedModel model = m;
  const ScoreFn score = make_score_fn(model);
  Rng rng(31224);
  const Matrix probes = oracles::random_matrix(60, 5, rng);
  double s = 0.0;
  const RecourseSet rs = closed_form_recourses(probes, score, model, 0.05, s);

  AttackConfig cfg;
  cfg.M = 5;
  cfg.model_kind = ModelKind::linear;
  cfg.recourse_kind = RecourseMethod::closed_linear;
  cfg.recourse.s = s + 0.05;
  cfg.recourse.lambda = 1e-6;
  cfg.s_invalid = s;
  cfg.seed = 1007;

  const AttackResult greedy = greedy_attack(ds, rs, cfg);
  const AttackResult sgd = sgd_attack(ds, rs, cfg);
  const RandomBaselineResult rnd = random_baseline(ds, rs, cfg, 20);

  const double greedy5 = greedy.ground_truth[5].invalidation_rate;
  const double sgd5 = sgd.ground_truth[5].invalidation_rate;
  const double rnd5 = rnd.mean_curve[5].invalidation_rate;
  std::ostringstream oss;
  oss << "greedy " << greedy5 << ", sgd " << sgd5 << ", random mean " << rnd5;
  return {greedy5 >= rnd5 + 0.20 && sgd5 >= rnd5 + 0.20, oss.str()};
}

std::pair<bool, std::string> c8_jackknife_quality() {
  Rng rng(1008);
  Dataset ds;
  ds.X = oracles::random_matrix(200, 4, rng);
  ds.y.resize(200);
  const Vector beta = oracles::random_vector(4, rng);
  for (Index i = 0; i < 200; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-ds.X.row(i).dot(beta)));
    ds.y[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  const LogisticModel m = fit_logistic_weighted(ds, DataWeights(200), 1.0);
  const auto ctx = JackknifeContext::for_logistic(ds, m);
  std::vector<double> ij;
  std::vector<double> exact;
  for (Index i = 0; i < 200; ++i) {
    DataWeights omega(200);
    omega.set(i, false);
    ij.push_back((m.w - ctx.update(omega)).norm());
    exact.push_back((m.w - fit_logistic_weighted(ds, omega, 1.0).w).norm());
  }
  const double rho = oracles::spearman(ij, exact);

  const Dataset lin_ds = oracles::random_dataset(40, 3, rng);
  const LinearModel lin = fit_linear_weighted(lin_ds, DataWeights(40));
  const auto lin_ctx = JackknifeContext::for_linear(lin_ds, lin);
  double worst = 0.0;
  for (Index i = 0; i < 40; ++i) {
    DataWeights omega(40);
    omega.set(i, false);
    const Vector d_ij = lin.w - lin_ctx.update(omega);
    const InfluenceVector iv = loo_linear(lin, lin_ds, i);
    worst = std::max(worst,
                     (d_ij - (1.0 - iv.leverage) * iv.d).cwiseAbs().maxCoeff());
  }
  std::ostringstream oss;
  oss << "spearman = " << rho << ", identity error = " << worst;
  return {rho >= 0.9 && worst <= 1e-10, oss.str()};
}

std::pair<bool, std::string> c9_sensitivity() {
  // Scalar linear-kernel case.
  Dataset ds;
  ds.X = Matrix::Ones(1, 1);
  ds.y = Vector::Zero(1);
  const double w0 = 2.0;
  const double t = 1.0;
  Vector w(1);
  w << w0;
  Vector x_cf(1);
  x_cf << t / w0;
  const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, t);
  Vector dw(1);
  dw << 1.0;
  const double eps = 1e-4;
  const auto upd = first_order_update(ctx, dw, eps);
  const double scalar_err = std::abs(upd.x[0] - t / (w0 + eps));

  // RBF ratio test.
  Rng rng(1009);
  Dataset rds;
  rds.X = oracles::random_matrix(8, 2, rng);
  rds.y = oracles::random_vector(8, rng);
  const SensKernel kernel = SensKernel::rbf(1.0);
  Matrix K(8, 8);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 8; ++j) {
      K(i, j) = kernel(rds.X.row(i).transpose(), rds.X.row(j).transpose());
    }
  }
  K.diagonal().array() += 0.5;
  const Vector rw = K.llt().solve(rds.y);
  const Vector rx = oracles::random_vector(2, rng);
  const double rt = kernel_vector(kernel, rds.X, rx).dot(rw);
  const auto rctx = build_context(rds, kernel, rw, rx, rt);
  Vector rdw = oracles::random_vector(8, rng);
  rdw.normalize();
  const auto residual = [&](double e) {
    const auto u = first_order_update(rctx, rdw, e);
    return std::abs(kernel_vector(kernel, rds.X, u.x).dot(rw + e * rdw) - rt);
  };
  const double r1 = residual(1e-4);
  const double r2 = residual(5e-5);
  const double r4 = residual(2.5e-5);
  const double ratio12 = r1 / r2;
  const double ratio24 = r2 / r4;
  const bool ratios_ok =
      ratio12 >= 3.5 && ratio12 <= 4.5 && ratio24 >= 3.5 && ratio24 <= 4.5;

  const Matrix Jq = rctx.v * rctx.u.transpose() / rctx.v.squaredNorm();
  const double id_err = (Jq.transpose() * rctx.v - rctx.u).cwiseAbs().maxCoeff();

  std::ostringstream oss;
  oss << "scalar err = " << scalar_err << ", ratios = " << ratio12 << "/" << ratio24
      << ", identity err = " << id_err;
  return {scalar_err <= 1e-8 && ratios_ok && id_err <= 1e-12, oss.str()};
}

std::pair<bool, std::string> c10_cli_determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "recdel_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path config = base / "run.cfg";
  {
    std::ofstream out(config);
    out << "dataset.synth_n = 60\n"
        << "dataset.synth_d = 3\n"
        << "attack.method = greedy\n"
        << "attack.M = 4\n"
        << "attack.folds = 2\n"
        << "seed = 4242\n";
  }
  const auto run_once = [&](const std::string& out_dir) {
    const std::string cmd = "\"" + cli + "\" attack --config \"" + config.string() +
                            "\" --out-dir \"" + out_dir + "\"";
    return std::system(cmd.c_str());
  };
  const std::string out_a = (base / "a").string();
  const std::string out_b = (base / "b").string();
  if (run_once(out_a) != 0 || run_once(out_b) != 0) {
    return {false, "cli invocation failed"};
  }
  const std::string csv_a = slurp(out_a + "/curve.csv");
  const std::string csv_b = slurp(out_b + "/curve.csv");
  const bool same = !csv_a.empty() && csv_a == csv_b;
  std::ostringstream oss;
  oss << csv_a.size() << " bytes, " << (same ? "identical" : "different");
  fs::remove_all(base);
  return {same, oss.str()};
}

}  // namespace

int main(int argc, char** argv) {
  run(1, "loo exactness (linear)", c1_loo_linear, 1.0);
  run(2, "loo exactness (ntk)", c2_loo_ntk, 1.0);
  run(3, "ntk kernel monte carlo", c3_mc_kernel, 30.0);
  run(4, "closed-form recourse", c4_closed_form_recourse);
  run(5, "bound domination", c5_bound_domination);
  run(6, "greedy vs brute force", c6_greedy_vs_brute, 10.0);
  run(7, "attack effectiveness", c7_attack_effectiveness, 60.0);
  run(8, "jackknife quality", c8_jackknife_quality);
  run(9, "sensitivity linearization", c9_sensitivity, 5.0);
  if (argc > 1) {
    run(10, "cli determinism", [&] { return c10_cli_determinism(argv[1]); });
  } else {
    report(10, "cli determinism", false, 0.0, "missing CLI path argument");
  }
  std::printf("%d of 10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
