// Wall-clock comparison of the OpenMP kernels against their serial references
// (gram matrix, Monte-Carlo estimate) and of the greedy candidate scan at one
// thread versus the runtime default.

#include <chrono>
#include <cstdio>
#include <functional>

#include "recdel/attack.hpp"
#include "recdel/parallel.hpp"
#include "recdel/rng.hpp"

using namespace recdel;

namespace {

double time_once(const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) best = std::min(best, time_once(fn));
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %.2fx\n", name,
              serial, parallel, serial / parallel);
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", max_threads());

  {
    const Matrix X = random_matrix(700, 10, 1);
    double sink = 0.0;
    const double serial = best_of(3, [&] { sink += ntk_gram_serial(X, X)(0, 0); });
    const double parallel = best_of(3, [&] { sink += ntk_gram(X, X)(0, 0); });
    row("ntk_gram 700x700", serial, parallel);
    std::printf("  (checksum %g)\n", sink);
  }

  {
    Vector xi(3);
    xi << 1, 0, 0;
    Vector xj(3);
    xj << 0.5, 0.5, std::sqrt(0.5);
    double sink = 0.0;
    const double serial = best_of(3, [&] {
      sink += mc_coactivation_probability_serial(xi, xj, 4000000, 7);
    });
    const double parallel =
        best_of(3, [&] { sink += mc_coactivation_probability(xi, xj, 4000000, 7); });
    row("mc estimate 4M samples", serial, parallel);
    std::printf("  (checksum %g)\n", sink);
  }

  {
    const Dataset ds = synth_regression(300, 6, 0.1, 0.1, 3);
    const LinearModel m = fit_linear_weighted(ds, DataWeights(300));
    Rng rng(4);
    Matrix probes = random_matrix(80, 6, 5);
    Vector scores(probes.rows());
    for (Index i = 0; i < probes.rows(); ++i) {
      scores[i] = predict_linear(m, probes.row(i).transpose());
    }
    const auto targeting = median_target(scores);

    AttackConfig cfg;
    cfg.M = 8;
    cfg.model_kind = ModelKind::linear;
    cfg.recourse.s = targeting.s + 1e-3;
    cfg.recourse.lambda = 1e-6;
    cfg.s_invalid = targeting.s;

    RecourseConfig rc = cfg.recourse;
    std::vector<Vector> fact;
    std::vector<Vector> cf;
    for (Index i = 0; i < probes.rows(); ++i) {
      if (!targeting.needs_recourse[static_cast<std::size_t>(i)]) continue;
      const Vector x = probes.row(i).transpose();
      const auto r = scfe_linear(m, x, rc);
      if (r.achieved_score >= targeting.s) {
        fact.push_back(x);
        cf.push_back(r.x_cf);
      }
    }
    RecourseSet rs;
    rs.factual.resize(static_cast<Index>(fact.size()), 6);
    rs.counterfactual.resize(static_cast<Index>(fact.size()), 6);
    for (std::size_t j = 0; j < fact.size(); ++j) {
      rs.factual.row(static_cast<Index>(j)) = fact[j].transpose();
      rs.counterfactual.row(static_cast<Index>(j)) = cf[j].transpose();
    }

    double sink = 0.0;
    set_max_threads(1);
    const double serial =
        best_of(3, [&] { sink += greedy_attack(ds, rs, cfg).curve.back().metric_value; });
    set_max_threads(0);
    const double parallel =
        best_of(3, [&] { sink += greedy_attack(ds, rs, cfg).curve.back().metric_value; });
    row("greedy scan n=300 M=8", serial, parallel);
    std::printf("  (checksum %g)\n", sink);
  }

  return 0;
}
