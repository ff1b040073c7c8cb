#pragma once

#include <cstdint>
#include <optional>

#include "recdel/influence.hpp"
#include "recdel/recourse.hpp"

namespace recdel {

enum class AttackMetric { outcome_count, action_sum };
enum class AttackMethod { greedy, sgd, random, brute };

/// Prescribed recourses under the full model: factual points and the
/// counterfactuals handed out, one row each.
struct RecourseSet {
  Matrix factual;         // q x d
  Matrix counterfactual;  // q x d

  Index size() const { return counterfactual.rows(); }
  Matrix deltas() const { return counterfactual - factual; }
};

struct SgdParams {
  int steps = 150;
  int mc_samples = 4;    // K
  double sigma = 0.5;    // gate noise sd
  double eta = 0.05;     // sparsity strength
  double lr = 0.5;       // ascent rate
  double tau = 0.1;      // sigmoid temperature of the soft invalidation
};

struct AttackConfig {
  int M = 14;  // max deletions
  AttackMetric metric = AttackMetric::outcome_count;
  ModelKind model_kind = ModelKind::linear;
  RecourseMethod recourse_kind = RecourseMethod::closed_linear;
  std::uint64_t seed = 0;
  SgdParams sgd;
  ModelHyper hyper;
  RecourseConfig recourse;   // generation target, lambda, margins
  double s_invalid = 0.0;    // threshold of the invalidation count I(f < s)
};

struct CurvePoint {
  int k = 0;
  double metric_value = 0.0;
  double invalidation_rate = 0.0;
  double metric_sd = 0.0;  // filled by the random baseline
  double rate_sd = 0.0;
};

struct AttackResult {
  std::vector<int> removed_indices;       // greedy order or argsort order
  std::vector<CurvePoint> curve;          // as measured by the method itself
  std::vector<CurvePoint> ground_truth;   // exact-refit re-evaluation per k
  Vector final_omega;
  std::optional<Vector> sgd_mu;           // final gate means (sgd only)
};

/// Per-point ground-truth metrics after an exact refit on the masked data.
struct GroundTruthMetrics {
  std::vector<double> delta;      // outcome instability per recourse
  std::vector<bool> invalidated;  // f_new(x_cf) < s
  std::vector<double> phi;        // |delta_1 - delta_omega|_2 per recourse
  int invalidation_count = 0;
  double invalidation_rate = 0.0;
  double phi_sum = 0.0;
  double metric_value = 0.0;  // per the configured metric
};

/// Greedy deletion: M rounds, each scoring every remaining candidate with the
/// closed-form (linear, NTK) or jackknife (logistic) weight update, removing
/// the argmax with ties to the lowest index, then refitting.
AttackResult greedy_attack(const Dataset& ds, const RecourseSet& rs,
                           const AttackConfig& cfg);

/// Stochastic-gate relaxation: gradient ascent on the soft metric minus
/// eta * sum_i Phi((1 - mu_i) / sigma), then stable ascending argsort of mu
/// picks the M removals. Ground truth is re-evaluated by exact refits.
AttackResult sgd_attack(const Dataset& ds, const RecourseSet& rs,
                        const AttackConfig& cfg);

struct RandomBaselineResult {
  std::vector<CurvePoint> mean_curve;                // mean with sd fields set
  std::vector<std::vector<CurvePoint>> trial_curves; // one curve per trial
  std::vector<std::vector<int>> trial_removed;
};

/// Uniform without-replacement deletions, exact refits, mean and sd per k.
RandomBaselineResult random_baseline(const Dataset& ds, const RecourseSet& rs,
                                     const AttackConfig& cfg, int trials);

/// Exhaustive search over all removal sets of size <= M with exact refits.
/// Picking an optimal deletion subset is NP-hard in general (it embeds
/// knapsack-style selection), so the oracle is capped at M <= 3, n <= 16,
/// C(n, M) <= 1e6. Reported sets are lexicographically smallest among ties.
AttackResult brute_force_attack(const Dataset& ds, const RecourseSet& rs,
                                const AttackConfig& cfg);

GroundTruthMetrics evaluate_ground_truth(const Dataset& ds, const DataWeights& omega,
                                         const RecourseSet& rs,
                                         const AttackConfig& cfg);

/// The differentiable surface the SGD attack ascends: the soft metric at
/// fractional data weights, with its gradient when requested. Exposed for
/// diagnostics.
double sgd_soft_objective(const Dataset& ds, const RecourseSet& rs,
                          const AttackConfig& cfg, const Vector& omega,
                          Vector* grad = nullptr);

}  // namespace recdel
