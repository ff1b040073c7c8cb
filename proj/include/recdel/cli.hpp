#pragma once

#include <cstdint>
#include <string>

#include "recdel/attack.hpp"

namespace recdel {

/// Run configuration parsed from a `key = value` text file. Unknown keys are
/// rejected; every knob is validated before any compute starts.
struct RunConfig {
  struct DatasetConfig {
    std::string source = "synth";  // synth | csv
    std::string csv_path;
    std::string target_column;
    int synth_n = 120;
    int synth_d = 5;
    double noise_sd = 0.1;
    double outlier_fraction = 0.1;
    double test_fraction = 0.2;
    bool standardize = true;
  } dataset;

  struct ModelConfig {
    ModelKind kind = ModelKind::linear;
    double beta = 5.0;  // ntk ridge; 2.0 is the alternative used for one dataset
    double l2 = 1.0;    // logistic regularization (C = 1)
  } model;

  struct RecourseCli {
    std::string kind = "auto";     // auto | closed_linear | closed_ntk | gradient
    std::string s_mode = "median"; // median | explicit
    double s_explicit = 0.0;
    double lambda = 1e-6;
    int max_iters = 1000;
    double step_size = 0.05;
    // The generation target sits this far above s, mirroring the overshoot of
    // an early-stopped gradient recourse (about one step on standardized
    // features). Prescribed recourses then clear the threshold with slack.
    double overshoot = 0.05;
    double validity_margin = -1.0;  // < 0 means "same as overshoot"
  } recourse;

  struct AttackCli {
    std::string method = "greedy";  // greedy | sgd | random | brute
    AttackMetric metric = AttackMetric::outcome_count;
    int M = 14;
    int trials = 20;
    int folds = 5;
    SgdParams sgd;
  } attack;

  struct AuditCli {
    std::string deletions = "single_all";  // single_all | none
    int max_points = 0;                    // 0 = all recourse-needing points
  } audit;

  struct SensitivityCli {
    int rbf_n = 8;
    int rbf_d = 2;
    double rbf_gamma = 1.0;
    double ridge = 0.5;
    double eps = 1e-4;
  } sensitivity;

  struct NtkCheckCli {
    std::int64_t samples = 1000000;
    int angles = 10;
  } ntk_check;

  std::string out_dir = "out";
  std::uint64_t seed = 42;
};

RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::string& path);
void validate_config(const RunConfig& cfg);

/// Audit: per-point instability and bound satisfaction over all single
/// deletions; writes audit_report.json.
int cmd_audit(const RunConfig& cfg);

/// Attack: per-fold tradeoff curves; writes curve.csv and attack_summary.json.
int cmd_attack(const RunConfig& cfg);

/// Sensitivity: the first-order counterfactual validation suite; writes
/// sensitivity_report.json.
int cmd_sensitivity(const RunConfig& cfg);

/// Kernel Monte-Carlo check over an angle grid; writes ntk_check.json.
int cmd_ntk_check(const RunConfig& cfg);

}  // namespace recdel
