#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "recdel/cli.hpp"
#include "recdel/rng.hpp"

using namespace recdel;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) { return json::parse(slurp(path)); }

}  // namespace

TEST_CASE("config parser applies keys and rejects unknown ones") {
  const RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 64\n"
      "model.kind = ntk\n"
      "model.beta = 2\n"
      "attack.M = 5   # paper-style deletion budget\n"
      "seed = 7\n");
  CHECK(cfg.dataset.synth_n == 64);
  CHECK(cfg.model.kind == ModelKind::ntk);
  CHECK(cfg.model.beta == 2.0);
  CHECK(cfg.attack.M == 5);
  CHECK(cfg.seed == 7);

  CHECK_THROWS_WITH_AS(parse_run_config_text("attack.mm = 3\n"),
                       doctest::Contains("attack.mm"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config_text("attack.M = abc\n"),
                       doctest::Contains("attack.M"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("model.kind = cubic\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("just a line\n"), ConfigError);
}

TEST_CASE("config validation guards module preconditions") {
  RunConfig cfg;
  cfg.dataset.test_fraction = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.model.beta = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = RunConfig{};
  cfg.dataset.source = "csv";
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("cmd_audit produces satisfied bounds on synthetic linear data") {
  TempDir dir("cli_test_audit");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 64\n"
      "dataset.synth_d = 3\n"
      "dataset.outlier_fraction = 0.0\n"
      "audit.max_points = 6\n"
      "seed = 3\n");
  cfg.out_dir = dir.str();
  CHECK(cmd_audit(cfg) == 0);
  const json report = load_json(dir.str() + "/audit_report.json");
  CHECK(report["all_delta_ok"].get<bool>());
  CHECK(report["all_phi_ok"].get<bool>());
  CHECK(report["points"].size() == 6);
}

TEST_CASE("cmd_audit with no deletions reports zero instability") {
  TempDir dir("cli_test_audit_none");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 32\n"
      "audit.deletions = none\n"
      "seed = 4\n");
  cfg.out_dir = dir.str();
  CHECK(cmd_audit(cfg) == 0);
  const json report = load_json(dir.str() + "/audit_report.json");
  for (const auto& pt : report["points"]) {
    CHECK(pt["delta_max"].get<double>() == 0.0);
  }
}

TEST_CASE("cmd_audit on ntk checks the kernel bound") {
  TempDir dir("cli_test_audit_ntk");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 40\n"
      "dataset.synth_d = 3\n"
      "model.kind = ntk\n"
      "model.beta = 5\n"
      "audit.max_points = 4\n"
      "seed = 5\n");
  cfg.out_dir = dir.str();
  CHECK(cmd_audit(cfg) == 0);
  const json report = load_json(dir.str() + "/audit_report.json");
  CHECK(report["all_delta_ok"].get<bool>());
}

TEST_CASE("cmd_audit rejects logistic models") {
  RunConfig cfg;
  cfg.model.kind = ModelKind::logistic;
  CHECK_THROWS_AS(cmd_audit(cfg), ConfigError);
}

TEST_CASE("cmd_attack random emits one row per trial, k and fold") {
  TempDir dir("cli_test_attack_random");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 60\n"
      "dataset.synth_d = 3\n"
      "attack.method = random\n"
      "attack.M = 3\n"
      "attack.trials = 5\n"
      "attack.folds = 2\n"
      "seed = 6\n");
  cfg.out_dir = dir.str();
  CHECK(cmd_attack(cfg) == 0);
  const std::string csv = slurp(dir.str() + "/curve.csv");
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + 5 * (3 + 1) * 2);  // header + trials * (M+1) * folds
}

TEST_CASE("cmd_attack greedy default budget fills the full curve") {
  TempDir dir("cli_test_attack_greedy");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 120\n"
      "dataset.synth_d = 4\n"
      "attack.method = greedy\n"
      "attack.folds = 2\n"
      "seed = 7\n");
  REQUIRE(cfg.attack.M == 14);  // default deletion budget
  cfg.out_dir = dir.str();
  CHECK(cmd_attack(cfg) == 0);
  const json summary = load_json(dir.str() + "/attack_summary.json");
  for (const auto& fold : summary["folds"]) {
    CHECK(fold["curve"].size() == 15);
  }
}

TEST_CASE("cmd_attack brute dominates greedy on a small instance") {
  TempDir dir_b("cli_test_attack_brute");
  TempDir dir_g("cli_test_attack_greedy_small");
  const std::string base =
      "dataset.synth_n = 15\n"
      "dataset.synth_d = 2\n"
      "dataset.outlier_fraction = 0.2\n"
      "dataset.test_fraction = 0.2\n"
      "attack.M = 3\n"
      "attack.folds = 1\n"
      "seed = 8\n";
  RunConfig brute = parse_run_config_text(base + "attack.method = brute\n");
  brute.out_dir = dir_b.str();
  RunConfig greedy = parse_run_config_text(base + "attack.method = greedy\n");
  greedy.out_dir = dir_g.str();
  CHECK(cmd_attack(brute) == 0);
  CHECK(cmd_attack(greedy) == 0);
  const json jb = load_json(dir_b.str() + "/attack_summary.json");
  const json jg = load_json(dir_g.str() + "/attack_summary.json");
  for (int k = 0; k <= 3; ++k) {
    const double vb = jb["folds"][0]["curve"][k]["metric_value"].get<double>();
    const double vg = jg["folds"][0]["curve"][k]["metric_value"].get<double>();
    CHECK(vb >= vg);
  }
}

TEST_CASE("cmd_attack is byte-identical across repeated runs") {
  TempDir dir_a("cli_test_attack_rep_a");
  TempDir dir_b("cli_test_attack_rep_b");
  const std::string base =
      "dataset.synth_n = 50\n"
      "attack.method = sgd\n"
      "attack.M = 3\n"
      "attack.folds = 2\n"
      "attack.sgd_steps = 20\n"
      "seed = 9\n";
  RunConfig a = parse_run_config_text(base);
  a.out_dir = dir_a.str();
  RunConfig b = parse_run_config_text(base);
  b.out_dir = dir_b.str();
  CHECK(cmd_attack(a) == 0);
  CHECK(cmd_attack(b) == 0);
  CHECK(slurp(dir_a.str() + "/curve.csv") == slurp(dir_b.str() + "/curve.csv"));
  CHECK(slurp(dir_a.str() + "/attack_summary.json") ==
        slurp(dir_b.str() + "/attack_summary.json"));
}

TEST_CASE("cmd_attack supports the action metric") {
  TempDir dir("cli_test_attack_action");
  RunConfig cfg = parse_run_config_text(
      "dataset.synth_n = 50\n"
      "dataset.synth_d = 3\n"
      "attack.method = greedy\n"
      "attack.metric = action_sum\n"
      "attack.M = 3\n"
      "attack.folds = 1\n"
      "seed = 13\n");
  cfg.out_dir = dir.str();
  CHECK(cmd_attack(cfg) == 0);
  const json summary = load_json(dir.str() + "/attack_summary.json");
  CHECK(summary["metric"] == "action_sum");
  const auto& curve = summary["folds"][0]["curve"];
  CHECK(curve[0]["metric_value"].get<double>() == doctest::Approx(0.0));
  CHECK(curve[3]["metric_value"].get<double>() > 0.0);
}

TEST_CASE("cmd_attack runs the csv pipeline end to end") {
  TempDir dir("cli_test_attack_csv");
  const std::string csv_path = dir.str() + "/data.csv";
  {
    std::ofstream out(csv_path);
    out << "f0,f1,y\n";
    Rng rng(404);
    for (int i = 0; i < 50; ++i) {
      const double a = rng.normal();
      const double b = rng.normal();
      out << a << ',' << b << ',' << (1.5 * a - 0.5 * b + 0.05 * rng.normal())
          << "\n";
    }
  }
  RunConfig cfg = parse_run_config_text(
      "dataset.source = csv\n"
      "dataset.csv_path = " + csv_path + "\n"
      "dataset.target_column = y\n"
      "attack.method = greedy\n"
      "attack.M = 3\n"
      "attack.folds = 2\n"
      "seed = 12\n");
  cfg.out_dir = dir.str() + "/out";
  CHECK(cmd_attack(cfg) == 0);
  const json summary = load_json(cfg.out_dir + "/attack_summary.json");
  CHECK(summary["folds"].size() == 2);
  for (const auto& fold : summary["folds"]) {
    CHECK(fold["curve"][0]["invalidation_rate"].get<double>() == 0.0);
  }
}

TEST_CASE("cmd_sensitivity writes a passing report with a no-solution entry") {
  TempDir dir("cli_test_sens");
  RunConfig cfg;
  cfg.out_dir = dir.str();
  CHECK(cmd_sensitivity(cfg) == 0);
  const json report = load_json(dir.str() + "/sensitivity_report.json");
  CHECK(report["all_pass"].get<bool>());
  bool saw_degenerate = false;
  for (const auto& e : report["entries"]) {
    if (e["case"] == "degenerate_v_zero") {
      saw_degenerate = true;
      CHECK(e["status"] == "no_solution");
    }
  }
  CHECK(saw_degenerate);
}

TEST_CASE("cmd_ntk_check reports small relative error") {
  TempDir dir("cli_test_ntk");
  RunConfig cfg;
  cfg.out_dir = dir.str();
  cfg.ntk_check.samples = 200000;
  CHECK(cmd_ntk_check(cfg) == 0);
  const json report = load_json(dir.str() + "/ntk_check.json");
  CHECK(report["pass"].get<bool>());
  CHECK(report["entries"].size() == 10);
  // angle 0 reproduces |x|^2 / 2 through the closed form
  CHECK(report["entries"][0]["closed_form"].get<double>() == 0.5);
}
