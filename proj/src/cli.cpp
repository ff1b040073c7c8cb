#include "recdel/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "recdel/instability.hpp"
#include "recdel/rng.hpp"
#include "recdel/sensitivity.hpp"

namespace recdel {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::int64_t parse_i64(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                      v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

ModelKind parse_model_kind(const std::string& key, const std::string& v) {
  if (v == "linear") return ModelKind::linear;
  if (v == "ntk") return ModelKind::ntk;
  if (v == "logistic") return ModelKind::logistic;
  throw ConfigError("config key '" + key + "': unknown model kind '" + v + "'");
}

AttackMetric parse_metric(const std::string& key, const std::string& v) {
  if (v == "outcome_count") return AttackMetric::outcome_count;
  if (v == "action_sum") return AttackMetric::action_sum;
  throw ConfigError("config key '" + key + "': unknown metric '" + v + "'");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto& ds = cfg.dataset;
  auto& md = cfg.model;
  auto& rc = cfg.recourse;
  auto& at = cfg.attack;

  if (key == "dataset.source") {
    if (value != "synth" && value != "csv") {
      throw ConfigError("config key 'dataset.source': expected synth|csv");
    }
    ds.source = value;
  } else if (key == "dataset.csv_path") {
    ds.csv_path = value;
  } else if (key == "dataset.target_column") {
    ds.target_column = value;
  } else if (key == "dataset.synth_n") {
    ds.synth_n = parse_int(key, value);
  } else if (key == "dataset.synth_d") {
    ds.synth_d = parse_int(key, value);
  } else if (key == "dataset.noise_sd") {
    ds.noise_sd = parse_double(key, value);
  } else if (key == "dataset.outlier_fraction") {
    ds.outlier_fraction = parse_double(key, value);
  } else if (key == "dataset.test_fraction") {
    ds.test_fraction = parse_double(key, value);
  } else if (key == "dataset.standardize") {
    ds.standardize = parse_bool(key, value);
  } else if (key == "model.kind") {
    md.kind = parse_model_kind(key, value);
  } else if (key == "model.beta") {
    md.beta = parse_double(key, value);
  } else if (key == "model.l2") {
    md.l2 = parse_double(key, value);
  } else if (key == "recourse.kind") {
    if (value != "auto" && value != "closed_linear" && value != "closed_ntk" &&
        value != "gradient") {
      throw ConfigError("config key 'recourse.kind': unknown recourse kind '" + value + "'");
    }
    rc.kind = value;
  } else if (key == "recourse.s_mode") {
    if (value != "median" && value != "explicit") {
      throw ConfigError("config key 'recourse.s_mode': expected median|explicit");
    }
    rc.s_mode = value;
  } else if (key == "recourse.s") {
    rc.s_explicit = parse_double(key, value);
  } else if (key == "recourse.lambda") {
    rc.lambda = parse_double(key, value);
  } else if (key == "recourse.max_iters") {
    rc.max_iters = parse_int(key, value);
  } else if (key == "recourse.step_size") {
    rc.step_size = parse_double(key, value);
  } else if (key == "recourse.overshoot") {
    rc.overshoot = parse_double(key, value);
  } else if (key == "recourse.validity_margin") {
    rc.validity_margin = parse_double(key, value);
  } else if (key == "attack.method") {
    if (value != "greedy" && value != "sgd" && value != "random" && value != "brute") {
      throw ConfigError("config key 'attack.method': unknown method '" + value + "'");
    }
    at.method = value;
  } else if (key == "attack.metric") {
    at.metric = parse_metric(key, value);
  } else if (key == "attack.M") {
    at.M = parse_int(key, value);
  } else if (key == "attack.trials") {
    at.trials = parse_int(key, value);
  } else if (key == "attack.folds") {
    at.folds = parse_int(key, value);
  } else if (key == "attack.sgd_steps") {
    at.sgd.steps = parse_int(key, value);
  } else if (key == "attack.sgd_samples") {
    at.sgd.mc_samples = parse_int(key, value);
  } else if (key == "attack.sgd_sigma") {
    at.sgd.sigma = parse_double(key, value);
  } else if (key == "attack.sgd_eta") {
    at.sgd.eta = parse_double(key, value);
  } else if (key == "attack.sgd_lr") {
    at.sgd.lr = parse_double(key, value);
  } else if (key == "attack.sgd_tau") {
    at.sgd.tau = parse_double(key, value);
  } else if (key == "audit.deletions") {
    if (value != "single_all" && value != "none") {
      throw ConfigError("config key 'audit.deletions': expected single_all|none");
    }
    cfg.audit.deletions = value;
  } else if (key == "audit.max_points") {
    cfg.audit.max_points = parse_int(key, value);
  } else if (key == "sensitivity.rbf_n") {
    cfg.sensitivity.rbf_n = parse_int(key, value);
  } else if (key == "sensitivity.rbf_d") {
    cfg.sensitivity.rbf_d = parse_int(key, value);
  } else if (key == "sensitivity.rbf_gamma") {
    cfg.sensitivity.rbf_gamma = parse_double(key, value);
  } else if (key == "sensitivity.ridge") {
    cfg.sensitivity.ridge = parse_double(key, value);
  } else if (key == "sensitivity.eps") {
    cfg.sensitivity.eps = parse_double(key, value);
  } else if (key == "ntk_check.samples") {
    cfg.ntk_check.samples = parse_i64(key, value);
  } else if (key == "ntk_check.angles") {
    cfg.ntk_check.angles = parse_int(key, value);
  } else if (key == "output.dir") {
    cfg.out_dir = value;
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

void validate_config(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.source == "csv" && d.csv_path.empty()) {
    throw ConfigError("dataset.csv_path required when dataset.source = csv");
  }
  if (d.source == "csv" && d.target_column.empty()) {
    throw ConfigError("dataset.target_column required when dataset.source = csv");
  }
  if (d.source == "synth") {
    if (d.synth_n < 4) throw ConfigError("dataset.synth_n must be >= 4");
    if (d.synth_d < 1) throw ConfigError("dataset.synth_d must be >= 1");
    if (d.noise_sd < 0) throw ConfigError("dataset.noise_sd must be >= 0");
    if (d.outlier_fraction < 0 || d.outlier_fraction >= 0.5) {
      throw ConfigError("dataset.outlier_fraction must lie in [0, 0.5)");
    }
  }
  if (d.test_fraction <= 0.0 || d.test_fraction >= 1.0) {
    throw ConfigError("dataset.test_fraction must lie in (0, 1)");
  }
  if (cfg.model.beta <= 0.0) throw ConfigError("model.beta must be > 0");
  if (cfg.model.l2 < 0.0) throw ConfigError("model.l2 must be >= 0");
  if (cfg.recourse.lambda < 0.0) throw ConfigError("recourse.lambda must be >= 0");
  if (cfg.recourse.max_iters < 1) throw ConfigError("recourse.max_iters must be >= 1");
  if (cfg.recourse.step_size <= 0.0) throw ConfigError("recourse.step_size must be > 0");
  if (cfg.recourse.overshoot < 0.0) throw ConfigError("recourse.overshoot must be >= 0");
  if (cfg.attack.M < 0) throw ConfigError("attack.M must be >= 0");
  if (cfg.attack.trials < 1) throw ConfigError("attack.trials must be >= 1");
  if (cfg.attack.folds < 1) throw ConfigError("attack.folds must be >= 1");
  const auto& s = cfg.attack.sgd;
  if (s.steps < 0) throw ConfigError("attack.sgd_steps must be >= 0");
  if (s.mc_samples < 1) throw ConfigError("attack.sgd_samples must be >= 1");
  if (s.sigma < 0) throw ConfigError("attack.sgd_sigma must be >= 0");
  if (s.eta < 0) throw ConfigError("attack.sgd_eta must be >= 0");
  if (s.lr <= 0) throw ConfigError("attack.sgd_lr must be > 0");
  if (s.tau <= 0) throw ConfigError("attack.sgd_tau must be > 0");
  if (cfg.ntk_check.samples < 1) throw ConfigError("ntk_check.samples must be >= 1");
  if (cfg.ntk_check.angles < 1) throw ConfigError("ntk_check.angles must be >= 1");
  if (cfg.sensitivity.rbf_n < 2) throw ConfigError("sensitivity.rbf_n must be >= 2");
  if (cfg.sensitivity.rbf_d < 1) throw ConfigError("sensitivity.rbf_d must be >= 1");
  if (cfg.sensitivity.rbf_gamma <= 0) throw ConfigError("sensitivity.rbf_gamma must be > 0");
  if (cfg.sensitivity.ridge <= 0) throw ConfigError("sensitivity.ridge must be > 0");
  if (cfg.sensitivity.eps <= 0 || cfg.sensitivity.eps > 0.1) {
    throw ConfigError("sensitivity.eps must lie in (0, 0.1]");
  }
}

namespace {

// ---------------------------------------------------------------------------
// Shared pipeline: load, split, standardize, fit, pick the recourse target.
// ---------------------------------------------------------------------------

struct Pipeline {
  Dataset train;
  Dataset test;
  FittedModel model;
  ScoreFn score;
  double s_target = 0.0;          // invalidation threshold
  std::vector<Index> need;        // test rows below the target
  RecourseMethod rkind = RecourseMethod::closed_linear;
  RecourseConfig rc;              // generation config (target s + overshoot)
};

RecourseMethod resolve_recourse_kind(const RunConfig& cfg) {
  const std::string& k = cfg.recourse.kind;
  if (k == "closed_linear") {
    if (cfg.model.kind == ModelKind::ntk) {
      throw ConfigError("recourse.kind closed_linear does not apply to the ntk model");
    }
    return RecourseMethod::closed_linear;
  }
  if (k == "closed_ntk") {
    if (cfg.model.kind != ModelKind::ntk) {
      throw ConfigError("recourse.kind closed_ntk requires model.kind = ntk");
    }
    return RecourseMethod::closed_ntk;
  }
  if (k == "gradient") return RecourseMethod::gradient;
  // auto
  return cfg.model.kind == ModelKind::ntk ? RecourseMethod::closed_ntk
                                          : RecourseMethod::closed_linear;
}

Pipeline prepare(const RunConfig& cfg) {
  validate_config(cfg);

  Dataset full = cfg.dataset.source == "csv"
                     ? load_csv(cfg.dataset.csv_path, cfg.dataset.target_column)
                     : synth_regression(cfg.dataset.synth_n, cfg.dataset.synth_d,
                                        cfg.dataset.noise_sd,
                                        cfg.dataset.outlier_fraction, cfg.seed);

  // Deterministic shuffled split.
  const Index n = full.n();
  if (n < 3) throw ConfigError("dataset too small to split into train and test");
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed({cfg.seed, 0x73706c69ULL}));
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Index n_test = static_cast<Index>(std::llround(cfg.dataset.test_fraction * n));
  n_test = std::clamp<Index>(n_test, 1, n - 2);
  const Index n_train = n - n_test;

  Pipeline p;
  p.train.X.resize(n_train, full.d());
  p.train.y.resize(n_train);
  p.test.X.resize(n_test, full.d());
  p.test.y.resize(n_test);
  p.train.feature_names = full.feature_names;
  p.test.feature_names = full.feature_names;
  for (Index i = 0; i < n_train; ++i) {
    p.train.X.row(i) = full.X.row(order[static_cast<std::size_t>(i)]);
    p.train.y[i] = full.y[order[static_cast<std::size_t>(i)]];
  }
  for (Index i = 0; i < n_test; ++i) {
    p.test.X.row(i) = full.X.row(order[static_cast<std::size_t>(n_train + i)]);
    p.test.y[i] = full.y[order[static_cast<std::size_t>(n_train + i)]];
  }

  if (cfg.dataset.standardize) {
    auto [train_std, state] = standardize(p.train);
    p.train = std::move(train_std);
    for (Index j = 0; j < p.test.d(); ++j) {
      p.test.X.col(j) = (p.test.X.col(j).array() - state.mean[j]) / state.scale[j];
    }
  }

  if (cfg.model.kind == ModelKind::logistic) {
    // Binarize against the train median so both splits share the rule.
    const auto t = median_target(p.train.y);
    for (Index i = 0; i < p.train.n(); ++i) p.train.y[i] = p.train.y[i] > t.s ? 1.0 : 0.0;
    for (Index i = 0; i < p.test.n(); ++i) p.test.y[i] = p.test.y[i] > t.s ? 1.0 : 0.0;
  }

  p.model = refit_exact(p.train, DataWeights(p.train.n()), cfg.model.kind,
                        ModelHyper{cfg.model.beta, cfg.model.l2});
  p.score = make_score_fn(p.model);

  Vector test_scores(p.test.n());
  for (Index i = 0; i < p.test.n(); ++i) {
    test_scores[i] = p.score(p.test.X.row(i).transpose());
  }
  if (cfg.recourse.s_mode == "median") {
    const auto targeting = median_target(test_scores);
    p.s_target = targeting.s;
    for (Index i = 0; i < p.test.n(); ++i) {
      if (targeting.needs_recourse[static_cast<std::size_t>(i)]) p.need.push_back(i);
    }
  } else {
    p.s_target = cfg.recourse.s_explicit;
    for (Index i = 0; i < p.test.n(); ++i) {
      if (test_scores[i] < p.s_target) p.need.push_back(i);
    }
  }

  p.rkind = resolve_recourse_kind(cfg);
  p.rc.s = p.s_target + cfg.recourse.overshoot;
  p.rc.lambda = cfg.recourse.lambda;
  p.rc.max_iters = cfg.recourse.max_iters;
  p.rc.step_size = cfg.recourse.step_size;
  p.rc.validity_margin = cfg.recourse.validity_margin >= 0.0
                             ? cfg.recourse.validity_margin
                             : cfg.recourse.overshoot;
  return p;
}

RecourseResult generate_recourse(const Pipeline& p, const Vector& x) {
  switch (p.rkind) {
    case RecourseMethod::closed_linear: {
      if (const auto* lin = std::get_if<LinearModel>(&p.model)) {
        return scfe_linear(*lin, x, p.rc);
      }
      const auto& lg = std::get<LogisticModel>(p.model);
      return scfe_linear(LinearModel{lg.w}, x, p.rc);
    }
    case RecourseMethod::closed_ntk:
      return scfe_ntk(std::get<NtkModel>(p.model), x, p.rc);
    case RecourseMethod::gradient:
      return scfe_gradient(make_differentiable_score(p.model), x, p.rc);
  }
  throw Error("unknown recourse kind");
}

struct GeneratedRecourses {
  RecourseSet rs;
  std::vector<Index> kept;  // test rows behind each recourse row
  int excluded = 0;         // recourses that did not clear the target
};

GeneratedRecourses generate_recourses(const Pipeline& p, const std::vector<Index>& rows) {
  std::vector<Vector> fact;
  std::vector<Vector> cf;
  GeneratedRecourses out;
  for (Index row : rows) {
    const Vector x = p.test.X.row(row).transpose();
    const RecourseResult r = generate_recourse(p, x);
    // The attack evaluates I(f < s); only recourses that clear s count.
    if (r.achieved_score >= p.s_target) {
      fact.push_back(x);
      cf.push_back(r.x_cf);
      out.kept.push_back(row);
    } else {
      ++out.excluded;
    }
  }
  const Index q = static_cast<Index>(fact.size());
  const Index d = p.test.d();
  out.rs.factual.resize(q, d);
  out.rs.counterfactual.resize(q, d);
  for (Index j = 0; j < q; ++j) {
    out.rs.factual.row(j) = fact[static_cast<std::size_t>(j)].transpose();
    out.rs.counterfactual.row(j) = cf[static_cast<std::size_t>(j)].transpose();
  }
  return out;
}

AttackConfig make_attack_config(const RunConfig& cfg, const Pipeline& p) {
  AttackConfig a;
  a.M = cfg.attack.M;
  a.metric = cfg.attack.metric;
  a.model_kind = cfg.model.kind;
  a.recourse_kind = p.rkind;
  a.seed = cfg.seed;
  a.sgd = cfg.attack.sgd;
  a.hyper = ModelHyper{cfg.model.beta, cfg.model.l2};
  a.recourse = p.rc;
  a.s_invalid = p.s_target;
  return a;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

json curve_to_json(const std::vector<CurvePoint>& curve) {
  json arr = json::array();
  for (const auto& pt : curve) {
    arr.push_back(json{{"k", pt.k},
                       {"metric_value", pt.metric_value},
                       {"invalidation_rate", pt.invalidation_rate},
                       {"metric_sd", pt.metric_sd},
                       {"rate_sd", pt.rate_sd}});
  }
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// attack command
// ---------------------------------------------------------------------------

int cmd_attack(const RunConfig& cfg) {
  const Pipeline p = prepare(cfg);
  const Index n_test = p.test.n();
  if (cfg.attack.folds > n_test) {
    throw ConfigError("attack.folds exceeds the number of test points");
  }
  const FoldSplit folds =
      make_folds(static_cast<int>(n_test), cfg.attack.folds, cfg.seed);

  std::ostringstream csv;
  csv << "k,invalidation_rate,metric_value,method,fold,seed\n";
  const auto emit = [&](const CurvePoint& pt, const std::string& method, int fold) {
    csv << pt.k << ',' << fmt17(pt.invalidation_rate) << ',' << fmt17(pt.metric_value)
        << ',' << method << ',' << fold << ',' << cfg.seed << '\n';
  };

  json fold_reports = json::array();
  std::vector<double> mean_rate(static_cast<std::size_t>(cfg.attack.M) + 1, 0.0);
  std::vector<double> mean_metric(static_cast<std::size_t>(cfg.attack.M) + 1, 0.0);

  for (int f = 0; f < cfg.attack.folds; ++f) {
    std::vector<Index> rows;
    for (Index row : p.need) {
      if (folds.assignment[static_cast<std::size_t>(row)] == f) rows.push_back(row);
    }
    const GeneratedRecourses gen = generate_recourses(p, rows);
    AttackConfig acfg = make_attack_config(cfg, p);
    acfg.seed = derive_seed({cfg.seed, 0x61746bULL, static_cast<std::uint64_t>(f)});

    json report{{"fold", f},
                {"recourse_points", gen.rs.size()},
                {"excluded_recourses", gen.excluded}};

    std::vector<CurvePoint> fold_curve;
    if (cfg.attack.method == "greedy") {
      const AttackResult res = greedy_attack(p.train, gen.rs, acfg);
      for (const auto& pt : res.ground_truth) emit(pt, "greedy", f);
      fold_curve = res.ground_truth;
      report["removed_indices"] = res.removed_indices;
      report["surrogate_curve"] = curve_to_json(res.curve);
    } else if (cfg.attack.method == "sgd") {
      const AttackResult res = sgd_attack(p.train, gen.rs, acfg);
      for (const auto& pt : res.ground_truth) emit(pt, "sgd", f);
      fold_curve = res.ground_truth;
      report["removed_indices"] = res.removed_indices;
    } else if (cfg.attack.method == "brute") {
      const AttackResult res = brute_force_attack(p.train, gen.rs, acfg);
      for (const auto& pt : res.curve) emit(pt, "brute", f);
      fold_curve = res.curve;
      report["removed_indices"] = res.removed_indices;
    } else {  // random
      const RandomBaselineResult res =
          random_baseline(p.train, gen.rs, acfg, cfg.attack.trials);
      for (int t = 0; t < cfg.attack.trials; ++t) {
        for (const auto& pt : res.trial_curves[static_cast<std::size_t>(t)]) {
          emit(pt, "random", f);
        }
      }
      fold_curve = res.mean_curve;
      report["mean_curve"] = curve_to_json(res.mean_curve);
    }
    report["curve"] = curve_to_json(fold_curve);
    fold_reports.push_back(std::move(report));
    for (std::size_t k = 0; k < fold_curve.size(); ++k) {
      mean_rate[k] += fold_curve[k].invalidation_rate / cfg.attack.folds;
      mean_metric[k] += fold_curve[k].metric_value / cfg.attack.folds;
    }
  }

  write_text(out_path(cfg, "curve.csv"), csv.str());

  json mean_curve = json::array();
  for (int k = 0; k <= cfg.attack.M; ++k) {
    mean_curve.push_back(json{{"k", k},
                              {"invalidation_rate", mean_rate[static_cast<std::size_t>(k)]},
                              {"metric_value", mean_metric[static_cast<std::size_t>(k)]}});
  }
  const json summary{{"method", cfg.attack.method},
                     {"metric", cfg.attack.metric == AttackMetric::outcome_count
                                    ? "outcome_count"
                                    : "action_sum"},
                     {"target_score", p.s_target},
                     {"seed", cfg.seed},
                     {"folds", fold_reports},
                     {"mean_curve_over_folds", mean_curve}};
  write_json(out_path(cfg, "attack_summary.json"), summary);
  return 0;
}

// ---------------------------------------------------------------------------
// audit command
// ---------------------------------------------------------------------------

int cmd_audit(const RunConfig& cfg) {
  if (cfg.model.kind == ModelKind::logistic) {
    throw ConfigError("audit bounds are stated for linear and ntk models only");
  }
  const Pipeline p = prepare(cfg);

  std::vector<Index> rows = p.need;
  if (cfg.audit.max_points > 0 &&
      static_cast<int>(rows.size()) > cfg.audit.max_points) {
    rows.resize(static_cast<std::size_t>(cfg.audit.max_points));
  }

  json points = json::array();
  bool all_delta_ok = true;
  bool all_phi_ok = true;

  const bool single_all = cfg.audit.deletions == "single_all";

  if (cfg.model.kind == ModelKind::linear) {
    const auto& lin = std::get<LinearModel>(p.model);
    const auto influences = loo_linear_all(lin, p.train);
    double max_d = 0.0;
    for (const auto& iv : influences) max_d = std::max(max_d, iv.d.norm());

    // The linear action bound is stated at s = 0, lambda -> 0, so it is
    // audited with recourses recomputed in that regime.
    RecourseConfig rc0;
    rc0.s = 0.0;
    rc0.lambda = 1e-10;

    // The bound's precondition w'w_{-i} >= 0 does not depend on the point.
    bool action_bound_ok = true;
    std::string action_bound_note = "ok";
    for (const auto& iv : influences) {
      if (lin.w.dot(lin.w - iv.d) < 0.0) {
        action_bound_ok = false;
        action_bound_note =
            "diametrical weight change at index " + std::to_string(iv.index);
        break;
      }
    }

    for (Index row : rows) {
      const Vector x = p.test.X.row(row).transpose();
      const RecourseResult r = generate_recourse(p, x);
      json pt{{"test_index", row}, {"achieved_score", r.achieved_score}};

      if (single_all) {
        double delta_max = 0.0;
        for (const auto& iv : influences) {
          delta_max = std::max(delta_max, std::abs(iv.d.dot(r.x_cf)));
        }
        const double bound_delta = r.x_cf.norm() * max_d;
        pt["delta_max"] = delta_max;
        pt["bound_delta"] = bound_delta;
        pt["delta_ok"] = delta_max <= bound_delta;
        all_delta_ok = all_delta_ok && delta_max <= bound_delta;

        if (action_bound_ok) {
          const Vector delta0 = scfe_linear(lin, x, rc0).delta;
          double phi_max = 0.0;
          for (const auto& iv : influences) {
            const LinearModel reduced{lin.w - iv.d};
            const Vector delta_i = scfe_linear(reduced, x, rc0).delta;
            phi_max = std::max(phi_max, (delta0 - delta_i).norm());
          }
          const double bound_phi = bound_action_linear(p.train, lin, x);
          pt["phi_max"] = phi_max;
          pt["bound_phi"] = bound_phi;
          pt["phi_ok"] = phi_max <= bound_phi;
          pt["phi_regime"] = "s=0,lambda->0";
          all_phi_ok = all_phi_ok && phi_max <= bound_phi;
        } else {
          pt["phi_max"] = nullptr;
          pt["bound_phi"] = nullptr;
          pt["action_bound_precondition"] = action_bound_note;
        }
      } else {
        pt["delta_max"] = 0.0;
        pt["bound_delta"] = 0.0;
        pt["delta_ok"] = true;
      }
      points.push_back(std::move(pt));
    }
  } else {
    // ntk
    const auto& ntk = std::get<NtkModel>(p.model);
    const Index n = p.train.n();
    Matrix Q = ntk_gram(p.train.X, p.train.X);
    Q.diagonal().array() += ntk.beta;
    const Matrix Qinv = Q.llt().solve(Matrix::Identity(n, n));
    std::vector<Vector> dvecs;
    double max_d = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Vector qi = Qinv.col(i);
      Vector di = qi * (qi.dot(p.train.y) / Qinv(i, i));
      max_d = std::max(max_d, di.norm());
      dvecs.push_back(std::move(di));
    }
    for (Index row : rows) {
      const Vector x = p.test.X.row(row).transpose();
      const RecourseResult r = generate_recourse(p, x);
      json pt{{"test_index", row}, {"achieved_score", r.achieved_score}};
      if (single_all) {
        Vector kx(n);
        for (Index i = 0; i < n; ++i) {
          kx[i] = ntk_kernel(r.x_cf, p.train.X.row(i).transpose());
        }
        double delta_max = 0.0;
        for (Index i = 0; i < n; ++i) {
          delta_max = std::max(delta_max, std::abs(kx.dot(dvecs[static_cast<std::size_t>(i)])));
        }
        const double bound_delta = kx.norm() * max_d;
        pt["delta_max"] = delta_max;
        pt["bound_delta"] = bound_delta;
        pt["delta_ok"] = delta_max <= bound_delta;
        all_delta_ok = all_delta_ok && delta_max <= bound_delta;
      } else {
        pt["delta_max"] = 0.0;
        pt["bound_delta"] = 0.0;
        pt["delta_ok"] = true;
      }
      pt["phi_max"] = nullptr;  // no action bound is stated for ntk models
      pt["bound_phi"] = nullptr;
      points.push_back(std::move(pt));
    }
  }

  const json report{{"model", cfg.model.kind == ModelKind::linear ? "linear" : "ntk"},
                    {"deletions", cfg.audit.deletions},
                    {"target_score", p.s_target},
                    {"audited_points", points.size()},
                    {"all_delta_ok", all_delta_ok},
                    {"all_phi_ok", all_phi_ok},
                    {"points", points}};
  write_json(out_path(cfg, "audit_report.json"), report);
  return 0;
}

// ---------------------------------------------------------------------------
// sensitivity command
// ---------------------------------------------------------------------------

int cmd_sensitivity(const RunConfig& cfg) {
  validate_config(cfg);
  json entries = json::array();

  // Scalar linear-kernel case: x_cf = t / w, exactly solvable.
  {
    Dataset ds;
    ds.X = Matrix::Ones(1, 1);
    ds.y = Vector::Ones(1);
    const double w0 = 2.0;
    const double t = 1.0;
    Vector w(1);
    w << w0;
    Vector x_cf(1);
    x_cf << t / w0;
    const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, t);
    Vector dw(1);
    dw << 1.0;
    const double eps = cfg.sensitivity.eps;
    const auto upd = first_order_update(ctx, dw, eps);
    const double exact = t / (w0 + eps);
    const double err = std::abs(upd.x[0] - exact);
    entries.push_back(json{{"case", "scalar_linear"},
                           {"error", err},
                           {"tolerance", 1e-8},
                           {"pass", err <= 1e-8}});
  }

  // RBF case: epsilon-halving ratio test plus the constraint identity.
  {
    const int n = cfg.sensitivity.rbf_n;
    const int d = cfg.sensitivity.rbf_d;
    Rng rng(derive_seed({cfg.seed, 0x73656e73ULL}));
    Dataset ds;
    ds.X.resize(n, d);
    ds.y.resize(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) ds.X(i, j) = rng.normal();
      ds.y[i] = rng.normal();
    }
    const SensKernel kernel = SensKernel::rbf(cfg.sensitivity.rbf_gamma);
    Matrix K(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        K(i, j) = kernel(ds.X.row(i).transpose(), ds.X.row(j).transpose());
      }
    }
    Matrix M = K;
    M.diagonal().array() += cfg.sensitivity.ridge;
    const Vector w = M.llt().solve(ds.y);

    Vector x_cf(d);
    for (Index j = 0; j < d; ++j) x_cf[j] = rng.normal();
    const double t = kernel_vector(kernel, ds.X, x_cf).dot(w);
    const auto ctx = build_context(ds, kernel, w, x_cf, t);

    Vector dw(n);
    for (Index i = 0; i < n; ++i) dw[i] = rng.normal();
    dw.normalize();

    const auto residual = [&](double eps) {
      const auto upd = first_order_update(ctx, dw, eps);
      return std::abs(kernel_vector(kernel, ds.X, upd.x).dot(w + eps * dw) - t);
    };
    const double eps = cfg.sensitivity.eps;
    const double r1 = residual(eps);
    const double r2 = residual(eps / 2.0);
    const double r4 = residual(eps / 4.0);
    const double ratio12 = r1 / r2;
    const double ratio24 = r2 / r4;
    const bool ratio_pass = ratio12 >= 3.5 && ratio12 <= 4.5 && ratio24 >= 3.5 &&
                            ratio24 <= 4.5;

    // J_q' v = u by construction; asserted numerically.
    const Matrix Jq = ctx.v * ctx.u.transpose() / ctx.v.squaredNorm();
    const double identity_err = (Jq.transpose() * ctx.v - ctx.u).cwiseAbs().maxCoeff();

    entries.push_back(json{{"case", "rbf_ratio_test"},
                           {"eps", eps},
                           {"residuals", json::array({r1, r2, r4})},
                           {"ratios", json::array({ratio12, ratio24})},
                           {"ratio_window", json::array({3.5, 4.5})},
                           {"constraint_identity_error", identity_err},
                           {"pass", ratio_pass && identity_err <= 1e-12}});
  }

  // Degenerate case: v = 0 with u != 0 has no solution; reported, not fatal.
  {
    Dataset ds;
    ds.X = Matrix::Ones(1, 2);
    ds.y = Vector::Zero(1);
    Vector w = Vector::Zero(1);
    Vector x_cf(2);
    x_cf << 1.0, 1.0;
    const auto ctx = build_context(ds, SensKernel::linear(), w, x_cf, 0.0);
    std::string status = "unexpected";
    try {
      Vector dw(1);
      dw << 1.0;
      jacobian_action(ctx, dw);
    } catch (const NoSolutionError&) {
      status = "no_solution";
    }
    entries.push_back(json{{"case", "degenerate_v_zero"},
                           {"degenerate_flag", ctx.degenerate},
                           {"status", status},
                           {"pass", status == "no_solution"}});
  }

  bool all_pass = true;
  for (const auto& e : entries) all_pass = all_pass && e["pass"].get<bool>();
  const json report{{"entries", entries}, {"all_pass", all_pass}};
  write_json(out_path(cfg, "sensitivity_report.json"), report);
  return 0;
}

// ---------------------------------------------------------------------------
// ntk-check command
// ---------------------------------------------------------------------------

int cmd_ntk_check(const RunConfig& cfg) {
  validate_config(cfg);
  const int angles = cfg.ntk_check.angles;
  json entries = json::array();
  double max_rel = 0.0;
  for (int i = 0; i < angles; ++i) {
    const double deg =
        angles == 1 ? 0.0 : 120.0 * static_cast<double>(i) / (angles - 1);
    const double rad = deg * M_PI / 180.0;
    Vector xi(2);
    xi << 1.0, 0.0;
    Vector xj(2);
    xj << std::cos(rad), std::sin(rad);
    const double closed = ntk_kernel(xi, xj);
    const double p = mc_coactivation_probability(
        xi, xj, cfg.ntk_check.samples,
        derive_seed({cfg.seed, 0x6e746bULL, static_cast<std::uint64_t>(i)}));
    const double mc = xi.dot(xj) * p;
    const double abs_err = std::abs(mc - closed);
    json entry{{"angle_deg", deg},
               {"closed_form", closed},
               {"mc_value", mc},
               {"abs_error", abs_err}};
    if (closed != 0.0) {
      const double rel = abs_err / std::abs(closed);
      entry["rel_error"] = rel;
      max_rel = std::max(max_rel, rel);
    } else {
      entry["rel_error"] = nullptr;
    }
    entries.push_back(std::move(entry));
  }
  const json report{{"samples", cfg.ntk_check.samples},
                    {"angles", angles},
                    {"max_rel_error", max_rel},
                    {"tolerance", 1e-2},
                    {"pass", max_rel <= 1e-2},
                    {"entries", entries}};
  write_json(out_path(cfg, "ntk_check.json"), report);
  return 0;
}

}  // namespace recdel
