#include "recdel/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "recdel/rng.hpp"

namespace recdel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || cell.empty()) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': non-finite value '" + cell + "'");
  }
  return value;
}

std::vector<int> pick_outliers(int n, double outlier_fraction, std::uint64_t seed) {
  const int k = static_cast<int>(std::llround(outlier_fraction * n));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed({seed, 4}));
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<int> out(idx.begin(), idx.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  const auto header = split_line(line);
  if (header.size() < 2) {
    throw DataError("need at least one feature column and the target column");
  }
  {
    std::set<std::string> seen(header.begin(), header.end());
    if (seen.size() != header.size()) throw DataError("duplicate column names in header");
  }

  int target_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == target_column) target_idx = static_cast<int>(j);
  }
  if (target_idx < 0) throw DataError("target column '" + target_column + "' not found");

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      row[j] = parse_cell(cells[j], line_no, header[j]);
    }
    rows.push_back(std::move(row));
  }

  // Drop exact duplicate rows (features and target), keeping first occurrence.
  std::set<std::vector<double>> seen;
  std::vector<std::vector<double>> unique_rows;
  for (auto& r : rows) {
    if (seen.insert(r).second) unique_rows.push_back(std::move(r));
  }
  if (unique_rows.size() < 2) throw DataError("fewer than 2 rows after deduplication");

  const Index n = static_cast<Index>(unique_rows.size());
  const Index d = static_cast<Index>(header.size()) - 1;
  Dataset ds;
  ds.X.resize(n, d);
  ds.y.resize(n);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<int>(j) != target_idx) ds.feature_names.push_back(header[j]);
  }
  for (Index i = 0; i < n; ++i) {
    Index col = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      const double v = unique_rows[static_cast<std::size_t>(i)][j];
      if (static_cast<int>(j) == target_idx) {
        ds.y[i] = v;
      } else {
        ds.X(i, col++) = v;
      }
    }
  }
  return ds;
}

std::pair<Dataset, StandardizationState> standardize(const Dataset& ds) {
  const Index n = ds.n();
  const Index d = ds.d();
  StandardizationState st;
  st.mean = ds.X.colwise().mean();
  st.scale.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double var = (ds.X.col(j).array() - st.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    if (sd <= 0.0) {
      const std::string name = j < static_cast<Index>(ds.feature_names.size())
                                   ? ds.feature_names[static_cast<std::size_t>(j)]
                                   : std::to_string(j);
      throw DataError("constant feature '" + name + "' cannot be standardized");
    }
    st.scale[j] = sd;
  }
  Dataset out = ds;
  for (Index j = 0; j < d; ++j) {
    out.X.col(j) = (ds.X.col(j).array() - st.mean[j]) / st.scale[j];
  }
  (void)n;
  return {std::move(out), std::move(st)};
}

Dataset unstandardize(const Dataset& ds, const StandardizationState& state) {
  Dataset out = ds;
  for (Index j = 0; j < ds.d(); ++j) {
    out.X.col(j) = ds.X.col(j).array() * state.scale[j] + state.mean[j];
  }
  return out;
}

RecourseTargeting median_target(const Vector& scores) {
  if (scores.size() == 0) throw DataError("median_target: empty score vector");
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end());
  // Lower median, so s is always an attained score.
  const std::size_t mid = (sorted.size() - 1) / 2;
  RecourseTargeting t;
  t.s = sorted[mid];
  t.needs_recourse.resize(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) {
    t.needs_recourse[static_cast<std::size_t>(i)] = scores[i] < t.s;
  }
  return t;
}

FoldSplit make_folds(int n_test, int folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("make_folds: folds must be >= 1");
  if (n_test < folds) throw ConfigError("make_folds: more folds than test points");
  std::vector<int> order(static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed({seed, 0x666f6c64ULL}));
  for (int i = n_test - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  FoldSplit split;
  split.folds = folds;
  split.assignment.resize(static_cast<std::size_t>(n_test));
  for (int pos = 0; pos < n_test; ++pos) {
    split.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] =
        pos % folds;
  }
  return split;
}

Dataset synth_regression(int n, int d, double noise_sd, double outlier_fraction,
                         std::uint64_t seed) {
  if (n < 4) throw ConfigError("synth_regression: n must be >= 4");
  if (d < 1) throw ConfigError("synth_regression: d must be >= 1");
  if (noise_sd < 0.0) throw ConfigError("synth_regression: noise_sd must be >= 0");
  if (outlier_fraction < 0.0 || outlier_fraction >= 0.5) {
    throw ConfigError("synth_regression: outlier_fraction must lie in [0, 0.5)");
  }

  Rng rng_x(derive_seed({seed, 1}));
  Rng rng_beta(derive_seed({seed, 2}));
  Rng rng_noise(derive_seed({seed, 3}));

  Dataset ds;
  ds.X.resize(n, d);
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) ds.X(i, j) = rng_x.normal();
  }
  Vector beta(d);
  for (Index j = 0; j < d; ++j) beta[j] = rng_beta.normal();

  std::vector<bool> is_outlier(static_cast<std::size_t>(n), false);
  for (int i : pick_outliers(n, outlier_fraction, seed)) {
    is_outlier[static_cast<std::size_t>(i)] = true;
  }

  for (Index i = 0; i < n; ++i) {
    const double eps = noise_sd * rng_noise.normal();
    if (is_outlier[static_cast<std::size_t>(i)]) {
      ds.X.row(i) *= 5.0;  // inflated leverage
      ds.y[i] = -ds.X.row(i).dot(beta) + eps;
    } else {
      ds.y[i] = ds.X.row(i).dot(beta) + eps;
    }
  }
  ds.feature_names.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

std::vector<int> synth_outlier_indices(int n, double outlier_fraction,
                                       std::uint64_t seed) {
  return pick_outliers(n, outlier_fraction, seed);
}

}  // namespace recdel
