#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sgw/config.hpp"
#include "sgw/csv.hpp"
#include "sgw/errors.hpp"

namespace sgw {

/// Label of one subgroup indicator column: (variable, level).
struct IndicatorLabel {
  std::string variable;
  std::string level;
  int level_index = 0;  // position of the level within its variable (sorted)

  std::string name() const { return variable + "=" + level; }
};

/// Observational dataset: outcome, binary treatment, covariate matrix and
/// expanded subgroup level indicators. Immutable after construction.
struct AnalysisDataset {
  Eigen::VectorXd outcome;
  Eigen::VectorXi treatment;
  Eigen::MatrixXd covariates;  // n x P, binary covariates stored as 0/1
  std::vector<std::string> covariate_names;
  Eigen::MatrixXd indicators;  // n x R, one column per (variable, level)
  std::vector<IndicatorLabel> indicator_labels;
  std::vector<std::string> subgroup_variables;  // declaration order
  std::optional<Eigen::VectorXd> external_propensity;

  int n() const { return static_cast<int>(outcome.size()); }
  int n_covariates() const { return static_cast<int>(covariates.cols()); }
  int n_indicators() const { return static_cast<int>(indicators.cols()); }

  /// Indicator columns of one variable, in level order.
  std::vector<int> variable_indicators(const std::string& variable) const {
    std::vector<int> out;
    for (int r = 0; r < n_indicators(); ++r)
      if (indicator_labels[r].variable == variable) out.push_back(r);
    return out;
  }

  void validate() const;
};

/// One (variable, level) comparison cell, or the synthetic Overall cell.
struct SubgroupCell {
  std::string variable;
  std::string level;
  int indicator = -1;  // column into AnalysisDataset::indicators; -1 for Overall
  std::vector<int> members;
  int n_members = 0;
  int n_treated = 0;
  int n_control = 0;
  bool degenerate = false;  // empty cell or an empty treatment arm

  bool is_overall() const { return indicator < 0; }

  std::string label() const {
    return is_overall() ? std::string("Overall") : variable + "=" + level;
  }
};

inline void AnalysisDataset::validate() const {
  const int N = n();
  if (N == 0) throw IngestionError("dataset has no rows");
  if (treatment.size() != N || covariates.rows() != N || indicators.rows() != N)
    throw IngestionError("dataset arrays have inconsistent row counts");
  bool any0 = false, any1 = false;
  for (int i = 0; i < N; ++i) {
    if (treatment[i] == 0) any0 = true;
    else if (treatment[i] == 1) any1 = true;
    else throw IngestionError("treatment must be binary 0/1");
  }
  if (!any0 || !any1)
    throw IngestionError("treatment must contain at least one 0 and one 1");
  if (!outcome.allFinite() || !covariates.allFinite())
    throw IngestionError("dataset contains non-finite values");
  for (int r = 0; r < n_indicators(); ++r)
    for (int i = 0; i < N; ++i)
      if (indicators(i, r) != 0.0 && indicators(i, r) != 1.0)
        throw IngestionError("subgroup indicator '" + indicator_labels[r].name() +
                             "' is not 0/1");
  // Within one variable, level indicators partition the sample.
  for (const auto& variable : subgroup_variables) {
    auto cols = variable_indicators(variable);
    for (int i = 0; i < N; ++i) {
      double sum = 0.0;
      for (int r : cols) sum += indicators(i, r);
      if (sum != 1.0)
        throw IngestionError("subgroup variable '" + variable +
                             "' indicators do not partition the sample");
    }
  }
  if (external_propensity) {
    if (external_propensity->size() != N)
      throw IngestionError("external propensity column has wrong length");
    for (int i = 0; i < N; ++i) {
      double e = (*external_propensity)[i];
      if (!(e > 0.0 && e < 1.0))
        throw IngestionError("external propensity values must lie strictly in (0,1)");
    }
  }
}

/// Load and validate a dataset per the column roles in `config`.
/// Subgroup columns are categorical; each observed level becomes one 0/1
/// indicator, levels sorted lexicographically within a variable.
inline AnalysisDataset load_csv(const std::string& path, const AnalysisConfig& config) {
  csv::Table table = csv::read_file(path);
  const std::size_t N = table.rows.size();
  if (N == 0) throw IngestionError("CSV has a header but no data rows: " + path);

  auto need = [&](const std::string& name) {
    int j = table.column(name);
    if (j < 0) throw IngestionError("missing column '" + name + "' in " + path);
    return j;
  };

  AnalysisDataset ds;
  const int col_y = need(config.outcome);
  const int col_z = need(config.treatment);

  ds.outcome.resize(N);
  ds.treatment.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    ds.outcome[i] = csv::parse_double(table.rows[i][col_y], config.outcome, i);
    double z = csv::parse_double(table.rows[i][col_z], config.treatment, i);
    if (z != 0.0 && z != 1.0) throw IngestionError("treatment must be binary 0/1");
    ds.treatment[i] = static_cast<int>(z);
  }

  ds.covariate_names = config.covariates;
  ds.covariates.resize(N, config.covariates.size());
  for (std::size_t p = 0; p < config.covariates.size(); ++p) {
    const int j = need(config.covariates[p]);
    for (std::size_t i = 0; i < N; ++i)
      ds.covariates(i, p) = csv::parse_double(table.rows[i][j], config.covariates[p], i);
    double first = ds.covariates(0, p);
    bool constant = true;
    for (std::size_t i = 1; i < N && constant; ++i)
      constant = ds.covariates(i, p) == first;
    if (constant)
      throw IngestionError("covariate '" + config.covariates[p] + "' is constant");
  }

  // Expand categorical subgroup variables into level indicators.
  ds.subgroup_variables = config.subgroups;
  std::vector<IndicatorLabel> labels;
  std::vector<std::vector<std::string>> raw(config.subgroups.size());
  for (std::size_t v = 0; v < config.subgroups.size(); ++v) {
    const int j = need(config.subgroups[v]);
    raw[v].reserve(N);
    std::set<std::string> levels;
    for (std::size_t i = 0; i < N; ++i) {
      std::string value = detail::trim(table.rows[i][j]);
      if (value.empty())
        throw IngestionError("missing value for column '" + config.subgroups[v] +
                             "' in data row " + std::to_string(i + 1));
      raw[v].push_back(value);
      levels.insert(value);
    }
    if (levels.size() < 2)
      throw IngestionError("subgroup variable '" + config.subgroups[v] +
                           "' has fewer than 2 observed levels");
    int idx = 0;
    for (const auto& level : levels)
      labels.push_back({config.subgroups[v], level, idx++});
  }
  ds.indicator_labels = labels;
  ds.indicators = Eigen::MatrixXd::Zero(N, labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::size_t v = 0;
    while (config.subgroups[v] != labels[r].variable) ++v;
    for (std::size_t i = 0; i < N; ++i)
      if (raw[v][i] == labels[r].level) ds.indicators(i, r) = 1.0;
  }

  if (config.ps_model == PsModel::External || !config.external_ps_column.empty()) {
    const int j = need(config.external_ps_column);
    Eigen::VectorXd e(N);
    for (std::size_t i = 0; i < N; ++i)
      e[i] = csv::parse_double(table.rows[i][j], config.external_ps_column, i);
    ds.external_propensity = std::move(e);
  }

  ds.validate();
  return ds;
}

/// One cell per (variable, level) in variable order then level order, plus
/// the synthetic Overall cell last.
inline std::vector<SubgroupCell> enumerate_cells(const AnalysisDataset& ds) {
  std::vector<SubgroupCell> cells;
  auto fill_counts = [&](SubgroupCell& cell) {
    cell.n_members = static_cast<int>(cell.members.size());
    for (int i : cell.members)
      (ds.treatment[i] == 1 ? cell.n_treated : cell.n_control)++;
    cell.degenerate = cell.n_members == 0 || cell.n_treated == 0 || cell.n_control == 0;
  };
  for (const auto& variable : ds.subgroup_variables) {
    for (int r : ds.variable_indicators(variable)) {
      SubgroupCell cell;
      cell.variable = variable;
      cell.level = ds.indicator_labels[r].level;
      cell.indicator = r;
      for (int i = 0; i < ds.n(); ++i)
        if (ds.indicators(i, r) == 1.0) cell.members.push_back(i);
      fill_counts(cell);
      cells.push_back(std::move(cell));
    }
  }
  SubgroupCell overall;
  overall.variable = "Overall";
  overall.level = "";
  overall.indicator = -1;
  overall.members.resize(ds.n());
  std::iota(overall.members.begin(), overall.members.end(), 0);
  fill_counts(overall);
  cells.push_back(std::move(overall));
  return cells;
}

} // namespace sgw
