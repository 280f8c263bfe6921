#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "sgw/dataset.hpp"
#include "sgw/errors.hpp"

namespace sgw {

enum class ColumnKind { Intercept, CovariateMain, SubgroupMain, Interaction };

struct DesignColumn {
  ColumnKind kind = ColumnKind::Intercept;
  int covariate = -1;  // p, for CovariateMain / Interaction
  int indicator = -1;  // r, for SubgroupMain / Interaction
  std::string name;
  double penalty_factor = 0.0;  // 0 for intercept and mains, 1 for interactions
};

/// Expanded predictor matrix with per-column provenance.
///
/// Columns: intercept, covariate mains, subgroup mains (reference coding:
/// the first level of each variable is dropped), then interaction columns
/// X_p * S_r for the included (non-reference) indicators.
struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<DesignColumn> columns;

  int n() const { return static_cast<int>(X.rows()); }
  int k() const { return static_cast<int>(X.cols()); }

  std::vector<int> penalized_columns() const {
    std::vector<int> out;
    for (int j = 0; j < k(); ++j)
      if (columns[j].penalty_factor > 0.0) out.push_back(j);
    return out;
  }

  int find_interaction(int covariate, int indicator) const {
    for (int j = 0; j < k(); ++j)
      if (columns[j].kind == ColumnKind::Interaction && columns[j].covariate == covariate &&
          columns[j].indicator == indicator)
        return j;
    return -1;
  }

  std::vector<std::pair<int, int>> interaction_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& c : columns)
      if (c.kind == ColumnKind::Interaction) out.emplace_back(c.covariate, c.indicator);
    return out;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
  }
};

/// Which covariate-by-indicator interactions enter the design.
struct InteractionSelector {
  enum class Mode { None, All, Explicit };
  Mode mode = Mode::All;
  std::vector<std::pair<int, int>> pairs;  // (covariate p, indicator r)

  static InteractionSelector none() { return {Mode::None, {}}; }
  static InteractionSelector all() { return {Mode::All, {}}; }
  static InteractionSelector explicit_pairs(std::vector<std::pair<int, int>> pairs) {
    return {Mode::Explicit, std::move(pairs)};
  }
};

inline DesignMatrix build_design(const AnalysisDataset& ds, const InteractionSelector& selector) {
  const int N = ds.n();
  const int P = ds.n_covariates();

  // Non-reference indicators, variable order then level order.
  std::vector<int> included;
  for (const auto& variable : ds.subgroup_variables)
    for (int r : ds.variable_indicators(variable))
      if (ds.indicator_labels[r].level_index > 0) included.push_back(r);

  std::vector<std::pair<int, int>> pairs;
  switch (selector.mode) {
    case InteractionSelector::Mode::None:
      break;
    case InteractionSelector::Mode::All:
      for (int r : included)
        for (int p = 0; p < P; ++p) pairs.emplace_back(p, r);
      break;
    case InteractionSelector::Mode::Explicit:
      for (auto [p, r] : selector.pairs) {
        if (p < 0 || p >= P)
          throw ConfigError("interaction selector references unknown covariate index " +
                            std::to_string(p));
        bool known = false;
        for (int inc : included) known = known || inc == r;
        if (!known)
          throw ConfigError("interaction selector references unknown or reference-level "
                            "indicator index " + std::to_string(r));
        pairs.emplace_back(p, r);
      }
      break;
  }

  DesignMatrix dm;
  const int K = 1 + P + static_cast<int>(included.size()) + static_cast<int>(pairs.size());
  dm.X.resize(N, K);
  dm.columns.reserve(K);

  int j = 0;
  dm.X.col(j).setOnes();
  dm.columns.push_back({ColumnKind::Intercept, -1, -1, "(intercept)", 0.0});
  ++j;
  for (int p = 0; p < P; ++p, ++j) {
    dm.X.col(j) = ds.covariates.col(p);
    dm.columns.push_back({ColumnKind::CovariateMain, p, -1, ds.covariate_names[p], 0.0});
  }
  for (int r : included) {
    dm.X.col(j) = ds.indicators.col(r);
    dm.columns.push_back({ColumnKind::SubgroupMain, -1, r, ds.indicator_labels[r].name(), 0.0});
    ++j;
  }
  for (auto [p, r] : pairs) {
    dm.X.col(j) = ds.covariates.col(p).cwiseProduct(ds.indicators.col(r));
    dm.columns.push_back({ColumnKind::Interaction, p, r,
                          ds.covariate_names[p] + ":" + ds.indicator_labels[r].name(), 1.0});
    ++j;
  }
  return dm;
}

/// All mains of `full` plus the listed interaction columns, preserving order.
inline DesignMatrix reduce_design(const DesignMatrix& full,
                                  const std::vector<std::pair<int, int>>& keep) {
  std::vector<int> cols;
  for (int j = 0; j < full.k(); ++j)
    if (full.columns[j].kind != ColumnKind::Interaction) cols.push_back(j);
  for (auto [p, r] : keep) {
    int j = full.find_interaction(p, r);
    if (j < 0)
      throw ConfigError("selected interaction (" + std::to_string(p) + ", " + std::to_string(r) +
                        ") is not a column of the full design");
    cols.push_back(j);
  }
  DesignMatrix out;
  out.X.resize(full.n(), cols.size());
  out.columns.reserve(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.X.col(c) = full.X.col(cols[c]);
    out.columns.push_back(full.columns[cols[c]]);
  }
  return out;
}

} // namespace sgw
