#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sgw/dataset.hpp"
#include "sgw/errors.hpp"
#include "sgw/weights.hpp"

namespace sgw {

/// ASMD shade thresholds for the Connect-S plot; values below the first
/// threshold fall in bin 1, values at or above the last in bin 4.
inline constexpr std::array<double, 3> kDefaultShadeThresholds{0.05, 0.10, 0.20};

/// Balance of one (subgroup cell, covariate) pair.
struct BalanceCell {
  std::string cell;
  int covariate = -1;
  double asmd = std::numeric_limits<double>::quiet_NaN();
  double weighted_mean_treated = std::numeric_limits<double>::quiet_NaN();
  double weighted_mean_control = std::numeric_limits<double>::quiet_NaN();
  double pooled_sd = std::numeric_limits<double>::quiet_NaN();
  int shade_bin = 0;  // 1..4; 0 when degenerate
  bool degenerate = false;
};

namespace detail {

struct ArmMoments {
  double weighted_mean = std::numeric_limits<double>::quiet_NaN();
  double unweighted_variance = std::numeric_limits<double>::quiet_NaN();  // n-1 denominator
  int count = 0;
};

inline ArmMoments arm_moments(const AnalysisDataset& ds, const Eigen::VectorXd& w,
                              const SubgroupCell& cell, int p, int arm) {
  ArmMoments m;
  double sw = 0.0, swx = 0.0, sx = 0.0, sxx = 0.0;
  for (int i : cell.members) {
    if (ds.treatment[i] != arm) continue;
    double x = ds.covariates(i, p);
    sw += w[i];
    swx += w[i] * x;
    sx += x;
    sxx += x * x;
    ++m.count;
  }
  if (m.count == 0) return m;
  m.weighted_mean = swx / sw;
  if (m.count > 1) {
    double mean = sx / m.count;
    m.unweighted_variance = std::max(0.0, (sxx - m.count * mean * mean) / (m.count - 1));
  }
  return m;
}

} // namespace detail

inline int shade_bin_of(double asmd, const std::array<double, 3>& thresholds) {
  int bin = 1;
  for (double t : thresholds)
    if (asmd >= t) ++bin;
  return bin;
}

/// Full balance record for one (cell, covariate): weighted mean difference
/// scaled by the unweighted pooled SD sqrt((s1^2 + s0^2)/2).
inline BalanceCell balance_cell(const AnalysisDataset& ds, const WeightSet& ws,
                                const SubgroupCell& cell, int p,
                                const std::array<double, 3>& thresholds = kDefaultShadeThresholds) {
  BalanceCell out;
  out.cell = cell.label();
  out.covariate = p;
  if (cell.n_treated == 0 || cell.n_control == 0) {
    out.degenerate = true;
    return out;
  }
  auto m1 = detail::arm_moments(ds, ws.w, cell, p, 1);
  auto m0 = detail::arm_moments(ds, ws.w, cell, p, 0);
  out.weighted_mean_treated = m1.weighted_mean;
  out.weighted_mean_control = m0.weighted_mean;
  double v1 = m1.count > 1 ? m1.unweighted_variance : 0.0;
  double v0 = m0.count > 1 ? m0.unweighted_variance : 0.0;
  out.pooled_sd = std::sqrt((v1 + v0) / 2.0);
  double diff = std::abs(m1.weighted_mean - m0.weighted_mean);
  if (out.pooled_sd > 0.0) {
    out.asmd = diff / out.pooled_sd;
  } else if (diff <= 1e-12) {
    out.asmd = 0.0;
  } else {
    out.degenerate = true;  // zero spread but distinct means
    return out;
  }
  out.shade_bin = shade_bin_of(out.asmd, thresholds);
  return out;
}

/// ASMD value only; NaN when the pair is degenerate.
inline double asmd(const AnalysisDataset& ds, const WeightSet& ws, const SubgroupCell& cell,
                   int p) {
  return balance_cell(ds, ws, cell, p).asmd;
}

/// Kish design-effect approximation of the variance inflation from unequal
/// weights within one cell; 1 for constant weights. NaN when an arm is
/// empty.
inline double variance_inflation(const AnalysisDataset& ds, const WeightSet& ws,
                                 const SubgroupCell& cell) {
  if (cell.n_treated == 0 || cell.n_control == 0)
    return std::numeric_limits<double>::quiet_NaN();
  double sw1 = 0.0, sq1 = 0.0, sw0 = 0.0, sq0 = 0.0;
  for (int i : cell.members) {
    double wi = ws.w[i];
    if (ds.treatment[i] == 1) {
      sw1 += wi;
      sq1 += wi * wi;
    } else {
      sw0 += wi;
      sq0 += wi * wi;
    }
  }
  double inv_n = 1.0 / cell.n_treated + 1.0 / cell.n_control;
  return (sq1 / (sw1 * sw1) + sq0 / (sw0 * sw0)) / inv_n;
}

/// Deviation of the treated weighted covariate mean from the h-weighted
/// cell mean (the verifiable form of the target-alignment condition).
/// `h_hat` holds the per-unit tilting values at the fitted propensities.
inline double target_alignment(const AnalysisDataset& ds, const WeightSet& ws,
                               const SubgroupCell& cell, int p, const Eigen::VectorXd& h_hat) {
  if (cell.n_treated == 0)
    return std::numeric_limits<double>::quiet_NaN();
  double swx = 0.0, sw = 0.0, shx = 0.0, sh = 0.0;
  for (int i : cell.members) {
    double x = ds.covariates(i, p);
    if (ds.treatment[i] == 1) {
      swx += ws.w[i] * x;
      sw += ws.w[i];
    }
    shx += h_hat[i] * x;
    sh += h_hat[i];
  }
  return std::abs(swx / sw - shx / sh);
}

/// Connect-S grid: subgroup cells as rows (Overall last), covariates as
/// columns, ASMD shading per dot, per-row sample size and variance
/// inflation.
struct ConnectSGrid {
  std::vector<SubgroupCell> cells;  // row order
  std::vector<std::string> covariate_names;
  std::vector<std::vector<BalanceCell>> rows;  // rows x P
  std::vector<double> row_vi;
  std::vector<int> row_n;
  std::array<double, 3> thresholds = kDefaultShadeThresholds;
  std::string meta;  // provenance string embedded in exports

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return covariate_names.size(); }

  double max_asmd() const {
    double worst = 0.0;
    for (const auto& row : rows)
      for (const auto& cell : row)
        if (!cell.degenerate) worst = std::max(worst, cell.asmd);
    return worst;
  }
};

inline ConnectSGrid build_connect_s(const AnalysisDataset& ds, const WeightSet& ws,
                                    const std::vector<SubgroupCell>& cells,
                                    const std::array<double, 3>& thresholds = kDefaultShadeThresholds) {
  ConnectSGrid grid;
  grid.thresholds = thresholds;
  grid.covariate_names = ds.covariate_names;
  // Overall last, preserving enumeration order otherwise.
  for (const auto& cell : cells)
    if (!cell.is_overall()) grid.cells.push_back(cell);
  for (const auto& cell : cells)
    if (cell.is_overall()) grid.cells.push_back(cell);
  for (const auto& cell : grid.cells) {
    std::vector<BalanceCell> row;
    row.reserve(ds.n_covariates());
    for (int p = 0; p < ds.n_covariates(); ++p)
      row.push_back(balance_cell(ds, ws, cell, p, thresholds));
    grid.rows.push_back(std::move(row));
    grid.row_vi.push_back(variance_inflation(ds, ws, cell));
    grid.row_n.push_back(cell.n_members);
  }
  return grid;
}

/// Flat CSV export: cell, covariate, asmd, vi, n. Degenerate pairs carry NA.
inline std::string connect_s_csv(const ConnectSGrid& grid) {
  std::string out;
  if (!grid.meta.empty()) out += "# " + grid.meta + "\n";
  out += "cell,covariate,asmd,shade_bin,vi,n\n";
  for (std::size_t r = 0; r < grid.n_rows(); ++r) {
    for (std::size_t p = 0; p < grid.n_cols(); ++p) {
      const BalanceCell& bc = grid.rows[r][p];
      out += csv::quote(grid.cells[r].label()) + "," + csv::quote(grid.covariate_names[p]) + ",";
      out += bc.degenerate ? "NA" : csv::fmt(bc.asmd);
      out += ",";
      out += bc.degenerate ? "NA" : std::to_string(bc.shade_bin);
      out += ",";
      out += std::isnan(grid.row_vi[r]) ? "NA" : csv::fmt(grid.row_vi[r]);
      out += "," + std::to_string(grid.row_n[r]) + "\n";
    }
  }
  return out;
}

} // namespace sgw
