#pragma once

#include <Eigen/Dense>
#include <cfloat>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sgw/config.hpp"
#include "sgw/dataset.hpp"
#include "sgw/errors.hpp"

namespace sgw {

/// Tilting function h(e): IPW targets the full population (h = 1), OW the
/// overlap population (h = e(1-e), maximized at clinical equipoise).
inline double tilting_value(Tilting tilt, double e) {
  return tilt == Tilting::IPW ? 1.0 : e * (1.0 - e);
}

/// Estimand label carried by estimates produced under a tilting function.
inline std::string estimand_label(Tilting tilt) {
  return tilt == Tilting::IPW ? "S-ATE" : "S-ATO";
}

/// Totals used to normalize weights within one cell, one record per arm.
struct CellNormalization {
  std::string cell;
  double sum_w_treated = 0.0;
  double sum_w_control = 0.0;
};

/// Per-unit balancing weights under a tilting function:
/// treated h/e, control h/(1-e). OW weights are 1-e and e.
struct WeightSet {
  Eigen::VectorXd w;
  Tilting tilting = Tilting::OW;
  std::string source;  // propensity fit the weights came from
  int extreme_weight_warnings = 0;
  std::vector<CellNormalization> cell_norms;
};

/// Raw balancing weights; no trimming or truncation. Propensities at the
/// clamp boundary under IPW are recorded as extreme-weight warnings.
inline WeightSet compute_weights(const Eigen::VectorXd& e, const Eigen::VectorXi& Z,
                                 Tilting tilt) {
  if (e.size() != Z.size()) throw ConfigError("propensity and treatment lengths differ");
  WeightSet ws;
  ws.tilting = tilt;
  ws.w.resize(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    double ei = e[i];
    if (!(ei > 0.0 && ei < 1.0))
      throw ConfigError("propensity values must lie strictly in (0,1)");
    double h = tilting_value(tilt, ei);
    ws.w[i] = Z[i] == 1 ? h / ei : h / (1.0 - ei);
    if (tilt == Tilting::IPW && (ei <= DBL_EPSILON || ei >= 1.0 - DBL_EPSILON))
      ++ws.extreme_weight_warnings;
  }
  return ws;
}

/// Effective sample size (sum w)^2 / sum w^2 of one weight subset.
inline double effective_sample_size(const Eigen::VectorXd& w, const std::vector<int>& members,
                                    const Eigen::VectorXi& Z, int arm) {
  double sw = 0.0, sw2 = 0.0;
  for (int i : members) {
    if (Z[i] != arm) continue;
    sw += w[i];
    sw2 += w[i] * w[i];
  }
  return sw2 > 0.0 ? sw * sw / sw2 : 0.0;
}

/// Subgroup treatment effect estimate for one cell.
struct EffectEstimate {
  std::string cell;
  std::string estimand;  // S-ATE (IPW) or S-ATO (OW)
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  std::string variance_method;
  int n_treated = 0;
  int n_control = 0;
  double ess_treated = 0.0;
  double ess_control = 0.0;
  bool degenerate = false;
};

/// Hajek point estimate for one cell: difference of self-normalized
/// weighted outcome means. Invariant to rescaling all weights by c > 0.
/// SE and CI are filled by the inference module.
inline EffectEstimate estimate_effect(const AnalysisDataset& ds, const WeightSet& ws,
                                      const SubgroupCell& cell) {
  if (cell.n_treated == 0 || cell.n_control == 0)
    throw DegenerateCellError("cell '" + cell.label() + "' has an empty treatment arm");
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (int i : cell.members) {
    if (ds.treatment[i] == 1) {
      num1 += ws.w[i] * ds.outcome[i];
      den1 += ws.w[i];
    } else {
      num0 += ws.w[i] * ds.outcome[i];
      den0 += ws.w[i];
    }
  }
  EffectEstimate est;
  est.cell = cell.label();
  est.estimand = estimand_label(ws.tilting);
  est.estimate = num1 / den1 - num0 / den0;
  est.n_treated = cell.n_treated;
  est.n_control = cell.n_control;
  est.ess_treated = effective_sample_size(ws.w, cell.members, ds.treatment, 1);
  est.ess_control = effective_sample_size(ws.w, cell.members, ds.treatment, 0);
  return est;
}

/// Record the per-arm weight totals of each cell (the normalization
/// constants of the Hajek ratios).
inline void record_cell_normalizations(WeightSet& ws, const AnalysisDataset& ds,
                                       const std::vector<SubgroupCell>& cells) {
  ws.cell_norms.clear();
  for (const auto& cell : cells) {
    CellNormalization rec;
    rec.cell = cell.label();
    for (int i : cell.members)
      (ds.treatment[i] == 1 ? rec.sum_w_treated : rec.sum_w_control) += ws.w[i];
    ws.cell_norms.push_back(rec);
  }
}

} // namespace sgw
