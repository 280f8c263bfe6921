#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgw/config.hpp"
#include "sgw/csv.hpp"
#include "sgw/dataset.hpp"
#include "sgw/design.hpp"
#include "sgw/diagnostics.hpp"
#include "sgw/errors.hpp"
#include "sgw/inference.hpp"
#include "sgw/lasso.hpp"
#include "sgw/logistic.hpp"
#include "sgw/manifest.hpp"
#include "sgw/weights.hpp"

namespace sgw {

/// Fitted propensity scores plus everything needed to audit them.
struct PropensityResult {
  std::string method;
  Eigen::VectorXd e;  // strictly inside (0,1)
  int clamped = 0;
  std::optional<LogisticFit> fit;  // the ML fit the scores come from, if any
  std::optional<LassoPath> path;   // the selection path, if the LASSO ran
  std::vector<std::pair<int, int>> selected;  // interactions in the final model
  std::vector<std::string> selected_names;
};

namespace detail {

inline Eigen::VectorXd clip_propensity(Eigen::VectorXd e, double eps) {
  for (Eigen::Index i = 0; i < e.size(); ++i)
    e[i] = std::min(std::max(e[i], eps), 1.0 - eps);
  return e;
}

inline std::string interaction_name(const AnalysisDataset& ds, int p, int r) {
  return ds.covariate_names[p] + ":" + ds.indicator_labels[r].name();
}

} // namespace detail

/// Estimate propensity scores per the configured model.
inline PropensityResult estimate_propensity(const AnalysisDataset& ds,
                                            const AnalysisConfig& cfg) {
  PropensityResult out;
  out.method = to_string(cfg.ps_model);
  switch (cfg.ps_model) {
    case PsModel::LogisticMain: {
      DesignMatrix dm = build_design(ds, InteractionSelector::none());
      LogisticFit fit = fit_logistic_irls(dm, ds.treatment);
      if (!fit.converged)
        throw ConvergenceError("main-effects logistic fit did not converge");
      out.e = fit.propensity;
      out.fit = std::move(fit);
      break;
    }
    case PsModel::Lasso:
    case PsModel::PostLasso: {
      cfg.require_seed();
      DesignMatrix dm = build_design(ds, InteractionSelector::all());
      LassoControl ctrl;
      ctrl.n_lambda = cfg.n_lambda;
      ctrl.lambda_ratio = cfg.lambda_ratio;
      LassoPath path = fit_lasso_logistic(dm, ds.treatment, cfg.cv_folds, cfg.seed, ctrl);
      out.selected = path.selected;
      for (auto [p, r] : path.selected)
        out.selected_names.push_back(detail::interaction_name(ds, p, r));
      if (cfg.ps_model == PsModel::Lasso) {
        Eigen::VectorXd eta = dm.X * path.coef_at_chosen();
        out.e.resize(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
          double raw = 1.0 / (1.0 + std::exp(-eta[i]));
          double clamped = std::min(std::max(raw, DBL_EPSILON), 1.0 - DBL_EPSILON);
          if (clamped != raw) ++out.clamped;
          out.e[i] = clamped;
        }
      } else {
        LogisticFit fit = post_lasso_refit(dm, ds.treatment, path.selected);
        if (!fit.converged)
          throw ConvergenceError("post-LASSO refit did not converge");
        out.e = fit.propensity;
        out.fit = std::move(fit);
      }
      out.path = std::move(path);
      break;
    }
    case PsModel::External: {
      if (!ds.external_propensity)
        throw ConfigError("ps_model = external but the dataset has no propensity column");
      out.e = *ds.external_propensity;
      break;
    }
  }
  return out;
}

/// Everything one analysis run produces: per-cell effects, the pre- and
/// post-weighting Connect-S grids, propensity metadata and the weights.
struct AnalysisReport {
  std::vector<SubgroupCell> cells;
  std::vector<EffectEstimate> effects;
  ConnectSGrid unweighted_grid;
  ConnectSGrid weighted_grid;
  PropensityResult propensity;
  WeightSet weights;
  Tilting tilting = Tilting::OW;
  VarianceMethod variance = VarianceMethod::Sandwich;
  int bootstrap_B = 0;
  std::uint64_t seed = 0;
  std::optional<double> clip;
  std::vector<std::string> warnings;
  std::string manifest_hash;
};

/// Run the configured weighting pipeline end to end:
///   S1 select covariate-subgroup interactions (LASSO, mains unpenalized),
///   S2 refit the propensity model by ML on the selected support,
///   S3 compute balancing weights and balance diagnostics before/after,
///   S4 Hajek effect estimates with SEs for every cell including Overall.
/// Degenerate cells are flagged and suppressed, never fatal.
inline AnalysisReport run_pipeline(const AnalysisDataset& ds, const AnalysisConfig& cfg) {
  AnalysisReport report;
  report.tilting = cfg.tilting;
  report.variance = cfg.variance;
  report.bootstrap_B = cfg.bootstrap_B;
  report.seed = cfg.seed;
  report.clip = cfg.clip_propensity;
  report.cells = enumerate_cells(ds);

  report.propensity = estimate_propensity(ds, cfg);
  Eigen::VectorXd e = report.propensity.e;
  if (cfg.clip_propensity) {
    e = detail::clip_propensity(e, *cfg.clip_propensity);
    report.warnings.push_back("propensity clipped at " + csv::fmt(*cfg.clip_propensity));
  }

  report.weights = compute_weights(e, ds.treatment, cfg.tilting);
  report.weights.source = report.propensity.method;
  record_cell_normalizations(report.weights, ds, report.cells);
  if (report.weights.extreme_weight_warnings > 0)
    report.warnings.push_back(std::to_string(report.weights.extreme_weight_warnings) +
                              " units have propensities at the clamp boundary (extreme IPW weights)");

  WeightSet unit;
  unit.w = Eigen::VectorXd::Ones(ds.n());
  unit.tilting = cfg.tilting;
  unit.source = "unit";
  report.unweighted_grid = build_connect_s(ds, unit, report.cells);
  report.weighted_grid = build_connect_s(ds, report.weights, report.cells);

  const double z = normal_quantile_two_sided(0.95);
  for (std::size_t ci = 0; ci < report.cells.size(); ++ci) {
    const auto& cell = report.cells[ci];
    if (cell.degenerate) {
      EffectEstimate est;
      est.cell = cell.label();
      est.estimand = estimand_label(cfg.tilting);
      est.degenerate = true;
      est.n_treated = cell.n_treated;
      est.n_control = cell.n_control;
      report.effects.push_back(est);
      report.warnings.push_back("cell '" + cell.label() + "' is degenerate; estimate suppressed");
      continue;
    }
    EffectEstimate est = estimate_effect(ds, report.weights, cell);
    if (cfg.variance == VarianceMethod::Sandwich) {
      est.variance_method = "sandwich";
      est.se = sandwich_se(ds, report.weights, cell);
      if (!std::isnan(est.se)) {
        est.ci_lower = est.estimate - z * est.se;
        est.ci_upper = est.estimate + z * est.se;
      }
    } else {
      cfg.require_seed();
      InferenceConfig icfg;
      icfg.method = VarianceMethod::Bootstrap;
      icfg.bootstrap_B = cfg.bootstrap_B;
      icfg.seed = rng::derive_seed(cfg.seed, 0xb007 + ci);
      BootstrapResult boot = bootstrap_ci(ds, e, cfg.tilting, cell, icfg,
                                          cfg.threads == 0 ? rng::default_threads() : cfg.threads);
      est.variance_method = "bootstrap";
      est.se = boot.se;
      est.ci_lower = boot.ci_lower;
      est.ci_upper = boot.ci_upper;
    }
    report.effects.push_back(est);
  }
  return report;
}

/// The OW-pLASSO algorithm: post-LASSO propensity selection paired with
/// overlap weights, regardless of what the config's ps_model/tilting say.
inline AnalysisReport run_ow_plasso(const AnalysisDataset& ds, const AnalysisConfig& cfg) {
  AnalysisConfig forced = cfg;
  forced.ps_model = PsModel::PostLasso;
  forced.tilting = Tilting::OW;
  return run_pipeline(ds, forced);
}

// ---- serialization ----

inline nlohmann::json propensity_to_json(const PropensityResult& ps) {
  nlohmann::json j;
  j["method"] = ps.method;
  j["clamped"] = ps.clamped;
  if (ps.fit) {
    j["converged"] = ps.fit->converged;
    j["iterations"] = ps.fit->iterations;
    j["max_score_residual"] = ps.fit->max_score_residual;
    j["columns"] = ps.fit->column_names;
    j["coefficients"] = std::vector<double>(ps.fit->coef.data(),
                                            ps.fit->coef.data() + ps.fit->coef.size());
  }
  if (ps.path) {
    nlohmann::json p;
    p["n_lambda"] = ps.path->lambdas.size();
    p["lambda_max"] = ps.path->lambdas[0];
    p["chosen_lambda"] = ps.path->chosen_lambda;
    p["chosen_index"] = ps.path->chosen;
    p["fold_seed"] = ps.path->fold_seed;
    p["refold_attempts"] = ps.path->refold_attempts;
    p["lambdas"] = std::vector<double>(ps.path->lambdas.data(),
                                       ps.path->lambdas.data() + ps.path->lambdas.size());
    p["cv_mean_deviance"] =
        std::vector<double>(ps.path->cv_mean_deviance.data(),
                            ps.path->cv_mean_deviance.data() + ps.path->cv_mean_deviance.size());
    p["cv_se"] = std::vector<double>(ps.path->cv_se.data(),
                                     ps.path->cv_se.data() + ps.path->cv_se.size());
    j["lasso_path"] = p;
  }
  j["selected_interactions"] = ps.selected_names;
  return j;
}

inline nlohmann::json report_to_json(const AnalysisReport& report) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["manifest"] = report.manifest_hash;
  j["estimand"] = estimand_label(report.tilting);
  j["tilting"] = to_string(report.tilting);
  j["variance_method"] = to_string(report.variance);
  j["seed"] = report.seed;
  if (report.clip) j["clip_propensity"] = *report.clip;
  j["propensity"] = propensity_to_json(report.propensity);
  j["warnings"] = report.warnings;
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& est : report.effects) {
    nlohmann::json e;
    e["cell"] = est.cell;
    e["estimand"] = est.estimand;
    e["degenerate"] = est.degenerate;
    e["n_treated"] = est.n_treated;
    e["n_control"] = est.n_control;
    if (!est.degenerate) {
      e["estimate"] = est.estimate;
      if (!std::isnan(est.se)) {
        e["se"] = est.se;
        e["ci_lower"] = est.ci_lower;
        e["ci_upper"] = est.ci_upper;
      }
      e["ess_treated"] = est.ess_treated;
      e["ess_control"] = est.ess_control;
    }
    effects.push_back(e);
  }
  j["effects"] = effects;
  return j;
}

inline std::string effects_csv(const AnalysisReport& report) {
  std::string out;
  if (!report.manifest_hash.empty()) out += "# manifest=" + report.manifest_hash + "\n";
  out += "cell,estimand,estimate,se,ci_lower,ci_upper,variance_method,n_treated,n_control,"
         "ess_treated,ess_control,degenerate\n";
  auto field = [](double v) { return std::isnan(v) ? std::string("NA") : csv::fmt(v); };
  for (const auto& est : report.effects) {
    out += csv::quote(est.cell) + "," + est.estimand + ",";
    out += (est.degenerate ? "NA" : csv::fmt(est.estimate)) + ",";
    out += field(est.se) + "," + field(est.ci_lower) + "," + field(est.ci_upper) + ",";
    out += est.variance_method.empty() ? "NA" : est.variance_method;
    out += "," + std::to_string(est.n_treated) + "," + std::to_string(est.n_control) + ",";
    out += (est.degenerate ? "NA" : csv::fmt(est.ess_treated)) + ",";
    out += (est.degenerate ? "NA" : csv::fmt(est.ess_control)) + ",";
    out += est.degenerate ? "1" : "0";
    out += "\n";
  }
  return out;
}

inline std::string weights_csv(const AnalysisReport& report, const AnalysisDataset& ds) {
  std::string out;
  if (!report.manifest_hash.empty()) out += "# manifest=" + report.manifest_hash + "\n";
  out += "row,treatment,propensity,weight\n";
  for (int i = 0; i < ds.n(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(ds.treatment[i]) + "," +
           csv::fmt(report.propensity.e[i]) + "," + csv::fmt(report.weights.w[i]) + "\n";
  }
  return out;
}

} // namespace sgw
