#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sgw/config.hpp"
#include "sgw/csv.hpp"
#include "sgw/dataset.hpp"
#include "sgw/design.hpp"
#include "sgw/diagnostics.hpp"
#include "sgw/errors.hpp"
#include "sgw/lasso.hpp"
#include "sgw/logistic.hpp"
#include "sgw/pipeline.hpp"
#include "sgw/rng.hpp"
#include "sgw/weights.hpp"

namespace sgw {

/// Coefficients of the simulated treatment and outcome models. `alpha_xs`
/// is the per-subgroup interaction block, identical for both subgroup
/// variables (alpha_xs = -kappa * alpha_x).
struct CoefficientSet {
  double alpha0 = -2.0;
  Eigen::Vector2d alpha_s{1.0, 1.0};
  Eigen::VectorXd alpha_x;
  Eigen::VectorXd alpha_xs;
  double beta0 = 0.0;
  Eigen::VectorXd beta_x;
  Eigen::Vector2d beta_s{0.8, 0.8};
  double beta_z = -1.0;
  Eigen::Vector2d beta_sz{0.0, 0.0};
};

/// Covariate coefficients: within each block of P/2 (continuous first,
/// then binary), the leading floor(psi * P/2) entries take equally spaced
/// values from 0.25*gamma to 0.5*gamma inclusive and the rest are zero.
/// A single nonzero anchors at the upper end 0.5*gamma.
inline CoefficientSet build_alpha(const ScenarioConfig& cfg) {
  CoefficientSet coefs;
  const int half = cfg.P / 2;
  const int m = static_cast<int>(std::floor(cfg.psi * half));
  coefs.alpha_x = Eigen::VectorXd::Zero(cfg.P);
  for (int block = 0; block < 2; ++block) {
    for (int j = 0; j < m; ++j) {
      double v = m == 1 ? 0.5 * cfg.gamma
                        : 0.25 * cfg.gamma + j * (0.25 * cfg.gamma) / (m - 1);
      coefs.alpha_x[block * half + j] = v;
    }
  }
  coefs.alpha_xs = -cfg.kappa * coefs.alpha_x;
  coefs.beta_x = coefs.alpha_x;
  coefs.beta_sz = Eigen::Vector2d(cfg.beta_s1z, cfg.beta_s2z);
  return coefs;
}

struct GeneratedData {
  AnalysisDataset ds;
  Eigen::VectorXd true_propensity;
};

namespace detail {

inline double sim_logit_eta(const CoefficientSet& c, const Eigen::VectorXd& x, double s1,
                            double s2) {
  double eta = c.alpha0 + s1 * c.alpha_s[0] + s2 * c.alpha_s[1] + x.dot(c.alpha_x);
  eta += (s1 + s2) * x.dot(c.alpha_xs);
  return eta;
}

inline double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

} // namespace detail

/// Draw one dataset from the simulated design: P/2 standard-normal and P/2
/// Bernoulli(0.3) covariates, two Bernoulli(0.25) subgroup variables,
/// treatment from the interaction logistic model, continuous outcome from
/// the linear model with unit-normal noise. True propensities come along.
inline GeneratedData generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
  const int N = cfg.N;
  const int P = cfg.P;
  const int half = P / 2;
  CoefficientSet coefs = build_alpha(cfg);

  auto gen = rng::substream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution bern_x(0.3);
  std::bernoulli_distribution bern_s(0.25);

  GeneratedData out;
  AnalysisDataset& ds = out.ds;
  ds.covariates.resize(N, P);
  ds.indicators.resize(N, 4);
  ds.outcome.resize(N);
  ds.treatment.resize(N);
  out.true_propensity.resize(N);

  for (int p = 0; p < P; ++p) ds.covariate_names.push_back("x" + std::to_string(p + 1));
  ds.subgroup_variables = {"S1", "S2"};
  ds.indicator_labels = {{"S1", "0", 0}, {"S1", "1", 1}, {"S2", "0", 0}, {"S2", "1", 1}};

  for (int i = 0; i < N; ++i) {
    for (int p = 0; p < half; ++p) ds.covariates(i, p) = normal(gen);
    for (int p = half; p < P; ++p) ds.covariates(i, p) = bern_x(gen) ? 1.0 : 0.0;
    double s1 = bern_s(gen) ? 1.0 : 0.0;
    double s2 = bern_s(gen) ? 1.0 : 0.0;
    ds.indicators(i, 0) = 1.0 - s1;
    ds.indicators(i, 1) = s1;
    ds.indicators(i, 2) = 1.0 - s2;
    ds.indicators(i, 3) = s2;
  }
  for (int i = 0; i < N; ++i) {
    double e = detail::sigmoid(
        detail::sim_logit_eta(coefs, ds.covariates.row(i).transpose(), ds.indicators(i, 1),
                              ds.indicators(i, 3)));
    out.true_propensity[i] = e;
    std::bernoulli_distribution bern_z(e);
    ds.treatment[i] = bern_z(gen) ? 1 : 0;
  }
  for (int i = 0; i < N; ++i) {
    double s1 = ds.indicators(i, 1), s2 = ds.indicators(i, 3);
    double y = coefs.beta0 + ds.covariates.row(i).dot(coefs.beta_x) + s1 * coefs.beta_s[0] +
               s2 * coefs.beta_s[1] + coefs.beta_z * ds.treatment[i] +
               ds.treatment[i] * (s1 * coefs.beta_sz[0] + s2 * coefs.beta_sz[1]) + normal(gen);
    ds.outcome[i] = y;
  }
  ds.validate();
  return out;
}

struct EstimandValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  double mc_se = 0.0;
};

/// Ground-truth estimands of one scenario, from the brute-force oracle.
/// Cell order: S1=0, S1=1, S2=0, S2=1.
struct TrueEstimands {
  EstimandValue ate, ato;
  std::array<EstimandValue, 4> s_ate;
  std::array<EstimandValue, 4> s_ato;
  long mc_draws = 0;

  double value_for(const std::string& cell, Tilting tilt) const {
    static const std::array<std::string, 4> labels{"S1=0", "S1=1", "S2=0", "S2=1"};
    if (cell == "Overall") return tilt == Tilting::IPW ? ate.value : ato.value;
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (labels[c] == cell) return tilt == Tilting::IPW ? s_ate[c].value : s_ato[c].value;
    throw ConfigError("unknown cell label: " + cell);
  }
};

/// Independent Monte Carlo oracle for the true estimands: draw (X, S) from
/// the covariate law, evaluate the true propensity and the conditional
/// effect, and average with tilting weight 1 (ATE) or e(1-e) (ATO),
/// overall and within each subgroup level. Standard errors come from 100
/// batch means. Deliberately bypasses the estimation code paths.
inline TrueEstimands true_estimands(const ScenarioConfig& cfg, long mc_draws,
                                    std::uint64_t seed) {
  if (mc_draws < 100000) throw ConfigError("the truth oracle needs mc_draws >= 100000");
  CoefficientSet coefs = build_alpha(cfg);
  const int P = cfg.P;
  const int half = P / 2;

  auto gen = rng::substream(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution bern_x(0.3);
  std::bernoulli_distribution bern_s(0.25);

  constexpr int kBatches = 100;
  // Accumulators: [overall + 4 cells] x [ATE sums, h sums, h*tau sums, counts]
  struct Acc {
    double sum_tau = 0.0, n = 0.0, sum_h = 0.0, sum_htau = 0.0;
  };
  std::array<std::array<Acc, 5>, kBatches> batch{};

  Eigen::VectorXd x(P);
  const long per_batch = mc_draws / kBatches;
  const long total = per_batch * kBatches;
  for (long d = 0; d < total; ++d) {
    int b = static_cast<int>(d / per_batch);
    for (int p = 0; p < half; ++p) x[p] = normal(gen);
    for (int p = half; p < P; ++p) x[p] = bern_x(gen) ? 1.0 : 0.0;
    double s1 = bern_s(gen) ? 1.0 : 0.0;
    double s2 = bern_s(gen) ? 1.0 : 0.0;
    double e = detail::sigmoid(detail::sim_logit_eta(coefs, x, s1, s2));
    double h = e * (1.0 - e);
    double tau = coefs.beta_z + s1 * coefs.beta_sz[0] + s2 * coefs.beta_sz[1];
    const std::array<bool, 5> member{true, s1 == 0.0, s1 == 1.0, s2 == 0.0, s2 == 1.0};
    for (int c = 0; c < 5; ++c) {
      if (!member[c]) continue;
      Acc& a = batch[b][c];
      a.sum_tau += tau;
      a.n += 1.0;
      a.sum_h += h;
      a.sum_htau += h * tau;
    }
  }

  auto reduce = [&](int c, bool overlap) {
    // Pooled point estimate and batch-mean MC standard error.
    double num = 0.0, den = 0.0;
    std::array<double, kBatches> per{};
    for (int b = 0; b < kBatches; ++b) {
      const Acc& a = batch[b][c];
      num += overlap ? a.sum_htau : a.sum_tau;
      den += overlap ? a.sum_h : a.n;
      per[b] = (overlap ? a.sum_htau : a.sum_tau) / (overlap ? a.sum_h : a.n);
    }
    EstimandValue v;
    v.value = num / den;
    double mean = 0.0;
    for (double p : per) mean += p;
    mean /= kBatches;
    double ss = 0.0;
    for (double p : per) ss += (p - mean) * (p - mean);
    v.mc_se = std::sqrt(ss / (kBatches - 1) / kBatches);
    return v;
  };

  TrueEstimands truth;
  truth.mc_draws = total;
  truth.ate = reduce(0, false);
  truth.ato = reduce(0, true);
  for (int c = 0; c < 4; ++c) {
    truth.s_ate[c] = reduce(c + 1, false);
    truth.s_ato[c] = reduce(c + 1, true);
  }
  return truth;
}

/// One replicate-level record of the scenario runner.
struct ReplicateRecord {
  int replicate = 0;
  std::string method;
  std::string cell;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double max_asmd = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

/// Aggregated performance of one method in one cell.
struct MethodCellMetrics {
  std::string method;
  std::string cell;
  double truth = std::numeric_limits<double>::quiet_NaN();
  int n_ok = 0;
  int n_failed = 0;
  double mean_estimate = std::numeric_limits<double>::quiet_NaN();
  double bias = std::numeric_limits<double>::quiet_NaN();
  double rel_bias = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double var_estimate = std::numeric_limits<double>::quiet_NaN();
  double mean_max_asmd = std::numeric_limits<double>::quiet_NaN();
};

struct ScenarioResult {
  ScenarioConfig cfg;
  TrueEstimands truth;
  std::vector<MethodCellMetrics> metrics;
  std::vector<ReplicateRecord> replicates;
  int failed_replicates = 0;
};

namespace detail {

inline std::vector<std::string> metric_cells() {
  return {"S1=0", "S1=1", "S2=0", "S2=1", "Overall"};
}

/// Propensities per source for one replicate; the LASSO path is shared
/// between the `lasso` and `post-lasso` methods.
struct ReplicateFits {
  std::map<PsSource, Eigen::VectorXd> e;
};

inline Eigen::VectorXd fit_source(PsSource src, const AnalysisDataset& ds,
                                  const Eigen::VectorXd& true_e, const ScenarioConfig& cfg,
                                  std::uint64_t lasso_seed, std::optional<LassoPath>& path_cache) {
  auto run_lasso = [&]() -> const LassoPath& {
    if (!path_cache) {
      DesignMatrix dm = build_design(ds, InteractionSelector::all());
      LassoControl ctrl;
      ctrl.n_lambda = cfg.n_lambda;
      ctrl.lambda_ratio = cfg.lambda_ratio;
      path_cache = fit_lasso_logistic(dm, ds.treatment, cfg.cv_folds, lasso_seed, ctrl);
    }
    return *path_cache;
  };
  switch (src) {
    case PsSource::TrueModel: {
      DesignMatrix dm = build_design(ds, InteractionSelector::all());
      LogisticFit fit = fit_logistic_irls(dm, ds.treatment);
      if (!fit.converged) throw ConvergenceError("true-model ML fit did not converge");
      return fit.propensity;
    }
    case PsSource::LogisticMain: {
      DesignMatrix dm = build_design(ds, InteractionSelector::none());
      LogisticFit fit = fit_logistic_irls(dm, ds.treatment);
      if (!fit.converged) throw ConvergenceError("main-effects ML fit did not converge");
      return fit.propensity;
    }
    case PsSource::Lasso: {
      const LassoPath& path = run_lasso();
      DesignMatrix dm = build_design(ds, InteractionSelector::all());
      Eigen::VectorXd eta = dm.X * path.coef_at_chosen();
      Eigen::VectorXd e(eta.size());
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double raw = sigmoid(eta[i]);
        e[i] = std::min(std::max(raw, DBL_EPSILON), 1.0 - DBL_EPSILON);
      }
      return e;
    }
    case PsSource::PostLasso: {
      const LassoPath& path = run_lasso();
      DesignMatrix dm = build_design(ds, InteractionSelector::all());
      LogisticFit fit = post_lasso_refit(dm, ds.treatment, path.selected);
      if (!fit.converged) throw ConvergenceError("post-LASSO refit did not converge");
      return fit.propensity;
    }
    case PsSource::External:
      // In the simulation the external source is the DGP's true propensity.
      return true_e;
  }
  throw ConfigError("unhandled propensity source");
}

} // namespace detail

/// Run one scenario: n_replicates datasets, each method's weights and
/// Hajek estimates per cell, aggregated into bias / relative bias / RMSE /
/// mean max-ASMD against the method-matched truth (ATE truth for IPW
/// methods, ATO truth for OW). Replicate-level fit failures are recorded
/// and excluded. Replicates run on `threads` workers with independent seed
/// substreams; results are schedule-independent.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::vector<MethodSpec>& methods,
                                   unsigned threads = 1) {
  if (!cfg.seed_set && cfg.seed == 0)
    throw ConfigError("scenario needs a seed");
  ScenarioResult result;
  result.cfg = cfg;
  result.truth = true_estimands(cfg, cfg.mc_draws, rng::derive_seed(cfg.seed, 0x7472757468ULL));

  const auto cells = detail::metric_cells();
  const int R = cfg.n_replicates;
  const std::size_t stride = methods.size() * cells.size();
  result.replicates.resize(static_cast<std::size_t>(R) * stride);

  rng::parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
    std::uint64_t rep_seed = rng::derive_seed(cfg.seed, 1000 + r);
    ReplicateRecord* out = result.replicates.data() + r * stride;
    std::size_t slot = 0;
    auto mark_all = [&](const MethodSpec& m) {
      for (const auto& cell : cells) {
        out[slot].replicate = static_cast<int>(r);
        out[slot].method = m.label();
        out[slot].cell = cell;
        out[slot].ok = false;
        ++slot;
      }
    };

    GeneratedData data;
    std::vector<SubgroupCell> ds_cells;
    try {
      data = generate_dataset(cfg, rep_seed);
      ds_cells = enumerate_cells(data.ds);
    } catch (const Error&) {
      for (const auto& m : methods) mark_all(m);
      return;
    }

    std::optional<LassoPath> path_cache;
    std::map<PsSource, Eigen::VectorXd> e_cache;
    for (const auto& m : methods) {
      try {
        if (!e_cache.count(m.ps))
          e_cache[m.ps] = detail::fit_source(m.ps, data.ds, data.true_propensity, cfg,
                                             rng::derive_seed(rep_seed, 0x1a550), path_cache);
        WeightSet ws = compute_weights(e_cache[m.ps], data.ds.treatment, m.tilt);
        for (const auto& cell_label : cells) {
          const SubgroupCell* cell = nullptr;
          for (const auto& c : ds_cells)
            if (c.label() == cell_label) cell = &c;
          ReplicateRecord& rec = out[slot];
          rec.replicate = static_cast<int>(r);
          rec.method = m.label();
          rec.cell = cell_label;
          if (cell != nullptr && !cell->degenerate) {
            rec.estimate = estimate_effect(data.ds, ws, *cell).estimate;
            double worst = 0.0;
            for (int p = 0; p < data.ds.n_covariates(); ++p) {
              double a = asmd(data.ds, ws, *cell, p);
              if (!std::isnan(a)) worst = std::max(worst, a);
            }
            rec.max_asmd = worst;
            rec.ok = true;
          }
          ++slot;
        }
      } catch (const Error&) {
        // Rewind to this method's block start and mark every cell failed.
        slot -= slot % cells.size() == 0 ? 0 : slot % cells.size();
        for (const auto& cell : cells) {
          out[slot].replicate = static_cast<int>(r);
          out[slot].method = m.label();
          out[slot].cell = cell;
          out[slot].ok = false;
          ++slot;
        }
      }
    }
  });

  // Aggregate.
  for (const auto& m : methods) {
    std::vector<MethodCellMetrics> rows;
    for (const auto& cell : cells) {
      MethodCellMetrics mm;
      mm.method = m.label();
      mm.cell = cell;
      mm.truth = result.truth.value_for(cell, m.tilt);
      double sum = 0.0, sum_sq_err = 0.0, sum_asmd = 0.0;
      std::vector<double> estimates;
      for (const auto& rec : result.replicates) {
        if (rec.method != m.label() || rec.cell != cell) continue;
        if (!rec.ok) {
          ++mm.n_failed;
          continue;
        }
        ++mm.n_ok;
        sum += rec.estimate;
        sum_sq_err += (rec.estimate - mm.truth) * (rec.estimate - mm.truth);
        sum_asmd += rec.max_asmd;
        estimates.push_back(rec.estimate);
      }
      if (mm.n_ok > 0) {
        mm.mean_estimate = sum / mm.n_ok;
        mm.bias = mm.mean_estimate - mm.truth;
        mm.rel_bias = mm.truth != 0.0 ? mm.bias / std::abs(mm.truth)
                                      : std::numeric_limits<double>::quiet_NaN();
        mm.rmse = std::sqrt(sum_sq_err / mm.n_ok);
        mm.mean_max_asmd = sum_asmd / mm.n_ok;
        if (mm.n_ok > 1) {
          double var = 0.0;
          for (double est : estimates) var += (est - mm.mean_estimate) * (est - mm.mean_estimate);
          mm.var_estimate = var / (mm.n_ok - 1);
        }
      }
      rows.push_back(mm);
    }
    // A row averaging the four subgroup cells, kept distinct from the
    // Overall cell.
    MethodCellMetrics avg;
    avg.method = m.label();
    avg.cell = "Subgroups(avg)";
    avg.truth = std::numeric_limits<double>::quiet_NaN();
    avg.bias = avg.rel_bias = avg.rmse = avg.var_estimate = avg.mean_max_asmd = 0.0;
    avg.mean_estimate = std::numeric_limits<double>::quiet_NaN();
    int counted = 0;
    for (const auto& row : rows) {
      if (row.cell == "Overall" || row.n_ok == 0) continue;
      avg.bias += row.bias;
      avg.rel_bias += row.rel_bias;
      avg.rmse += row.rmse;
      avg.var_estimate += row.var_estimate;
      avg.mean_max_asmd += row.mean_max_asmd;
      avg.n_ok = row.n_ok;
      avg.n_failed = row.n_failed;
      ++counted;
    }
    if (counted > 0) {
      avg.bias /= counted;
      avg.rel_bias /= counted;
      avg.rmse /= counted;
      avg.var_estimate /= counted;
      avg.mean_max_asmd /= counted;
    }
    for (auto& row : rows) result.metrics.push_back(std::move(row));
    result.metrics.push_back(avg);
  }

  for (int r = 0; r < R; ++r) {
    bool any_fail = false;
    for (std::size_t s = 0; s < stride; ++s)
      any_fail = any_fail || !result.replicates[r * stride + s].ok;
    if (any_fail) ++result.failed_replicates;
  }
  return result;
}

// ---- serialization ----

inline std::string truth_csv(const TrueEstimands& truth, const std::string& manifest_hash = "") {
  std::string out;
  if (!manifest_hash.empty()) out += "# manifest=" + manifest_hash + "\n";
  out += "cell,estimand,value,mc_se,mc_draws\n";
  auto row = [&](const std::string& cell, const std::string& est, const EstimandValue& v) {
    out += cell + "," + est + "," + csv::fmt(v.value) + "," + csv::fmt(v.mc_se) + "," +
           std::to_string(truth.mc_draws) + "\n";
  };
  row("Overall", "ATE", truth.ate);
  row("Overall", "ATO", truth.ato);
  static const std::array<std::string, 4> labels{"S1=0", "S1=1", "S2=0", "S2=1"};
  for (int c = 0; c < 4; ++c) {
    row(labels[c], "S-ATE", truth.s_ate[c]);
    row(labels[c], "S-ATO", truth.s_ato[c]);
  }
  return out;
}

inline std::string scenario_label(const ScenarioConfig& cfg) {
  return "N" + std::to_string(cfg.N) + "_P" + std::to_string(cfg.P) + "_psi" + csv::fmt(cfg.psi) +
         "_gamma" + csv::fmt(cfg.gamma) + "_kappa" + csv::fmt(cfg.kappa) + "_bsz" +
         csv::fmt(cfg.beta_s1z) + "/" + csv::fmt(cfg.beta_s2z);
}

inline void append_metrics_csv(std::string& out, const ScenarioResult& result) {
  for (const auto& m : result.metrics) {
    auto field = [](double v) { return std::isnan(v) ? std::string("NA") : csv::fmt(v); };
    out += csv::quote(scenario_label(result.cfg)) + "," + m.method + "," + csv::quote(m.cell) +
           "," + field(m.truth) + "," + std::to_string(m.n_ok) + "," +
           std::to_string(m.n_failed) + "," + field(m.mean_estimate) + "," + field(m.bias) + "," +
           field(m.rel_bias) + "," + field(m.rmse) + "," + field(m.var_estimate) + "," +
           field(m.mean_max_asmd) + "\n";
  }
}

inline std::string metrics_csv_header() {
  return "scenario,method,cell,truth,n_ok,n_failed,mean_estimate,bias,rel_bias,rmse,"
         "var_estimate,mean_max_asmd\n";
}

inline void append_replicates_csv(std::string& out, const ScenarioResult& result) {
  for (const auto& rec : result.replicates) {
    out += csv::quote(scenario_label(result.cfg)) + "," + std::to_string(rec.replicate) + "," +
           rec.method + "," + csv::quote(rec.cell) + ",";
    out += rec.ok ? csv::fmt(rec.estimate) : "NA";
    out += ",";
    out += rec.ok ? csv::fmt(rec.max_asmd) : "NA";
    out += ",";
    out += rec.ok ? "1" : "0";
    out += "\n";
  }
}

inline std::string replicates_csv_header() {
  return "scenario,replicate,method,cell,estimate,max_asmd,ok\n";
}

} // namespace sgw
