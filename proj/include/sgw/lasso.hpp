#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sgw/design.hpp"
#include "sgw/errors.hpp"
#include "sgw/logistic.hpp"
#include "sgw/rng.hpp"

namespace sgw {

struct LassoControl {
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  double cd_tol = 1e-8;    // max coefficient change within a CD sweep
  double kkt_tol = 1e-7;   // stationarity target on the true gradient
  int max_outer = 200;     // quadratic re-approximations per lambda
  int max_passes = 2000;   // CD sweeps per quadratic subproblem
};

/// L1-penalized logistic solution path with cross-validation records.
///
/// `coefficients` are on the original column scale. Internally penalized
/// columns are rescaled to unit variance; `scales` records the divisor per
/// column (1 for unpenalized columns), which is what the KKT conditions are
/// expressed against.
struct LassoPath {
  Eigen::VectorXd lambdas;  // descending, lambdas[0] = lambda_max
  Eigen::MatrixXd coefficients;  // K x L
  Eigen::VectorXd cv_mean_deviance;
  Eigen::VectorXd cv_se;
  std::uint64_t fold_seed = 0;
  int refold_attempts = 0;
  int chosen = -1;
  double chosen_lambda = 0.0;
  std::vector<std::pair<int, int>> selected;  // interaction (p, r) pairs
  std::vector<int> selected_columns;
  Eigen::VectorXd scales;
  std::vector<std::string> column_names;

  Eigen::VectorXd coef_at_chosen() const { return coefficients.col(chosen); }
};

namespace detail {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Path solver working on a raw matrix; shared by the full fit and the CV
/// fold fits. Coefficients are kept in the standardized space.
struct PathSolver {
  const Eigen::MatrixXd& X;       // original columns
  Eigen::VectorXd penalty;        // per-column penalty factor
  Eigen::VectorXd Z;              // treatment as double
  Eigen::VectorXd scales;         // penalized columns: population sd; else 1
  Eigen::MatrixXd Xs;             // standardized columns
  LassoControl ctrl;
  int n = 0, k = 0;

  PathSolver(const Eigen::MatrixXd& X_, const Eigen::VectorXd& penalty_,
             const Eigen::VectorXi& Zi, const LassoControl& ctrl_)
      : X(X_), penalty(penalty_), ctrl(ctrl_) {
    n = static_cast<int>(X.rows());
    k = static_cast<int>(X.cols());
    Z = Zi.cast<double>();
    scales = Eigen::VectorXd::Ones(k);
    Xs = X;
    for (int j = 0; j < k; ++j) {
      if (penalty[j] <= 0.0) continue;
      double mean = X.col(j).mean();
      double sq = X.col(j).squaredNorm() / n;
      double sd = std::sqrt(std::max(sq - mean * mean, 0.0));
      if (sd > 1e-12) {
        scales[j] = sd;
        Xs.col(j) /= sd;
      }
    }
  }

  /// ML fit of the unpenalized block; penalized coefficients stay 0.
  Eigen::VectorXd mains_only_start() const {
    std::vector<int> mains;
    for (int j = 0; j < k; ++j)
      if (penalty[j] <= 0.0) mains.push_back(j);
    DesignMatrix sub;
    sub.X.resize(n, mains.size());
    for (std::size_t c = 0; c < mains.size(); ++c) {
      sub.X.col(c) = Xs.col(mains[c]);
      sub.columns.push_back({ColumnKind::CovariateMain, -1, -1,
                             "c" + std::to_string(mains[c]), 0.0});
    }
    Eigen::VectorXi Zi = Z.cast<int>();
    LogisticFit fit = fit_logistic_irls(sub, Zi, 1e-10, 100);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    for (std::size_t c = 0; c < mains.size(); ++c) beta[mains[c]] = fit.coef[c];
    return beta;
  }

  /// KKT violation of the true penalized objective at (beta, lambda):
  ///   unpenalized column:   |g_j|
  ///   penalized, beta = 0:  max(0, |g_j| - lambda pf_j)
  ///   penalized, beta != 0: |g_j - lambda pf_j sign(beta_j)|
  /// with g_j = (1/n) sum_i (Z_i - e_i) xs_ij.
  double kkt_violation(const Eigen::VectorXd& beta, const Eigen::VectorXd& eta,
                       double lambda) const {
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) e[i] = sigmoid_clipped(eta[i]);
    Eigen::VectorXd g = Xs.transpose() * (Z - e) / n;
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      double v;
      if (penalty[j] <= 0.0) {
        v = std::abs(g[j]);
      } else if (beta[j] == 0.0) {
        v = std::max(0.0, std::abs(g[j]) - lambda * penalty[j]);
      } else {
        v = std::abs(g[j] - lambda * penalty[j] * (beta[j] > 0 ? 1.0 : -1.0));
      }
      worst = std::max(worst, v);
    }
    return worst;
  }

  /// Solve at one lambda, warm-starting from (beta, eta). Alternates
  /// quadratic approximation with coordinate descent over a working set
  /// until the true KKT conditions hold.
  void fit_at_lambda(double lambda, Eigen::VectorXd& beta, Eigen::VectorXd& eta) const {
    std::vector<char> in_ws(k, 0);
    std::vector<int> ws;
    for (int j = 0; j < k; ++j)
      if (penalty[j] <= 0.0 || beta[j] != 0.0) {
        in_ws[j] = 1;
        ws.push_back(j);
      }

    for (int outer = 0; outer < ctrl.max_outer; ++outer) {
      Eigen::VectorXd e(n), w(n);
      for (int i = 0; i < n; ++i) {
        e[i] = sigmoid_clipped(eta[i]);
        w[i] = std::max(e[i] * (1.0 - e[i]), 1e-9);
      }
      Eigen::VectorXd rho = Z - e;  // w .* (working response - eta)
      Eigen::VectorXd xwx(k);
      for (int j : ws) xwx[j] = Xs.col(j).cwiseAbs2().dot(w) / n;

      for (int pass = 0;; ++pass) {
        if (pass >= ctrl.max_passes)
          throw ConvergenceError("coordinate descent did not converge at lambda = " +
                                 std::to_string(lambda));
        double max_step = 0.0;
        for (int j : ws) {
          double gj = Xs.col(j).dot(rho) / n + xwx[j] * beta[j];
          double bj = penalty[j] > 0.0 ? soft_threshold(gj, lambda * penalty[j]) / xwx[j]
                                       : gj / xwx[j];
          double delta = bj - beta[j];
          if (delta != 0.0) {
            beta[j] = bj;
            rho.array() -= delta * w.array() * Xs.col(j).array();
            eta += delta * Xs.col(j);
            max_step = std::max(max_step, std::abs(delta));
          }
        }
        if (max_step < ctrl.cd_tol) break;
      }

      // Check stationarity of the true objective; grow the working set
      // with any violating column and re-quadratize.
      Eigen::VectorXd e_now(n);
      for (int i = 0; i < n; ++i) e_now[i] = sigmoid_clipped(eta[i]);
      Eigen::VectorXd g = Xs.transpose() * (Z - e_now) / n;
      double worst = 0.0;
      bool grew = false;
      for (int j = 0; j < k; ++j) {
        double v;
        if (penalty[j] <= 0.0) v = std::abs(g[j]);
        else if (beta[j] == 0.0) v = std::max(0.0, std::abs(g[j]) - lambda * penalty[j]);
        else v = std::abs(g[j] - lambda * penalty[j] * (beta[j] > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
        if (v > ctrl.kkt_tol && !in_ws[j]) {
          in_ws[j] = 1;
          ws.push_back(j);
          grew = true;
        }
      }
      if (worst <= ctrl.kkt_tol && !grew) return;
    }
    throw ConvergenceError("penalized fit did not reach stationarity at lambda = " +
                           std::to_string(lambda));
  }

  /// Full path over `lambdas` (computed from the data when empty).
  /// Returns coefficients in the standardized space, one column per lambda.
  Eigen::MatrixXd solve(Eigen::VectorXd& lambdas) const {
    Eigen::VectorXd beta = mains_only_start();
    Eigen::VectorXd eta = Xs * beta;

    if (lambdas.size() == 0) {
      Eigen::VectorXd e(n);
      for (int i = 0; i < n; ++i) e[i] = sigmoid_clipped(eta[i]);
      Eigen::VectorXd g = Xs.transpose() * (Z - e) / n;
      double lambda_max = 0.0;
      for (int j = 0; j < k; ++j)
        if (penalty[j] > 0.0) lambda_max = std::max(lambda_max, std::abs(g[j]) / penalty[j]);
      if (!(lambda_max > 0.0))
        throw ConvergenceError("could not determine lambda_max (zero penalized gradient)");
      lambdas.resize(ctrl.n_lambda);
      double log_max = std::log(lambda_max);
      double log_step = std::log(ctrl.lambda_ratio) / (ctrl.n_lambda - 1);
      for (int l = 0; l < ctrl.n_lambda; ++l) lambdas[l] = std::exp(log_max + l * log_step);
      lambdas[0] = lambda_max;
    }

    Eigen::MatrixXd betas(k, lambdas.size());
    for (int l = 0; l < lambdas.size(); ++l) {
      fit_at_lambda(lambdas[l], beta, eta);
      betas.col(l) = beta;
    }
    return betas;
  }
};

inline double held_out_mean_deviance(const Eigen::MatrixXd& X, const Eigen::VectorXi& Z,
                                     const Eigen::VectorXd& coef_original) {
  Eigen::VectorXd eta = X * coef_original;
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    dev += -2.0 * (Z[i] * eta[i] - softplus(eta[i]));
  return dev / static_cast<double>(eta.size());
}

/// Stratified fold ids (by treatment arm), values in [0, folds).
inline std::vector<int> stratified_folds(const Eigen::VectorXi& Z, int folds,
                                         std::mt19937_64& gen) {
  std::vector<int> treated, control;
  for (int i = 0; i < Z.size(); ++i) (Z[i] == 1 ? treated : control).push_back(i);
  std::shuffle(treated.begin(), treated.end(), gen);
  std::shuffle(control.begin(), control.end(), gen);
  std::vector<int> fold(Z.size());
  for (std::size_t idx = 0; idx < treated.size(); ++idx)
    fold[treated[idx]] = static_cast<int>(idx % folds);
  for (std::size_t idx = 0; idx < control.size(); ++idx)
    fold[control[idx]] = static_cast<int>(idx % folds);
  return fold;
}

} // namespace detail

/// Coordinate-descent LASSO path for the logistic propensity model, with
/// penalty factors taken from the design (mains unpenalized, interactions
/// penalized) and K-fold cross-validation stratified by treatment.
///
/// The grid runs from lambda_max (all penalized coefficients zero) down to
/// lambda_max * lambda_ratio; lambda is chosen at the minimum CV mean
/// binomial deviance.
inline LassoPath fit_lasso_logistic(const DesignMatrix& dm, const Eigen::VectorXi& Z, int folds,
                                    std::uint64_t seed, const LassoControl& ctrl = {}) {
  if (folds < 2) throw ConfigError("cross-validation requires folds >= 2");
  if (dm.penalized_columns().empty())
    throw ConfigError("design has no penalized columns; nothing for the LASSO to select");
  const int n = dm.n();
  if (Z.size() != n) throw ConfigError("treatment vector length does not match design rows");

  Eigen::VectorXd penalty(dm.k());
  for (int j = 0; j < dm.k(); ++j) penalty[j] = dm.columns[j].penalty_factor;

  detail::PathSolver solver(dm.X, penalty, Z, ctrl);
  LassoPath path;
  path.column_names = dm.column_names();
  path.scales = solver.scales;
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd beta_std = solver.solve(lambdas);
  path.lambdas = lambdas;
  path.coefficients = beta_std.array().colwise() / solver.scales.array();

  // Fold assignment: refold on a fresh substream if some fold lacks a
  // treatment class; give up after 5 attempts.
  std::vector<int> fold_of;
  int attempt = 0;
  for (; attempt < 5; ++attempt) {
    auto gen = rng::substream(seed, 0x666f6c64ULL + attempt);
    fold_of = detail::stratified_folds(Z, folds, gen);
    std::vector<int> t(folds, 0), c(folds, 0);
    for (int i = 0; i < n; ++i) (Z[i] == 1 ? t : c)[fold_of[i]]++;
    bool ok = true;
    for (int f = 0; f < folds; ++f) ok = ok && t[f] > 0 && c[f] > 0;
    if (ok) break;
  }
  if (attempt == 5)
    throw CvFoldError("could not build " + std::to_string(folds) +
                      " folds with both treatment classes in every fold");
  path.fold_seed = seed;
  path.refold_attempts = attempt;

  const int L = static_cast<int>(lambdas.size());
  Eigen::MatrixXd fold_dev(folds, L);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
    Eigen::MatrixXd Xtr(train.size(), dm.k()), Xte(test.size(), dm.k());
    Eigen::VectorXi Ztr(train.size()), Zte(test.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xtr.row(i) = dm.X.row(train[i]);
      Ztr[i] = Z[train[i]];
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
      Xte.row(i) = dm.X.row(test[i]);
      Zte[i] = Z[test[i]];
    }
    detail::PathSolver fold_solver(Xtr, penalty, Ztr, ctrl);
    Eigen::VectorXd fold_lambdas = lambdas;
    Eigen::MatrixXd fold_beta = fold_solver.solve(fold_lambdas);
    for (int l = 0; l < L; ++l) {
      Eigen::VectorXd coef = fold_beta.col(l).array() / fold_solver.scales.array();
      fold_dev(f, l) = detail::held_out_mean_deviance(Xte, Zte, coef);
    }
  }

  path.cv_mean_deviance = fold_dev.colwise().mean();
  path.cv_se.resize(L);
  for (int l = 0; l < L; ++l) {
    double m = path.cv_mean_deviance[l];
    double ss = (fold_dev.col(l).array() - m).square().sum() / (folds - 1);
    path.cv_se[l] = std::sqrt(ss / folds);
  }

  path.chosen = 0;
  for (int l = 1; l < L; ++l)
    if (path.cv_mean_deviance[l] < path.cv_mean_deviance[path.chosen]) path.chosen = l;
  path.chosen_lambda = path.lambdas[path.chosen];

  for (int j = 0; j < dm.k(); ++j) {
    if (dm.columns[j].kind == ColumnKind::Interaction && beta_std(j, path.chosen) != 0.0) {
      path.selected_columns.push_back(j);
      path.selected.emplace_back(dm.columns[j].covariate, dm.columns[j].indicator);
    }
  }
  return path;
}

/// ML refit on all mains plus the selected interactions (removes the
/// LASSO shrinkage); this fit is the propensity model the weights use.
inline LogisticFit post_lasso_refit(const DesignMatrix& full, const Eigen::VectorXi& Z,
                                    const std::vector<std::pair<int, int>>& selected,
                                    double tol = kDefaultScoreTol,
                                    int max_iter = kDefaultMaxIter) {
  DesignMatrix reduced = reduce_design(full, selected);
  return fit_logistic_irls(reduced, Z, tol, max_iter);
}

/// Stationarity violation of the stored solution at path point `l`,
/// measured in the standardized space the penalty applies to.
inline double max_kkt_violation(const DesignMatrix& dm, const Eigen::VectorXi& Z,
                                const LassoPath& path, int l) {
  Eigen::VectorXd penalty(dm.k());
  for (int j = 0; j < dm.k(); ++j) penalty[j] = dm.columns[j].penalty_factor;
  LassoControl ctrl;
  detail::PathSolver solver(dm.X, penalty, Z, ctrl);
  Eigen::VectorXd beta_std = path.coefficients.col(l).array() * path.scales.array();
  Eigen::VectorXd eta = dm.X * path.coefficients.col(l);
  return solver.kkt_violation(beta_std, eta, path.lambdas[l]);
}

} // namespace sgw
