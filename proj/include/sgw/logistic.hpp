#pragma once

#include <Eigen/Dense>
#include <cfloat>
#include <cmath>
#include <string>
#include <vector>

#include "sgw/design.hpp"
#include "sgw/errors.hpp"

namespace sgw {

/// Coefficients above this magnitude are treated as diverging
/// (complete/quasi-complete separation).
inline constexpr double kSeparationCap = 30.0;

inline constexpr double kDefaultScoreTol = 1e-10;
inline constexpr int kDefaultMaxIter = 100;

namespace detail {

inline double sigmoid_clipped(double eta) {
  double p;
  if (eta >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-eta));
  } else {
    double e = std::exp(eta);
    p = e / (1.0 + e);
  }
  if (p < DBL_EPSILON) return DBL_EPSILON;
  if (p > 1.0 - DBL_EPSILON) return 1.0 - DBL_EPSILON;
  return p;
}

/// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double binomial_deviance(const Eigen::VectorXi& Z, const Eigen::VectorXd& eta) {
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    loglik += Z[i] * eta[i] - softplus(eta[i]);
  return -2.0 * loglik;
}

} // namespace detail

/// Maximum-likelihood logistic fit.
///
/// At convergence the score equations hold: |sum_i (Z_i - e_i) x_ij| is at
/// most `max_score_residual` for every design column j. This residual is
/// the quantity the exact-balance property of overlap weighting rests on.
struct LogisticFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd propensity;  // fitted values on the training design
  bool converged = false;
  int iterations = 0;
  double max_score_residual = 0.0;
  std::vector<std::string> column_names;
};

struct PropensityPrediction {
  Eigen::VectorXd e;
  int clamped = 0;  // rows pushed off exact 0/1 by the overflow guard
};

/// Newton/IRLS with step-halving; converges when the max absolute score
/// residual drops to `tol`. Throws SeparationError when any coefficient
/// exceeds the separation cap, RankError on a rank-deficient design.
inline LogisticFit fit_logistic_irls(const DesignMatrix& dm, const Eigen::VectorXi& Z,
                                     double tol = kDefaultScoreTol,
                                     int max_iter = kDefaultMaxIter) {
  const int N = dm.n();
  const int K = dm.k();
  if (Z.size() != N) throw ConfigError("treatment vector length does not match design rows");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < K)
      throw RankError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                      " of " + std::to_string(K) + " columns)");
  }

  const Eigen::VectorXd Zd = Z.cast<double>();
  LogisticFit fit;
  fit.column_names = dm.column_names();
  fit.coef = Eigen::VectorXd::Zero(K);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd e(N);
  for (int i = 0; i < N; ++i) e[i] = 0.5;
  double dev = detail::binomial_deviance(Z, eta);

  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd score = dm.X.transpose() * (Zd - e);
    fit.max_score_residual = score.cwiseAbs().maxCoeff();
    if (fit.max_score_residual <= tol) {
      fit.converged = true;
      break;
    }
    fit.iterations = iter;

    Eigen::VectorXd w = e.array() * (1.0 - e.array());
    w = w.cwiseMax(1e-10);
    Eigen::MatrixXd H = dm.X.transpose() * w.asDiagonal() * dm.X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success)
      throw RankError("weighted normal equations are singular");
    Eigen::VectorXd delta = ldlt.solve(score);

    // Step-halving keeps the deviance non-increasing.
    double step = 1.0;
    Eigen::VectorXd coef_new, eta_new;
    double dev_new = dev;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      coef_new = fit.coef + step * delta;
      eta_new = dm.X * coef_new;
      dev_new = detail::binomial_deviance(Z, eta_new);
      if (dev_new <= dev + 1e-12 * (std::abs(dev) + 1.0)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; final score check decides convergence

    fit.coef = coef_new;
    eta = eta_new;
    dev = dev_new;
    for (int i = 0; i < N; ++i) e[i] = detail::sigmoid_clipped(eta[i]);

    if (fit.coef.cwiseAbs().maxCoeff() > kSeparationCap)
      throw SeparationError("logistic coefficients diverged (|coef| > " +
                            std::to_string(kSeparationCap) +
                            "); complete or quasi-complete separation");
  }

  Eigen::VectorXd score = dm.X.transpose() * (Zd - e);
  fit.max_score_residual = score.cwiseAbs().maxCoeff();
  fit.converged = fit.max_score_residual <= tol;
  fit.propensity = e;
  return fit;
}

/// Propensities for `dm` under `fit`; dm must carry the same columns the
/// fit was trained on. Values are clamped off exact 0/1 and the clamp
/// count is reported.
inline PropensityPrediction predict_propensity(const LogisticFit& fit, const DesignMatrix& dm) {
  if (fit.column_names != dm.column_names())
    throw ConfigError("design columns do not match the fitted model");
  PropensityPrediction out;
  Eigen::VectorXd eta = dm.X * fit.coef;
  out.e.resize(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double raw;
    if (eta[i] >= 0.0) {
      raw = 1.0 / (1.0 + std::exp(-eta[i]));
    } else {
      double ex = std::exp(eta[i]);
      raw = ex / (1.0 + ex);
    }
    double clamped = std::min(std::max(raw, DBL_EPSILON), 1.0 - DBL_EPSILON);
    if (clamped != raw) ++out.clamped;
    out.e[i] = clamped;
  }
  return out;
}

} // namespace sgw
