#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sgw/dataset.hpp"
#include "sgw/errors.hpp"
#include "sgw/rng.hpp"
#include "sgw/weights.hpp"

namespace sgw {

struct InferenceConfig {
  VarianceMethod method = VarianceMethod::Sandwich;
  int bootstrap_B = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;

  void validate() const {
    if (method == VarianceMethod::Bootstrap && bootstrap_B < 100)
      throw ConfigError("bootstrap requires B >= 100");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("CI level must lie in (0,1)");
  }
};

/// Two-sided normal quantile for a CI level (0.95 -> 1.959964...).
inline double normal_quantile_two_sided(double level) {
  // Acklam's rational approximation of the standard normal inverse CDF.
  double p = 0.5 + level / 2.0;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - plow) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

/// Robust linearization SE of the Hajek difference with the weights held
/// fixed: per arm V_z = sum w^2 (Y - mu_z)^2 / (sum w)^2, SE = sqrt(V1+V0).
/// NaN for a single-unit arm. Invariant to rescaling the weights.
inline double sandwich_se(const AnalysisDataset& ds, const WeightSet& ws,
                          const SubgroupCell& cell) {
  if (cell.n_treated == 0 || cell.n_control == 0)
    throw DegenerateCellError("cell '" + cell.label() + "' has an empty treatment arm");
  if (cell.n_treated < 2 || cell.n_control < 2)
    return std::numeric_limits<double>::quiet_NaN();
  double sw1 = 0.0, swy1 = 0.0, sw0 = 0.0, swy0 = 0.0;
  for (int i : cell.members) {
    if (ds.treatment[i] == 1) {
      sw1 += ws.w[i];
      swy1 += ws.w[i] * ds.outcome[i];
    } else {
      sw0 += ws.w[i];
      swy0 += ws.w[i] * ds.outcome[i];
    }
  }
  double mu1 = swy1 / sw1, mu0 = swy0 / sw0;
  double v1 = 0.0, v0 = 0.0;
  for (int i : cell.members) {
    double wi = ws.w[i];
    double yi = ds.outcome[i];
    if (ds.treatment[i] == 1)
      v1 += wi * wi * (yi - mu1) * (yi - mu1);
    else
      v0 += wi * wi * (yi - mu0) * (yi - mu0);
  }
  v1 /= sw1 * sw1;
  v0 /= sw0 * sw0;
  return std::sqrt(v1 + v0);
}

struct BootstrapResult {
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  int replicates = 0;
  int discarded = 0;
};

namespace detail {

/// Type-7 empirical quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  double h = (sorted.size() - 1) * q;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/// Percentile bootstrap over whole-dataset resamples with the estimated
/// propensities held fixed (no model refit inside replicates; refitting a
/// LASSO path per resample is inconsistent). A replicate that empties one
/// arm of the cell is discarded and redrawn, up to 10 attempts per slot.
inline BootstrapResult bootstrap_ci(const AnalysisDataset& ds, const Eigen::VectorXd& e_hat,
                                    Tilting tilt, const SubgroupCell& cell,
                                    const InferenceConfig& cfg,
                                    unsigned threads = 1) {
  cfg.validate();
  if (cell.n_treated == 0 || cell.n_control == 0)
    throw DegenerateCellError("cell '" + cell.label() + "' has an empty treatment arm");
  const int n = ds.n();
  if (e_hat.size() != n) throw ConfigError("propensity vector length does not match dataset");

  // Per-unit fixed weights and cell membership mask.
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    double h = tilting_value(tilt, e_hat[i]);
    w[i] = ds.treatment[i] == 1 ? h / e_hat[i] : h / (1.0 - e_hat[i]);
  }
  std::vector<char> in_cell(n, 0);
  for (int i : cell.members) in_cell[i] = 1;

  const int B = cfg.bootstrap_B;
  std::vector<double> estimates(B);
  std::vector<int> attempts(B, 0);
  std::vector<char> failed(B, 0);

  rng::parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      auto gen = rng::substream(cfg.seed, b * 16ULL + attempt);
      std::uniform_int_distribution<int> pick(0, n - 1);
      double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
      for (int draw = 0; draw < n; ++draw) {
        int i = pick(gen);
        if (!in_cell[i]) continue;
        if (ds.treatment[i] == 1) {
          num1 += w[i] * ds.outcome[i];
          den1 += w[i];
        } else {
          num0 += w[i] * ds.outcome[i];
          den0 += w[i];
        }
      }
      attempts[b] = attempt + 1;
      if (den1 > 0.0 && den0 > 0.0) {
        estimates[b] = num1 / den1 - num0 / den0;
        return;
      }
    }
    failed[b] = 1;
  });

  BootstrapResult out;
  for (int b = 0; b < B; ++b) {
    out.discarded += attempts[b] - 1;
    if (failed[b])
      throw DegenerateCellError("bootstrap exhausted redraw attempts for cell '" +
                                cell.label() + "'");
  }
  out.replicates = B;

  double mean = 0.0;
  for (double est : estimates) mean += est;
  mean /= B;
  double ss = 0.0;
  for (double est : estimates) ss += (est - mean) * (est - mean);
  out.se = std::sqrt(ss / (B - 1));

  std::vector<double> sorted = estimates;
  std::sort(sorted.begin(), sorted.end());
  double alpha = 1.0 - cfg.level;
  out.ci_lower = detail::quantile_sorted(sorted, alpha / 2.0);
  out.ci_upper = detail::quantile_sorted(sorted, 1.0 - alpha / 2.0);
  return out;
}

} // namespace sgw
