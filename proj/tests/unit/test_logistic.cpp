#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sgw/logistic.hpp"

namespace {

sgw::DesignMatrix intercept_only(int n) {
  sgw::DesignMatrix dm;
  dm.X = Eigen::MatrixXd::Ones(n, 1);
  dm.columns.push_back({sgw::ColumnKind::Intercept, -1, -1, "(intercept)", 0.0});
  return dm;
}

sgw::DesignMatrix with_covariate(const Eigen::VectorXd& x) {
  sgw::DesignMatrix dm;
  dm.X.resize(x.size(), 2);
  dm.X.col(0).setOnes();
  dm.X.col(1) = x;
  dm.columns.push_back({sgw::ColumnKind::Intercept, -1, -1, "(intercept)", 0.0});
  dm.columns.push_back({sgw::ColumnKind::CovariateMain, 0, -1, "x", 0.0});
  return dm;
}

} // namespace

TEST_CASE("intercept-only MLE is logit of the treated share", "[logistic]") {
  auto dm = intercept_only(4);
  Eigen::VectorXi Z(4);
  Z << 1, 1, 1, 0;
  auto fit = sgw::fit_logistic_irls(dm, Z);
  REQUIRE(fit.converged);
  CHECK_THAT(fit.coef[0], Catch::Matchers::WithinAbs(std::log(3.0), 1e-9));
  for (int i = 0; i < 4; ++i) CHECK_THAT(fit.propensity[i], Catch::Matchers::WithinAbs(0.75, 1e-10));
  CHECK(fit.max_score_residual <= 1e-8);
}

TEST_CASE("mirrored covariate data gives a zero coefficient", "[logistic]") {
  // Every (x, z) row is paired with (-x, z): the likelihood is symmetric
  // under a sign flip of the covariate.
  Eigen::VectorXd x(8);
  Eigen::VectorXi Z(8);
  x << 0.7, -0.7, 1.9, -1.9, 0.4, -0.4, 1.1, -1.1;
  Z << 1, 1, 1, 1, 0, 0, 1, 1;
  auto fit = sgw::fit_logistic_irls(with_covariate(x), Z);
  REQUIRE(fit.converged);
  CHECK_THAT(fit.coef[1], Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("single-class treatment raises SeparationError", "[logistic]") {
  auto dm = intercept_only(4);
  Eigen::VectorXi Z(4);
  Z << 1, 1, 1, 1;
  CHECK_THROWS_AS(sgw::fit_logistic_irls(dm, Z), sgw::SeparationError);
}

TEST_CASE("separated covariate raises SeparationError", "[logistic]") {
  Eigen::VectorXd x(6);
  Eigen::VectorXi Z(6);
  x << -2.0, -1.5, -1.0, 1.0, 1.5, 2.0;
  Z << 0, 0, 0, 1, 1, 1;  // perfectly separated at x = 0
  CHECK_THROWS_AS(sgw::fit_logistic_irls(with_covariate(x), Z), sgw::SeparationError);
}

TEST_CASE("duplicate column raises RankError", "[logistic]") {
  sgw::DesignMatrix dm;
  dm.X.resize(6, 2);
  dm.X.col(0).setOnes();
  dm.X.col(1).setOnes();
  dm.columns.push_back({sgw::ColumnKind::Intercept, -1, -1, "(intercept)", 0.0});
  dm.columns.push_back({sgw::ColumnKind::CovariateMain, 0, -1, "dup", 0.0});
  Eigen::VectorXi Z(6);
  Z << 1, 0, 1, 0, 1, 0;
  CHECK_THROWS_AS(sgw::fit_logistic_irls(dm, Z), sgw::RankError);
}

TEST_CASE("score equations hold at convergence on random instances", "[logistic]") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    int n = 60;
    sgw::DesignMatrix dm;
    dm.X.resize(n, 3);
    dm.X.col(0).setOnes();
    dm.columns.push_back({sgw::ColumnKind::Intercept, -1, -1, "(intercept)", 0.0});
    for (int j = 1; j < 3; ++j) {
      for (int i = 0; i < n; ++i) dm.X(i, j) = normal(gen);
      dm.columns.push_back({sgw::ColumnKind::CovariateMain, j - 1, -1, "x" + std::to_string(j), 0.0});
    }
    Eigen::VectorXi Z(n);
    for (int i = 0; i < n; ++i) {
      double eta = 0.3 + 0.5 * dm.X(i, 1) - 0.4 * dm.X(i, 2);
      double e = 1.0 / (1.0 + std::exp(-eta));
      std::bernoulli_distribution bern(e);
      Z[i] = bern(gen) ? 1 : 0;
    }
    auto fit = sgw::fit_logistic_irls(dm, Z);
    REQUIRE(fit.converged);
    CHECK(fit.max_score_residual <= 1e-8);
    Eigen::VectorXd score = dm.X.transpose() * (Z.cast<double>() - fit.propensity);
    CHECK(score.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("predict_propensity", "[logistic]") {
  auto dm = intercept_only(3);
  Eigen::VectorXi Z(3);
  Z << 1, 0, 1;

  SECTION("all-zero coefficients give 0.5") {
    sgw::LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(1);
    fit.column_names = dm.column_names();
    auto pred = sgw::predict_propensity(fit, dm);
    for (int i = 0; i < 3; ++i) CHECK(pred.e[i] == 0.5);
    CHECK(pred.clamped == 0);
  }
  SECTION("logit(0.75) intercept reproduces 0.75") {
    sgw::LogisticFit fit;
    fit.coef = Eigen::VectorXd::Constant(1, std::log(3.0));
    fit.column_names = dm.column_names();
    auto pred = sgw::predict_propensity(fit, dm);
    CHECK_THAT(pred.e[0], Catch::Matchers::WithinAbs(0.75, 1e-12));
  }
  SECTION("linear predictor 40 is clamped and counted") {
    sgw::LogisticFit fit;
    fit.coef = Eigen::VectorXd::Constant(1, 40.0);
    fit.column_names = dm.column_names();
    auto pred = sgw::predict_propensity(fit, dm);
    CHECK(pred.clamped == 3);
    for (int i = 0; i < 3; ++i) CHECK(pred.e[i] < 1.0);
  }
  SECTION("column mismatch is an error") {
    sgw::LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(1);
    fit.column_names = {"something-else"};
    CHECK_THROWS_AS(sgw::predict_propensity(fit, dm), sgw::ConfigError);
  }
}
