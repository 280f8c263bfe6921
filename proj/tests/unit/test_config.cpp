#include <catch2/catch_amalgamated.hpp>

#include "sgw/config.hpp"

TEST_CASE("analysis config parsing", "[config]") {
  std::string text =
      "# demo\n"
      "data = demo.csv\n"
      "outcome = y\n"
      "treatment = z\n"
      "covariates = x1, x2, x3\n"
      "subgroups = g1, g2\n"
      "tilting = ipw\n"
      "ps_model = logistic-main\n"
      "seed = 42\n"
      "bootstrap_B = 500\n"
      "cv_folds = 5\n";
  auto cfg = sgw::parse_analysis_config_text(text);
  CHECK(cfg.data == "demo.csv");
  CHECK(cfg.covariates.size() == 3);
  CHECK(cfg.subgroups.size() == 2);
  CHECK(cfg.tilting == sgw::Tilting::IPW);
  CHECK(cfg.ps_model == sgw::PsModel::LogisticMain);
  CHECK(cfg.seed == 42);
  CHECK(cfg.seed_set);
  CHECK(cfg.bootstrap_B == 500);
  CHECK(cfg.cv_folds == 5);
}

TEST_CASE("analysis config rejects bad values", "[config]") {
  std::string base = "outcome = y\ntreatment = z\ncovariates = x\n";
  CHECK_THROWS_AS(sgw::parse_analysis_config_text(base + "tilting = owl\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_analysis_config_text(base + "ps_model = forest\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_analysis_config_text(base + "unknown_key = 1\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_analysis_config_text(base + "cv_folds = 1\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_analysis_config_text(base + "ps_model = external\n"),
                  sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_analysis_config_text("treatment = z\ncovariates = x\n"),
                  sgw::ConfigError);
  // A config without a seed parses; the seed is demanded at run time.
  auto cfg = sgw::parse_analysis_config_text(base);
  CHECK_FALSE(cfg.seed_set);
  CHECK_THROWS_AS(cfg.require_seed(), sgw::ConfigError);
}

TEST_CASE("scenario grid expands the cross product", "[config]") {
  std::string text =
      "P = 18\n"
      "psi = 0.25, 0.75\n"
      "gamma = 1, 1.5\n"
      "kappa = 0.75\n"
      "beta_sz = 0/0, 0.5/0.5\n"
      "n_replicates = 3\n"
      "seed = 9\n"
      "methods = post-lasso+ow, logistic-main+ipw\n";
  auto grid = sgw::parse_scenario_grid_text(text);
  CHECK(grid.points.size() == 8);
  CHECK(grid.methods.size() == 2);
  CHECK(grid.methods[0].ps == sgw::PsSource::PostLasso);
  CHECK(grid.methods[0].tilt == sgw::Tilting::OW);
  CHECK(grid.methods[1].label() == "logistic-main+ipw");
  for (const auto& p : grid.points) {
    CHECK(p.seed == 9);
    CHECK(p.n_replicates == 3);
  }
}

TEST_CASE("scenario grid rejects malformed entries", "[config]") {
  CHECK_THROWS_AS(sgw::parse_scenario_grid_text("P = 17\nseed = 1\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_scenario_grid_text("beta_sz = 0.5\nseed = 1\n"), sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_scenario_grid_text("methods = post-lasso\nseed = 1\n"),
                  sgw::ConfigError);
  CHECK_THROWS_AS(sgw::parse_scenario_grid_text("mc_draws = 10\nseed = 1\n"), sgw::ConfigError);
}
