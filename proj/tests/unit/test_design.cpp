#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sgw/design.hpp"
#include "sgw/sim.hpp"

namespace {

// Two covariates, one binary subgroup variable.
sgw::AnalysisDataset small_dataset() {
  sgw::AnalysisDataset ds;
  const int n = 12;
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  ds.outcome.resize(n);
  ds.treatment.resize(n);
  ds.covariates.resize(n, 2);
  ds.indicators.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.outcome[i] = normal(gen);
    ds.treatment[i] = i % 2;
    ds.covariates(i, 0) = normal(gen);
    ds.covariates(i, 1) = normal(gen);
    double s = (i % 3 == 0) ? 1.0 : 0.0;
    ds.indicators(i, 0) = 1.0 - s;
    ds.indicators(i, 1) = s;
  }
  ds.covariate_names = {"x1", "x2"};
  ds.subgroup_variables = {"g"};
  ds.indicator_labels = {{"g", "0", 0}, {"g", "1", 1}};
  ds.validate();
  return ds;
}

} // namespace

TEST_CASE("design column counts", "[design]") {
  auto ds = small_dataset();
  SECTION("all interactions: K = 1 + 2 + 1 + 2") {
    auto dm = sgw::build_design(ds, sgw::InteractionSelector::all());
    CHECK(dm.k() == 6);
    CHECK(dm.columns[0].kind == sgw::ColumnKind::Intercept);
  }
  SECTION("none: K = 1 + 2 + 1") {
    auto dm = sgw::build_design(ds, sgw::InteractionSelector::none());
    CHECK(dm.k() == 4);
    CHECK(dm.interaction_pairs().empty());
  }
}

TEST_CASE("simulation design with two subgroup variables has K = 57", "[design]") {
  sgw::ScenarioConfig cfg;
  cfg.P = 18;
  cfg.N = 200;
  auto data = sgw::generate_dataset(cfg, 11);
  auto dm = sgw::build_design(data.ds, sgw::InteractionSelector::all());
  CHECK(dm.k() == 1 + 18 + 2 + 36);
}

TEST_CASE("penalty factors and interaction reconstruction", "[design]") {
  auto ds = small_dataset();
  auto dm = sgw::build_design(ds, sgw::InteractionSelector::all());
  for (int j = 0; j < dm.k(); ++j) {
    const auto& col = dm.columns[j];
    if (col.kind == sgw::ColumnKind::Interaction) {
      CHECK(col.penalty_factor == 1.0);
      // interaction column == covariate main * indicator, elementwise
      Eigen::VectorXd expect =
          ds.covariates.col(col.covariate).cwiseProduct(ds.indicators.col(col.indicator));
      CHECK((dm.X.col(j) - expect).lpNorm<Eigen::Infinity>() == 0.0);
    } else {
      CHECK(col.penalty_factor == 0.0);
    }
  }
  CHECK(dm.penalized_columns().size() == 2);
}

TEST_CASE("explicit selector validates pairs", "[design]") {
  auto ds = small_dataset();
  auto ok = sgw::build_design(ds, sgw::InteractionSelector::explicit_pairs({{0, 1}}));
  CHECK(ok.k() == 5);
  // Indicator 0 is the reference level, covariate 7 does not exist.
  CHECK_THROWS_AS(sgw::build_design(ds, sgw::InteractionSelector::explicit_pairs({{0, 0}})),
                  sgw::ConfigError);
  CHECK_THROWS_AS(sgw::build_design(ds, sgw::InteractionSelector::explicit_pairs({{7, 1}})),
                  sgw::ConfigError);
}

TEST_CASE("reduce_design keeps mains and the listed interactions", "[design]") {
  auto ds = small_dataset();
  auto full = sgw::build_design(ds, sgw::InteractionSelector::all());
  auto reduced = sgw::reduce_design(full, {{1, 1}});
  CHECK(reduced.k() == 5);
  CHECK(reduced.columns.back().kind == sgw::ColumnKind::Interaction);
  CHECK(reduced.columns.back().covariate == 1);
  auto none = sgw::reduce_design(full, {});
  CHECK(none.k() == 4);
}
