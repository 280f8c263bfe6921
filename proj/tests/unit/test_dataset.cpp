#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>

#include "sgw/dataset.hpp"

namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
  std::string path = std::string("sgw_test_") + name;
  std::ofstream out(path, std::ios::binary);
  out << contents;
  return path;
}

sgw::AnalysisConfig basic_config() {
  sgw::AnalysisConfig cfg;
  cfg.outcome = "y";
  cfg.treatment = "z";
  cfg.covariates = {"x1"};
  cfg.subgroups = {"sg"};
  return cfg;
}

} // namespace

TEST_CASE("load_csv expands subgroup levels", "[dataset]") {
  auto path = write_temp("basic.csv",
                         "y,z,x1,sg\n"
                         "1.5,1,0.2,a\n"
                         "2.5,0,-0.3,b\n"
                         "0.5,1,1.1,a\n"
                         "1.0,0,0.4,b\n");
  auto ds = sgw::load_csv(path, basic_config());
  CHECK(ds.n() == 4);
  CHECK(ds.n_covariates() == 1);
  CHECK(ds.n_indicators() == 2);
  CHECK(ds.indicator_labels[0].name() == "sg=a");
  CHECK(ds.indicator_labels[1].name() == "sg=b");
  CHECK(ds.indicators.col(0).sum() == 2.0);
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects bad inputs", "[dataset]") {
  SECTION("non-binary treatment") {
    auto path = write_temp("badz.csv", "y,z,x1,sg\n1,2,0.5,a\n1,0,0.25,b\n");
    CHECK_THROWS_WITH(sgw::load_csv(path, basic_config()),
                      Catch::Matchers::ContainsSubstring("treatment must be binary 0/1"));
    std::remove(path.c_str());
  }
  SECTION("missing column") {
    auto path = write_temp("nocol.csv", "y,z,sg\n1,1,a\n2,0,b\n");
    CHECK_THROWS_WITH(sgw::load_csv(path, basic_config()),
                      Catch::Matchers::ContainsSubstring("missing column 'x1'"));
    std::remove(path.c_str());
  }
  SECTION("missing cell") {
    auto path = write_temp("miss.csv", "y,z,x1,sg\n1,1,,a\n2,0,0.5,b\n");
    CHECK_THROWS_AS(sgw::load_csv(path, basic_config()), sgw::IngestionError);
    std::remove(path.c_str());
  }
  SECTION("constant covariate") {
    auto path = write_temp("const.csv", "y,z,x1,sg\n1,1,3,a\n2,0,3,b\n1,1,3,a\n");
    CHECK_THROWS_WITH(sgw::load_csv(path, basic_config()),
                      Catch::Matchers::ContainsSubstring("constant"));
    std::remove(path.c_str());
  }
  SECTION("single treatment class") {
    auto path = write_temp("onez.csv", "y,z,x1,sg\n1,1,1,a\n2,1,0.5,b\n");
    CHECK_THROWS_AS(sgw::load_csv(path, basic_config()), sgw::IngestionError);
    std::remove(path.c_str());
  }
}

TEST_CASE("COMPARE-UF-shaped schema expands to R=35, P=20", "[dataset]") {
  // 16 subgroup variables totaling 35 levels, 20 covariates.
  std::vector<int> levels_per_var = {2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3};
  int total_levels = 0;
  for (int l : levels_per_var) total_levels += l;
  REQUIRE(total_levels == 35);

  sgw::AnalysisConfig cfg;
  cfg.outcome = "y";
  cfg.treatment = "z";
  for (int p = 0; p < 20; ++p) cfg.covariates.push_back("x" + std::to_string(p));
  for (std::size_t v = 0; v < levels_per_var.size(); ++v)
    cfg.subgroups.push_back("g" + std::to_string(v));

  std::string header = "y,z";
  for (const auto& c : cfg.covariates) header += "," + c;
  for (const auto& s : cfg.subgroups) header += "," + s;
  std::string body;
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 120; ++i) {
    body += std::to_string(normal(gen)) + "," + std::to_string(i % 2);
    for (int p = 0; p < 20; ++p) body += "," + std::to_string(normal(gen));
    for (std::size_t v = 0; v < levels_per_var.size(); ++v)
      body += ",L" + std::to_string(i % levels_per_var[v]);
    body += "\n";
  }
  auto path = write_temp("uf.csv", header + "\n" + body);
  auto ds = sgw::load_csv(path, cfg);
  CHECK(ds.n_covariates() == 20);
  CHECK(ds.n_indicators() == 35);
  std::remove(path.c_str());
}

TEST_CASE("enumerate_cells partitions each variable and appends Overall", "[dataset]") {
  auto path = write_temp("cells.csv",
                         "y,z,x1,age,race\n"
                         "1,1,0.1,young,a\n"
                         "2,0,0.2,mid,b\n"
                         "3,1,0.3,old,a\n"
                         "4,0,0.4,young,b\n"
                         "5,1,0.5,mid,a\n"
                         "6,0,0.6,old,b\n");
  sgw::AnalysisConfig cfg = basic_config();
  cfg.subgroups = {"age", "race"};
  auto ds = sgw::load_csv(path, cfg);
  auto cells = sgw::enumerate_cells(ds);
  REQUIRE(cells.size() == 6);  // 3 + 2 levels + Overall
  CHECK(cells.back().is_overall());
  CHECK(cells.back().n_members == 6);

  // Cell member sets of one variable are disjoint and cover all units.
  std::vector<int> seen(ds.n(), 0);
  for (const auto& cell : cells) {
    if (cell.variable != "age") continue;
    for (int i : cell.members) seen[i]++;
  }
  for (int count : seen) CHECK(count == 1);

  for (const auto& cell : cells)
    CHECK(cell.n_members == cell.n_treated + cell.n_control);
  std::remove(path.c_str());
}

TEST_CASE("empty level is retained as a degenerate cell", "[dataset]") {
  sgw::AnalysisDataset ds;
  ds.outcome = Eigen::VectorXd::LinSpaced(4, 0.0, 3.0);
  ds.treatment.resize(4);
  ds.treatment << 1, 0, 1, 0;
  ds.covariates = Eigen::MatrixXd::Random(4, 1);
  ds.covariate_names = {"x1"};
  ds.subgroup_variables = {"g"};
  ds.indicator_labels = {{"g", "a", 0}, {"g", "b", 1}, {"g", "c", 2}};
  ds.indicators = Eigen::MatrixXd::Zero(4, 3);
  ds.indicators.col(0) << 1, 1, 0, 0;
  ds.indicators.col(1) << 0, 0, 1, 1;  // level c never observed
  ds.validate();

  auto cells = sgw::enumerate_cells(ds);
  REQUIRE(cells.size() == 4);
  CHECK(cells[2].level == "c");
  CHECK(cells[2].n_members == 0);
  CHECK(cells[2].degenerate);
}
