// sgw: propensity score weighting for causal subgroup analysis.
//
// Subcommands:
//   analyze    run the configured weighting pipeline on a CSV dataset
//   connect-s  render Connect-S balance grids for supplied weights
//   simulate   run the Monte Carlo scenario grid
//   truth      emit the true-estimand table for a scenario grid
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sgw/sgw.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::optional<double> clip;
};

unsigned effective_threads(const GlobalOptions& g) {
  return g.threads == 0 ? sgw::rng::default_threads() : g.threads;
}

void write_out(const fs::path& dir, const std::string& name, const std::string& contents) {
  sgw::csv::write_file((dir / name).string(), contents);
}

nlohmann::json manifest_json(const sgw::RunManifest& manifest) {
  nlohmann::json j;
  j["tool_version"] = sgw::kToolVersion;
  j["command"] = manifest.command;
  j["hash"] = manifest.hash();
  j["seed"] = manifest.seed;
  j["input_hash"] = manifest.input_hash;
  j["flags"] = manifest.flags;
  j["timestamp"] = manifest.timestamp;
  j["config_snapshot"] = manifest.config_snapshot;
  return j;
}

std::vector<std::string> decision_flags(const GlobalOptions& g) {
  std::vector<std::string> flags;
  flags.push_back("threads=" + std::to_string(effective_threads(g)));
  if (g.clip) flags.push_back("clip_propensity=" + sgw::csv::fmt(*g.clip));
  return flags;
}

int cmd_analyze(const GlobalOptions& g, const std::string& data_override) {
  std::string config_text = sgw::detail::read_text_file(g.config);
  sgw::AnalysisConfig cfg = sgw::parse_analysis_config_text(config_text);
  if (!data_override.empty()) cfg.data = data_override;
  if (cfg.data.empty())
    throw sgw::ConfigError("no dataset: set `data` in the config or pass --data");
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.seed_set = true;
  }
  cfg.require_seed();
  if (g.clip) cfg.clip_propensity = g.clip;
  cfg.threads = effective_threads(g);

  sgw::AnalysisDataset ds = sgw::load_csv(cfg.data, cfg);

  sgw::RunManifest manifest;
  manifest.command = "analyze";
  manifest.config_snapshot = config_text;
  manifest.input_hash = sgw::hash_file(cfg.data);
  manifest.seed = cfg.seed;
  manifest.flags = decision_flags(g);
  manifest.flags.push_back("ps_model=" + sgw::to_string(cfg.ps_model));
  manifest.flags.push_back("tilting=" + sgw::to_string(cfg.tilting));
  manifest.timestamp = sgw::RunManifest::now_utc();
  const std::string hash = manifest.hash();

  sgw::AnalysisReport report = sgw::run_pipeline(ds, cfg);
  report.manifest_hash = hash;
  report.unweighted_grid.meta = "manifest=" + hash;
  report.weighted_grid.meta = "manifest=" + hash;

  fs::path out(g.out_dir);
  fs::create_directories(out);
  write_out(out, "effects.csv", sgw::effects_csv(report));
  write_out(out, "effects.json", sgw::report_to_json(report).dump(2) + "\n");
  write_out(out, "weights.csv", sgw::weights_csv(report, ds));
  write_out(out, "connect_s_unweighted.csv", sgw::connect_s_csv(report.unweighted_grid));
  write_out(out, "connect_s_weighted.csv", sgw::connect_s_csv(report.weighted_grid));
  write_out(out, "connect_s_unweighted.svg", sgw::render_svg_string(report.unweighted_grid));
  write_out(out, "connect_s_weighted.svg", sgw::render_svg_string(report.weighted_grid));
  write_out(out, "manifest.json", manifest_json(manifest).dump(2) + "\n");

  for (const auto& warning : report.warnings) std::cerr << "warning: " << warning << "\n";
  std::cout << "analyze: wrote " << report.effects.size() << " cell estimates to " << g.out_dir
            << " (manifest " << hash << ")\n";
  return 0;
}

int cmd_connect_s(const GlobalOptions& g, const std::string& weights_path,
                  const std::string& data_override) {
  std::string config_text = sgw::detail::read_text_file(g.config);
  sgw::AnalysisConfig cfg = sgw::parse_analysis_config_text(config_text);
  if (!data_override.empty()) cfg.data = data_override;
  if (cfg.data.empty())
    throw sgw::ConfigError("no dataset: set `data` in the config or pass --data");

  sgw::AnalysisDataset ds = sgw::load_csv(cfg.data, cfg);

  sgw::csv::Table wt = sgw::csv::read_file(weights_path);
  int wcol = wt.column("weight");
  if (wcol < 0) throw sgw::IngestionError("weights file has no `weight` column");
  if (static_cast<int>(wt.rows.size()) != ds.n())
    throw sgw::IngestionError("weights file has " + std::to_string(wt.rows.size()) +
                              " rows but the dataset has " + std::to_string(ds.n()));
  sgw::WeightSet ws;
  ws.tilting = cfg.tilting;
  ws.source = "supplied";
  ws.w.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i)
    ws.w[i] = sgw::csv::parse_double(wt.rows[i][wcol], "weight", i);

  sgw::RunManifest manifest;
  manifest.command = "connect-s";
  manifest.config_snapshot = config_text;
  manifest.input_hash = sgw::hash_file(cfg.data) + "+" + sgw::hash_file(weights_path);
  manifest.seed = cfg.seed;
  manifest.flags = decision_flags(g);
  manifest.timestamp = sgw::RunManifest::now_utc();
  const std::string hash = manifest.hash();

  auto cells = sgw::enumerate_cells(ds);
  sgw::WeightSet unit;
  unit.w = Eigen::VectorXd::Ones(ds.n());
  unit.tilting = cfg.tilting;
  unit.source = "unit";
  sgw::ConnectSGrid weighted = sgw::build_connect_s(ds, ws, cells);
  sgw::ConnectSGrid unweighted = sgw::build_connect_s(ds, unit, cells);
  weighted.meta = "manifest=" + hash;
  unweighted.meta = "manifest=" + hash;

  fs::path out(g.out_dir);
  fs::create_directories(out);
  write_out(out, "connect_s_weighted.csv", sgw::connect_s_csv(weighted));
  write_out(out, "connect_s_weighted.svg", sgw::render_svg_string(weighted));
  write_out(out, "connect_s_unweighted.csv", sgw::connect_s_csv(unweighted));
  write_out(out, "connect_s_unweighted.svg", sgw::render_svg_string(unweighted));
  write_out(out, "manifest.json", manifest_json(manifest).dump(2) + "\n");
  std::cout << "connect-s: wrote grids (" << weighted.n_rows() << " rows x " << weighted.n_cols()
            << " covariates) to " << g.out_dir << " (manifest " << hash << ")\n";
  return 0;
}

std::string grid_truth_csv(const std::vector<std::pair<std::string, sgw::TrueEstimands>>& truths,
                           const std::string& hash) {
  std::string out = "# manifest=" + hash + "\n";
  out += "scenario,cell,estimand,value,mc_se,mc_draws\n";
  for (const auto& [label, truth] : truths) {
    auto row = [&](const std::string& cell, const std::string& est, const sgw::EstimandValue& v) {
      out += sgw::csv::quote(label) + "," + cell + "," + est + "," + sgw::csv::fmt(v.value) +
             "," + sgw::csv::fmt(v.mc_se) + "," + std::to_string(truth.mc_draws) + "\n";
    };
    row("Overall", "ATE", truth.ate);
    row("Overall", "ATO", truth.ato);
    static const std::array<std::string, 4> labels{"S1=0", "S1=1", "S2=0", "S2=1"};
    for (int c = 0; c < 4; ++c) {
      row(labels[c], "S-ATE", truth.s_ate[c]);
      row(labels[c], "S-ATO", truth.s_ato[c]);
    }
  }
  return out;
}

int cmd_simulate(const GlobalOptions& g, bool truth_only) {
  std::string config_text = sgw::detail::read_text_file(g.config);
  sgw::ScenarioGrid grid = sgw::parse_scenario_grid_text(config_text);
  for (auto& point : grid.points) {
    if (g.seed) {
      point.seed = *g.seed;
      point.seed_set = true;
    }
    if (!point.seed_set)
      throw sgw::ConfigError("no seed configured; set `seed` in the scenario file or pass --seed");
    point.threads = effective_threads(g);
  }

  sgw::RunManifest manifest;
  manifest.command = truth_only ? "truth" : "simulate";
  manifest.config_snapshot = config_text;
  manifest.seed = grid.points.front().seed;
  manifest.flags = decision_flags(g);
  manifest.timestamp = sgw::RunManifest::now_utc();
  const std::string hash = manifest.hash();

  fs::path out(g.out_dir);
  fs::create_directories(out);

  std::vector<std::pair<std::string, sgw::TrueEstimands>> truths;
  if (truth_only) {
    for (const auto& point : grid.points) {
      auto truth = sgw::true_estimands(point, point.mc_draws,
                                       sgw::rng::derive_seed(point.seed, 0x7472757468ULL));
      truths.emplace_back(sgw::scenario_label(point), truth);
    }
    write_out(out, "truth.csv", grid_truth_csv(truths, hash));
    write_out(out, "manifest.json", manifest_json(manifest).dump(2) + "\n");
    std::cout << "truth: wrote estimands for " << truths.size() << " scenario(s) to " << g.out_dir
              << " (manifest " << hash << ")\n";
    return 0;
  }

  std::string metrics = "# manifest=" + hash + "\n" + sgw::metrics_csv_header();
  std::string reps = "# manifest=" + hash + "\n" + sgw::replicates_csv_header();
  int failures = 0;
  for (const auto& point : grid.points) {
    sgw::ScenarioResult result = sgw::run_scenario(point, grid.methods, point.threads);
    sgw::append_metrics_csv(metrics, result);
    sgw::append_replicates_csv(reps, result);
    truths.emplace_back(sgw::scenario_label(point), result.truth);
    failures += result.failed_replicates;
    std::cout << "simulate: finished " << sgw::scenario_label(point) << " ("
              << result.failed_replicates << " replicate failures)\n";
  }
  write_out(out, "metrics.csv", metrics);
  write_out(out, "replicates.csv", reps);
  write_out(out, "truth.csv", grid_truth_csv(truths, hash));
  write_out(out, "manifest.json", manifest_json(manifest).dump(2) + "\n");
  std::cout << "simulate: wrote " << grid.points.size() << " scenario(s) to " << g.out_dir
            << " (manifest " << hash << ")\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"propensity score weighting for causal subgroup analysis"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "config file path")->required();
  app.add_option("--out-dir", g.out_dir, "output directory (default .)");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--threads", g.threads, "worker cap (0 = hardware)");
  app.add_option("--clip-propensity", g.clip, "optional propensity clip epsilon");

  std::string data_override;
  std::string weights_path;
  bool truth_only = false;

  CLI::App* analyze = app.add_subcommand("analyze", "run the weighting pipeline on a dataset");
  analyze->add_option("--data", data_override, "input CSV (overrides the config)");

  CLI::App* connect = app.add_subcommand("connect-s", "balance grids for supplied weights");
  connect->add_option("--weights", weights_path, "per-unit weights CSV")->required();
  connect->add_option("--data", data_override, "input CSV (overrides the config)");

  CLI::App* simulate = app.add_subcommand("simulate", "run the Monte Carlo scenario grid");
  simulate->add_flag("--truth-only", truth_only, "emit true estimands without fitting");

  app.add_subcommand("truth", "emit the true-estimand table for a scenario grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (analyze->parsed()) return cmd_analyze(g, data_override);
    if (connect->parsed()) return cmd_connect_s(g, weights_path, data_override);
    if (simulate->parsed()) return cmd_simulate(g, truth_only);
    return cmd_simulate(g, /*truth_only=*/true);
  } catch (const sgw::ConfigError& e) {
    std::cerr << "error (" << stage << ", config): " << e.what() << "\n";
    return 2;
  } catch (const sgw::IngestionError& e) {
    std::cerr << "error (" << stage << ", data): " << e.what() << "\n";
    return 3;
  } catch (const sgw::CvFoldError& e) {
    std::cerr << "error (" << stage << ", data): " << e.what() << "\n";
    return 3;
  } catch (const sgw::Error& e) {
    std::cerr << "error (" << stage << ", numerical): " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 4;
  }
}
