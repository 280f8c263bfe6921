#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgw/errors.hpp"

namespace sgw {

enum class Tilting { IPW, OW };
enum class PsModel { LogisticMain, Lasso, PostLasso, External };
enum class PsSource { TrueModel, LogisticMain, Lasso, PostLasso, External };
enum class VarianceMethod { Sandwich, Bootstrap };

inline std::string to_string(Tilting t) { return t == Tilting::IPW ? "ipw" : "ow"; }

inline std::string to_string(PsModel m) {
  switch (m) {
    case PsModel::LogisticMain: return "logistic-main";
    case PsModel::Lasso: return "lasso";
    case PsModel::PostLasso: return "post-lasso";
    case PsModel::External: return "external";
  }
  return "?";
}

inline std::string to_string(PsSource s) {
  switch (s) {
    case PsSource::TrueModel: return "true-model";
    case PsSource::LogisticMain: return "logistic-main";
    case PsSource::Lasso: return "lasso";
    case PsSource::PostLasso: return "post-lasso";
    case PsSource::External: return "external";
  }
  return "?";
}

inline std::string to_string(VarianceMethod v) {
  return v == VarianceMethod::Sandwich ? "sandwich" : "bootstrap";
}

/// A propensity source paired with a tilting function, e.g. "post-lasso+ow".
struct MethodSpec {
  PsSource ps = PsSource::PostLasso;
  Tilting tilt = Tilting::OW;

  std::string label() const { return to_string(ps) + "+" + to_string(tilt); }
};

/// Settings for one `analyze` run. Parsed from a key = value text file.
struct AnalysisConfig {
  std::string data;  // input CSV path
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  std::vector<std::string> subgroups;
  Tilting tilting = Tilting::OW;
  PsModel ps_model = PsModel::PostLasso;
  VarianceMethod variance = VarianceMethod::Sandwich;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int bootstrap_B = 1000;
  int cv_folds = 10;
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  std::string external_ps_column;
  std::optional<double> clip_propensity;
  unsigned threads = 0;  // 0 = hardware default

  void require_seed() const {
    if (!seed_set)
      throw ConfigError("no seed configured; set `seed` in the config or pass --seed");
  }
};

/// One point of the simulation design. `beta_s1z`/`beta_s2z` are the
/// subgroup-by-treatment outcome interactions.
struct ScenarioConfig {
  int N = 3000;
  int P = 18;
  double psi = 0.25;
  double gamma = 1.0;
  double kappa = 0.5;
  double beta_s1z = 0.0;
  double beta_s2z = 0.0;
  int n_replicates = 100;
  std::uint64_t seed = 0;
  bool seed_set = false;
  long mc_draws = 1000000;
  int cv_folds = 10;
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  unsigned threads = 0;
};

/// A factorial grid of scenarios plus the methods to run on each point.
struct ScenarioGrid {
  std::vector<ScenarioConfig> points;
  std::vector<MethodSpec> methods;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// key = value lines, '#' comments. Duplicate keys are an error.
inline std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not `key = value`: " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    if (kv.count(key))
      throw ConfigError("duplicate config key: " + key);
    kv[key] = value;
  }
  return kv;
}

inline double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got: " + v);
  }
}

inline long to_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got: " + v);
  }
}

inline std::uint64_t to_seed(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    std::uint64_t d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got: " + v);
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

} // namespace detail

inline Tilting parse_tilting(const std::string& v) {
  if (v == "ipw") return Tilting::IPW;
  if (v == "ow") return Tilting::OW;
  throw ConfigError("tilting must be `ipw` or `ow`, got: " + v);
}

inline PsModel parse_ps_model(const std::string& v) {
  if (v == "logistic-main") return PsModel::LogisticMain;
  if (v == "lasso") return PsModel::Lasso;
  if (v == "post-lasso") return PsModel::PostLasso;
  if (v == "external") return PsModel::External;
  throw ConfigError("ps_model must be logistic-main|lasso|post-lasso|external, got: " + v);
}

inline PsSource parse_ps_source(const std::string& v) {
  if (v == "true-model") return PsSource::TrueModel;
  if (v == "logistic-main") return PsSource::LogisticMain;
  if (v == "lasso") return PsSource::Lasso;
  if (v == "post-lasso") return PsSource::PostLasso;
  if (v == "external") return PsSource::External;
  throw ConfigError("unknown propensity source: " + v);
}

inline MethodSpec parse_method(const std::string& v) {
  std::size_t plus = v.rfind('+');
  if (plus == std::string::npos)
    throw ConfigError("method must look like `post-lasso+ow`, got: " + v);
  MethodSpec m;
  m.ps = parse_ps_source(detail::trim(v.substr(0, plus)));
  m.tilt = parse_tilting(detail::trim(v.substr(plus + 1)));
  return m;
}

inline AnalysisConfig parse_analysis_config_text(const std::string& text) {
  auto kv = detail::parse_kv(text);
  AnalysisConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "data") cfg.data = value;
    else if (key == "outcome") cfg.outcome = value;
    else if (key == "treatment") cfg.treatment = value;
    else if (key == "covariates") cfg.covariates = detail::split_list(value);
    else if (key == "subgroups") cfg.subgroups = detail::split_list(value);
    else if (key == "tilting") cfg.tilting = parse_tilting(value);
    else if (key == "ps_model") cfg.ps_model = parse_ps_model(value);
    else if (key == "variance") {
      if (value == "sandwich") cfg.variance = VarianceMethod::Sandwich;
      else if (value == "bootstrap") cfg.variance = VarianceMethod::Bootstrap;
      else throw ConfigError("variance must be `sandwich` or `bootstrap`, got: " + value);
    } else if (key == "seed") {
      cfg.seed = detail::to_seed(value, key);
      cfg.seed_set = true;
    } else if (key == "bootstrap_B") cfg.bootstrap_B = static_cast<int>(detail::to_long(value, key));
    else if (key == "cv_folds") cfg.cv_folds = static_cast<int>(detail::to_long(value, key));
    else if (key == "n_lambda") cfg.n_lambda = static_cast<int>(detail::to_long(value, key));
    else if (key == "lambda_ratio") cfg.lambda_ratio = detail::to_double(value, key);
    else if (key == "external_ps_column") cfg.external_ps_column = value;
    else if (key == "clip_propensity") cfg.clip_propensity = detail::to_double(value, key);
    else throw ConfigError("unknown config key: " + key);
  }
  if (cfg.outcome.empty()) throw ConfigError("config is missing `outcome`");
  if (cfg.treatment.empty()) throw ConfigError("config is missing `treatment`");
  if (cfg.covariates.empty()) throw ConfigError("config is missing `covariates`");
  if (cfg.ps_model == PsModel::External && cfg.external_ps_column.empty())
    throw ConfigError("ps_model = external requires `external_ps_column`");
  if (cfg.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (cfg.bootstrap_B < 100) throw ConfigError("bootstrap_B must be >= 100");
  if (cfg.clip_propensity && (*cfg.clip_propensity <= 0.0 || *cfg.clip_propensity >= 0.5))
    throw ConfigError("clip_propensity must lie in (0, 0.5)");
  return cfg;
}

inline AnalysisConfig parse_analysis_config(const std::string& path) {
  return parse_analysis_config_text(detail::read_text_file(path));
}

/// Scenario files accept comma-separated lists for N, P, psi, gamma, kappa
/// and beta_sz (pairs written `a/b`); the grid is their cross product.
inline ScenarioGrid parse_scenario_grid_text(const std::string& text) {
  auto kv = detail::parse_kv(text);
  ScenarioConfig base;
  std::vector<long> Ns{base.N}, Ps{base.P};
  std::vector<double> psis{base.psi}, gammas{base.gamma}, kappas{base.kappa};
  std::vector<std::pair<double, double>> beta_szs{{base.beta_s1z, base.beta_s2z}};
  ScenarioGrid grid;
  grid.methods = {MethodSpec{PsSource::PostLasso, Tilting::OW}};

  for (const auto& [key, value] : kv) {
    if (key == "N") {
      Ns.clear();
      for (const auto& v : detail::split_list(value)) Ns.push_back(detail::to_long(v, key));
    } else if (key == "P") {
      Ps.clear();
      for (const auto& v : detail::split_list(value)) Ps.push_back(detail::to_long(v, key));
    } else if (key == "psi") {
      psis.clear();
      for (const auto& v : detail::split_list(value)) psis.push_back(detail::to_double(v, key));
    } else if (key == "gamma") {
      gammas.clear();
      for (const auto& v : detail::split_list(value)) gammas.push_back(detail::to_double(v, key));
    } else if (key == "kappa") {
      kappas.clear();
      for (const auto& v : detail::split_list(value)) kappas.push_back(detail::to_double(v, key));
    } else if (key == "beta_sz") {
      beta_szs.clear();
      for (const auto& v : detail::split_list(value)) {
        std::size_t slash = v.find('/');
        if (slash == std::string::npos)
          throw ConfigError("beta_sz entries are written `b1/b2`, got: " + v);
        beta_szs.emplace_back(detail::to_double(detail::trim(v.substr(0, slash)), key),
                              detail::to_double(detail::trim(v.substr(slash + 1)), key));
      }
    } else if (key == "n_replicates") base.n_replicates = static_cast<int>(detail::to_long(value, key));
    else if (key == "seed") {
      base.seed = detail::to_seed(value, key);
      base.seed_set = true;
    } else if (key == "mc_draws") base.mc_draws = detail::to_long(value, key);
    else if (key == "cv_folds") base.cv_folds = static_cast<int>(detail::to_long(value, key));
    else if (key == "n_lambda") base.n_lambda = static_cast<int>(detail::to_long(value, key));
    else if (key == "lambda_ratio") base.lambda_ratio = detail::to_double(value, key);
    else if (key == "methods") {
      grid.methods.clear();
      for (const auto& v : detail::split_list(value)) grid.methods.push_back(parse_method(v));
    } else throw ConfigError("unknown scenario key: " + key);
  }

  if (base.n_replicates < 1) throw ConfigError("n_replicates must be >= 1");
  if (base.mc_draws < 100000) throw ConfigError("mc_draws must be >= 100000");
  if (grid.methods.empty()) throw ConfigError("methods list is empty");

  for (long N : Ns)
    for (long P : Ps)
      for (double psi : psis)
        for (double gamma : gammas)
          for (double kappa : kappas)
            for (auto [b1, b2] : beta_szs) {
              ScenarioConfig cfg = base;
              cfg.N = static_cast<int>(N);
              cfg.P = static_cast<int>(P);
              if (cfg.N < 10) throw ConfigError("N must be >= 10");
              if (cfg.P < 2 || cfg.P % 2 != 0) throw ConfigError("P must be even and >= 2");
              cfg.psi = psi;
              cfg.gamma = gamma;
              cfg.kappa = kappa;
              cfg.beta_s1z = b1;
              cfg.beta_s2z = b2;
              grid.points.push_back(cfg);
            }
  return grid;
}

inline ScenarioGrid parse_scenario_grid(const std::string& path) {
  return parse_scenario_grid_text(detail::read_text_file(path));
}

} // namespace sgw
