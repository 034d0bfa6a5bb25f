#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "htbnp/priors.hpp"
#include "htbnp/sequence_models.hpp"

namespace htbnp {

using nlohmann::json;

/// Configuration problems carry the offending field path; mapped to exit
/// code 2 by the CLI.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ExperimentKind {
  fig1_posterior_means,
  inverse_regression,
  dj94_denoise,
  density_estimation,
  classification,
  rate_sweep,
  prior_mass,
  theory_suite
};

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_names() {
  static const std::vector<std::pair<std::string, ExperimentKind>> names = {
      {"fig1_posterior_means", ExperimentKind::fig1_posterior_means},
      {"inverse_regression", ExperimentKind::inverse_regression},
      {"dj94_denoise", ExperimentKind::dj94_denoise},
      {"density_estimation", ExperimentKind::density_estimation},
      {"classification", ExperimentKind::classification},
      {"rate_sweep", ExperimentKind::rate_sweep},
      {"prior_mass", ExperimentKind::prior_mass},
      {"theory_suite", ExperimentKind::theory_suite}};
  return names;
}

inline ExperimentKind experiment_from_string(const std::string& s) {
  for (auto& [name, kind] : experiment_names())
    if (name == s) return kind;
  throw ConfigError("config.experiment: unknown experiment '" + s + "'");
}

inline std::string experiment_to_string(ExperimentKind k) {
  for (auto& [name, kind] : experiment_names())
    if (kind == k) return name;
  return "?";
}

/// One prior entry of a config: either a series prior (scale + tail) or the
/// hierarchical Gaussian handled by the Metropolis-within-Gibbs sampler.
struct PriorConfig {
  std::string label;
  bool hierarchical = false;
  bool sample_tau = false;
  std::string scale_kind = "ot";  // ot | ht | gaussian
  double a = 1.0;
  double delta = 0.5;
  double alpha = 5.0;
  std::string tail_kind = "cauchy";  // student_t | cauchy | gaussian | laplace
  double nu = 3.0;
  int truncation = 200;

  ScaleSpec scale(IndexLayout layout) const {
    if (scale_kind == "ot") return ScaleSpec::ot(a, delta, layout);
    if (scale_kind == "ht") return ScaleSpec::ht(alpha, layout);
    if (scale_kind == "gaussian") return ScaleSpec::gaussian_scale(alpha, layout);
    throw ConfigError("prior.scale.kind: unknown '" + scale_kind + "'");
  }
  TailDensity tail() const {
    if (tail_kind == "student_t") return TailDensity::student_t(nu);
    if (tail_kind == "cauchy") return TailDensity::cauchy();
    if (tail_kind == "gaussian") return TailDensity::gaussian();
    if (tail_kind == "laplace") return TailDensity::laplace();
    throw ConfigError("prior.tail.kind: unknown '" + tail_kind + "'");
  }
  PriorSpec build(IndexLayout layout) const { return PriorSpec(scale(layout), tail(), truncation); }
};

struct SamplerSection {
  std::string algorithm = "whitened_pcn";  // pcn | whitened_pcn | whitened_mala | mwg
  double beta = 0.05;
  int n_draws = 5000;
  int burn_in = 2000;
  int thin = 10;
  bool adapt = true;
  std::string parametrization = "noncentered";  // mwg only
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::theory_suite;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool paper_scale = false;
  int threads = 0;
  bool emit_plots = true;
  bool emit_draws = false;  // write the full thinned draw archive CSVs

  std::vector<PriorConfig> priors;
  std::vector<double> n_grid;
  std::vector<double> rho_grid = {1.0};
  SamplerSection sampler;

  // fig1
  std::vector<double> sigma_grid = {1e-2, 1e-3, 1e-4, 1e-5};
  double fig1_n = 1e7;
  double fig1_x_max = 0.01;
  int fig1_x_points = 81;

  // rate_sweep
  int rate_seeds = 20;
  bool rate_volterra = false;

  // inverse problems: use the pi/(k-1/2) eigenvalue variant instead of the
  // operator's singular values 1/((k-1/2) pi), for side-by-side comparison
  bool volterra_printed_eigenvalues = false;

  // prior_mass
  double prior_mass_d1 = 3.0;
  long prior_mass_mc = 20000;

  // dj94
  std::vector<Dj94Signal> dj94_signals = {Dj94Signal::blocks, Dj94Signal::bumps,
                                          Dj94Signal::heavisine, Dj94Signal::doppler};

  json echo;  // the fully-resolved configuration for the manifest
};

namespace detail {

inline double require_positive(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": must be a number");
  const double v = j.get<double>();
  if (!(v > 0.0)) throw ConfigError(path + ": must be positive");
  return v;
}

inline PriorConfig parse_prior(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": must be an object");
  PriorConfig p;
  p.label = j.value("label", "");
  p.hierarchical = j.value("hierarchical", false);
  p.sample_tau = j.value("sample_tau", false);
  p.truncation = j.value("truncation", 200);
  if (p.truncation < 1) throw ConfigError(path + ".truncation: must be >= 1");
  if (p.hierarchical) {
    if (p.label.empty()) p.label = "gaussian_hierarchical";
    return p;
  }
  if (!j.contains("scale")) throw ConfigError(path + ".scale: required for series priors");
  const json& s = j.at("scale");
  p.scale_kind = s.value("kind", "ot");
  if (s.contains("a")) p.a = require_positive(s.at("a"), path + ".scale.a");
  if (s.contains("delta")) p.delta = require_positive(s.at("delta"), path + ".scale.delta");
  if (s.contains("alpha")) p.alpha = require_positive(s.at("alpha"), path + ".scale.alpha");
  if (!j.contains("tail")) throw ConfigError(path + ".tail: required for series priors");
  const json& t = j.at("tail");
  p.tail_kind = t.value("kind", "cauchy");
  if (t.contains("nu")) p.nu = require_positive(t.at("nu"), path + ".tail.nu");
  if (p.label.empty()) p.label = p.scale_kind + "_" + p.tail_kind;
  p.scale(IndexLayout::single);  // validates the kind
  p.tail();
  return p;
}

inline std::vector<double> parse_grid(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + ": must be a nonempty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(require_positive(j.at(i), path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

/// Parse and validate a configuration tree. Unknown experiment names, bad
/// grids and malformed priors are reported with their field paths.
inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (!j.contains("experiment")) throw ConfigError("config.experiment: required");
  ExperimentConfig cfg;
  cfg.experiment = experiment_from_string(j.at("experiment").get<std::string>());
  cfg.seed = j.value("seed", 1ULL);
  cfg.output_dir = j.value("output_dir", std::string("out/") + experiment_to_string(cfg.experiment));
  cfg.paper_scale = j.value("paper_scale", false);
  cfg.threads = j.value("threads", 0);
  cfg.emit_plots = j.value("emit_plots", true);
  cfg.emit_draws = j.value("emit_draws", false);

  if (j.contains("priors")) {
    const json& ps = j.at("priors");
    if (!ps.is_array() || ps.empty()) throw ConfigError("config.priors: must be a nonempty array");
    for (std::size_t i = 0; i < ps.size(); ++i)
      cfg.priors.push_back(detail::parse_prior(ps.at(i), "config.priors[" + std::to_string(i) + "]"));
  }
  if (j.contains("prior"))
    cfg.priors.push_back(detail::parse_prior(j.at("prior"), "config.prior"));

  if (j.contains("n_grid")) cfg.n_grid = detail::parse_grid(j.at("n_grid"), "config.n_grid");
  else if (j.contains("n")) cfg.n_grid = {detail::require_positive(j.at("n"), "config.n")};
  if (j.contains("rho_grid")) cfg.rho_grid = detail::parse_grid(j.at("rho_grid"), "config.rho_grid");
  else if (j.contains("rho")) cfg.rho_grid = {detail::require_positive(j.at("rho"), "config.rho")};
  for (double rho : cfg.rho_grid)
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("config.rho_grid: values must lie in (0,1]");

  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    cfg.sampler.algorithm = s.value("algorithm", cfg.sampler.algorithm);
    if (s.contains("beta"))
      cfg.sampler.beta = detail::require_positive(s.at("beta"), "config.sampler.beta");
    cfg.sampler.n_draws = s.value("n_draws", cfg.sampler.n_draws);
    cfg.sampler.burn_in = s.value("burn_in", cfg.sampler.burn_in);
    cfg.sampler.thin = s.value("thin", cfg.sampler.thin);
    cfg.sampler.adapt = s.value("adapt", cfg.sampler.adapt);
    cfg.sampler.parametrization = s.value("parametrization", cfg.sampler.parametrization);
    if (cfg.sampler.n_draws <= cfg.sampler.burn_in || cfg.sampler.burn_in < 0)
      throw ConfigError("config.sampler: need n_draws > burn_in >= 0");
    if (cfg.sampler.thin < 1) throw ConfigError("config.sampler.thin: must be >= 1");
  }

  if (j.contains("sigma_grid"))
    cfg.sigma_grid = detail::parse_grid(j.at("sigma_grid"), "config.sigma_grid");
  if (j.contains("fig1_n")) cfg.fig1_n = detail::require_positive(j.at("fig1_n"), "config.fig1_n");
  if (j.contains("fig1_x_max"))
    cfg.fig1_x_max = detail::require_positive(j.at("fig1_x_max"), "config.fig1_x_max");
  cfg.fig1_x_points = j.value("fig1_x_points", cfg.fig1_x_points);
  if (cfg.fig1_x_points < 3) throw ConfigError("config.fig1_x_points: must be >= 3");

  cfg.rate_seeds = j.value("rate_seeds", cfg.rate_seeds);
  if (cfg.rate_seeds < 1) throw ConfigError("config.rate_seeds: must be >= 1");
  cfg.rate_volterra = j.value("rate_volterra", false);
  cfg.volterra_printed_eigenvalues = j.value("volterra_printed_eigenvalues", false);

  if (j.contains("prior_mass_d1"))
    cfg.prior_mass_d1 = detail::require_positive(j.at("prior_mass_d1"), "config.prior_mass_d1");
  cfg.prior_mass_mc = j.value("prior_mass_mc", cfg.prior_mass_mc);
  if (cfg.prior_mass_mc < 1000) throw ConfigError("config.prior_mass_mc: must be >= 1000");

  if (j.contains("dj94_signals")) {
    cfg.dj94_signals.clear();
    for (const auto& s : j.at("dj94_signals")) {
      const std::string name = s.get<std::string>();
      if (name == "blocks") cfg.dj94_signals.push_back(Dj94Signal::blocks);
      else if (name == "bumps") cfg.dj94_signals.push_back(Dj94Signal::bumps);
      else if (name == "heavisine") cfg.dj94_signals.push_back(Dj94Signal::heavisine);
      else if (name == "doppler") cfg.dj94_signals.push_back(Dj94Signal::doppler);
      else throw ConfigError("config.dj94_signals: unknown signal '" + name + "'");
    }
    if (cfg.dj94_signals.empty()) throw ConfigError("config.dj94_signals: must be nonempty");
  }

  // experiment-specific requirements
  switch (cfg.experiment) {
    case ExperimentKind::inverse_regression:
    case ExperimentKind::density_estimation:
    case ExperimentKind::classification:
      if (cfg.priors.empty())
        throw ConfigError("config.priors: required for " + experiment_to_string(cfg.experiment));
      if (cfg.n_grid.empty())
        throw ConfigError("config.n_grid: required for " + experiment_to_string(cfg.experiment));
      break;
    case ExperimentKind::rate_sweep:
      if (cfg.priors.size() != 1)
        throw ConfigError("config.priors: rate_sweep needs exactly one prior");
      if (cfg.n_grid.size() < 3)
        throw ConfigError("config.n_grid: rate_sweep needs at least 3 points");
      break;
    case ExperimentKind::prior_mass:
      if (cfg.priors.size() != 1)
        throw ConfigError("config.priors: prior_mass needs exactly one prior");
      if (cfg.n_grid.empty()) cfg.n_grid = {50.0, 100.0, 200.0};
      break;
    case ExperimentKind::dj94_denoise:
    case ExperimentKind::fig1_posterior_means:
    case ExperimentKind::theory_suite:
      break;
  }
  for (const auto& p : cfg.priors)
    if (p.hierarchical && (cfg.experiment == ExperimentKind::density_estimation ||
                           cfg.experiment == ExperimentKind::classification))
      throw ConfigError("config.priors: hierarchical prior not supported in " +
                        experiment_to_string(cfg.experiment));

  cfg.echo = j;
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace htbnp
