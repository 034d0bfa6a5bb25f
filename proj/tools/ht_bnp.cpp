// ht-bnp: experiment runner for heavy-tailed series priors.
//
// Usage:
//   ht-bnp <experiment> --config <path> [--seed S] [--paper-scale] [--out DIR]
//   ht-bnp validate --config <path>
//   ht-bnp plot <table.csv> --kind line|band|scatter [--out FILE]
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "htbnp/config.hpp"
#include "htbnp/harness.hpp"
#include "htbnp/svg_plot.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct ExperimentArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool paper_scale = false;
};

int run_experiment(htbnp::ExperimentKind kind, const ExperimentArgs& args) {
  htbnp::ExperimentConfig cfg = htbnp::load_config(args.config_path);
  if (cfg.experiment != kind)
    throw htbnp::ConfigError("config.experiment: file declares '" +
                             htbnp::experiment_to_string(cfg.experiment) +
                             "' but the subcommand asked for '" +
                             htbnp::experiment_to_string(kind) + "'");
  if (args.seed_set) {
    cfg.seed = args.seed;
    cfg.echo["seed"] = args.seed;
  }
  if (args.paper_scale) {
    cfg.paper_scale = true;
    cfg.echo["paper_scale"] = true;
  }
  if (!args.out_dir.empty()) {
    cfg.output_dir = args.out_dir;
    cfg.echo["output_dir"] = args.out_dir;
  }
  htbnp::run(cfg);
  std::printf("ok: artifacts in %s\n", cfg.output_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heavy-tailed series priors: experiments and artifact emission"};
  app.require_subcommand(1);

  ExperimentArgs args;
  std::vector<std::pair<htbnp::ExperimentKind, CLI::App*>> experiment_cmds;
  for (const auto& [name, kind] : htbnp::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", args.config_path, "configuration file (JSON)")->required();
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_flag("--paper-scale", args.paper_scale,
                  "use the published chain lengths instead of desk-scale defaults");
    sub->add_option("--out", args.out_dir, "override the output directory");
    experiment_cmds.push_back({kind, sub});
  }

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "validate a configuration file");
  validate->add_option("--config", validate_path, "configuration file (JSON)")->required();

  std::string plot_table, plot_kind = "line", plot_out;
  CLI::App* plot = app.add_subcommand("plot", "render a CSV table to SVG");
  plot->add_option("table", plot_table, "CSV table path")->required();
  plot->add_option("--kind", plot_kind, "line | band | scatter");
  plot->add_option("--out", plot_out, "output SVG path (default: table with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (validate->parsed()) {
      htbnp::load_config(validate_path);
      std::printf("ok: %s\n", validate_path.c_str());
      return kExitOk;
    }
    if (plot->parsed()) {
      std::filesystem::path out =
          plot_out.empty() ? std::filesystem::path(plot_table).replace_extension(".svg")
                           : std::filesystem::path(plot_out);
      htbnp::emit_plot(plot_table, htbnp::plot_kind_from_string(plot_kind), out);
      std::printf("ok: %s\n", out.string().c_str());
      return kExitOk;
    }
    for (const auto& [kind, sub] : experiment_cmds)
      if (sub->parsed()) return run_experiment(kind, args);
    std::fprintf(stderr, "error: no subcommand\n");
    return kExitConfig;
  } catch (const htbnp::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const htbnp::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s (achieved error %.3g)\n", e.what(),
                 e.achieved_rel_error());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kExitNumerical;
  }
}
