#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qsdsim/cli.hpp"

namespace {

using qsdsim::cli::ExperimentConfig;

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;  // config key -> flag value
};

// Flag name -> config key. Flags win over the config file.
const std::pair<const char*, const char*> flag_keys[] = {
    {"--seed", "run.seed"},           {"--out", "output.directory"},
    {"--threads", "run.threads"},     {"--t-max", "run.horizon"},
    {"--replicas", "run.replicas"},   {"--particles", "run.particles"},
    {"--model", "model.kind"},        {"--lambda", "model.lambda"},
    {"--b", "model.b"},               {"--rho", "model.rho"},
    {"--d", "model.d"},               {"--c", "model.c"},
    {"--kernel", "kernel.family"},    {"--scale", "kernel.scale"},
    {"--truncation", "run.truncation"}, {"--initial", "run.initial"},
    {"--burn-in", "run.burn_in"},     {"--engine", "run.engine"}};

void add_experiment_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config_path, "Experiment config file");
  for (const auto& [flag, key] : flag_keys)
    sub->add_option_function<std::string>(
        flag, [&o, key = std::string(key)](const std::string& v) { o.values[key] = v; },
        std::string("Overrides ") + key);
}

ExperimentConfig effective_config(const Overrides& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  for (const auto& [key, value] : o.values) cfg.set(key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and quasi-stationary analysis of trait-structured birth-death populations"};
  app.set_version_flag("--version", QSDSIM_VERSION);
  app.require_subcommand(1);

  Overrides overrides;
  const std::pair<const char*, const char*> experiments[] = {
      {"simulate", "One trajectory with its event log"},
      {"survival", "Survival curve over run.grid and its decay-rate fit"},
      {"qsd-yaglom", "Yaglom estimate of the q.s.d. at run.horizon"},
      {"qsd-fv", "Fleming-Viot estimate of the q.s.d."},
      {"oracle", "Principal eigenpair of the truncated mass chain"},
      {"validate", "Generator, martingale, engine and coupling checks"}};
  for (const auto& [name, help] : experiments) add_experiment_flags(app.add_subcommand(name, help), overrides);

  std::string first, second, compare_config;
  std::optional<double> tv_threshold;
  CLI::App* compare = app.add_subcommand("compare", "TV distance and theta delta between two reports");
  compare->add_option("first", first, "JSON report")->required();
  compare->add_option("second", second, "JSON report")->required();
  compare->add_option("--tv-threshold", tv_threshold, "Fail when TV exceeds this");
  compare->add_option("--config", compare_config, "Config supplying run.tv_threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return qsdsim::cli::exit_usage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "compare") {
      double threshold = 0.05;
      if (!compare_config.empty())
        threshold = qsdsim::cli::prepare(ExperimentConfig::load(compare_config)).tv_threshold;
      if (tv_threshold) threshold = *tv_threshold;
      return qsdsim::cli::run_compare(first, second, threshold, std::cout);
    }
    auto experiment = qsdsim::cli::prepare(effective_config(overrides));
    return qsdsim::cli::run_subcommand(name, experiment, std::cout);
  } catch (const qsdsim::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return qsdsim::cli::exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qsdsim::cli::exit_runtime;
  }
}
