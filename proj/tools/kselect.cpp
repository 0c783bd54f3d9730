// Command-line front end: subcommand dispatch, config loading and the
// flag overrides shared by every subcommand.
#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>

#include "kselect/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kernel and hyperparameter selection tuned on closed-loop control cost"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> reps;
  std::optional<int> budget;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "override the configured RNG seed");
  app.add_option("--out", out_dir, "override the configured output directory");
  app.add_option("--reps", reps, "override the number of study repetitions");
  app.add_option("--budget", budget, "cap objective evaluations per search");

  auto* reproduce = app.add_subcommand(
      "reproduce-table2", "run both selection pipelines and the repeated study");
  auto* verify = app.add_subcommand(
      "verify", "numeric checks of the scaling bound and acquisition behaviour");
  auto* simulate = app.add_subcommand("simulate", "roll out the configured model once");
  auto* select = app.add_subcommand("select", "run one selection pipeline");
  std::string mode = "data";
  select->add_option("--mode", mode, "objective: data (cross-validation) or closed-loop")
      ->check(CLI::IsMember({"data", "closed-loop"}));
  auto* bo_demo = app.add_subcommand("bo-demo", "synthetic 1-D acquisition demo");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    kselect::ExperimentConfig config =
        config_path.empty() ? kselect::ExperimentConfig{} : kselect::load_config(config_path);
    if (seed) config.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    if (reps) config.bo.repetitions = *reps;
    if (budget) {
      config.bo.data_budget = std::min(config.bo.data_budget, *budget);
      config.bo.closed_loop_budget = std::min(config.bo.closed_loop_budget, *budget);
    }
    config.validate();

    if (reproduce->parsed()) return kselect::cmd_reproduce_table2(config, std::cout);
    if (verify->parsed()) return kselect::cmd_verify(config, std::cout);
    if (simulate->parsed()) return kselect::cmd_simulate(config, std::cout);
    if (select->parsed()) return kselect::cmd_select(config, mode, std::cout);
    if (bo_demo->parsed()) return kselect::cmd_bo_demo(config, budget.value_or(30), std::cout);

    std::cout << app.help();
    return 2;
  } catch (const kselect::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
