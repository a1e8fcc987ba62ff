// ensemble-steer: compute parameter-independent open-loop inputs that steer a
// whole family of linear systems (A(theta), B(theta)) to target profiles, by
// moment collocation or by consensus flows, and write CSV reports.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ensemble/ensemble.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolverError = 1;
constexpr int kExitConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble-steer: open-loop steering of linear system ensembles"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> output_dir;
  bool verbose = false;

  CLI::App* run = app.add_subcommand("run", "solve one configuration and write reports");
  run->add_option("config", config_path, "run configuration (JSON)")->required();
  run->add_option("--output-dir", output_dir, "override the configured output directory");
  run->add_flag("--verbose", verbose, "echo the report to stdout");

  CLI::App* sweep = app.add_subcommand("sweep", "convergence sweep over the configured N list");
  sweep->add_option("config", config_path, "sweep configuration (JSON)")->required();
  sweep->add_option("--output-dir", output_dir, "override the configured output directory");
  sweep->add_flag("--verbose", verbose, "echo per-N results to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int cli_exit = app.exit(e);
    return cli_exit == 0 ? kExitOk : kExitConfigError;
  }

  try {
    const ensemble::RunConfig cfg = ensemble::load_run_config(config_path);
    if (run->parsed())
      ensemble::run_command(cfg, output_dir, verbose, std::cout);
    else
      ensemble::sweep_command(cfg, output_dir, verbose, std::cout);
  } catch (const ensemble::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ensemble::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverError;
  }
  return kExitOk;
}
