// Command-line driver for the fee-market solvers and simulators.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "feemarket/cli.hpp"

int main(int argc, char** argv) {
  namespace fc = feemarket::cli;

  CLI::App app{"Posted-price parallel execution fee market laboratory"};
  std::string verb;
  std::string scenario_path;
  std::string out_dir = "runs";
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  std::vector<std::string> verbs(std::begin(fc::kVerbs), std::end(fc::kVerbs));
  app.add_option("command", verb, "Command to run")->required()->check(CLI::IsMember(verbs));
  app.add_option("--scenario", scenario_path, "Scenario JSON document (not needed for replay-example)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Override the scenario's simulation seed");
  app.add_flag("--quiet", quiet, "Suppress the human-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fc::kExitOk : fc::kExitInputError;
  }

  std::optional<fc::Scenario> scenario;
  if (scenario_path.empty() && verb != "replay-example") {
    std::cerr << "input error: --scenario is required for '" << verb << "'\n";
    return fc::kExitInputError;
  }
  if (!scenario_path.empty()) {
    try {
      scenario = fc::load_scenario(scenario_path);
    } catch (const fc::ScenarioError& e) {
      std::cerr << "input error: " << e.what() << "\n";
      return fc::kExitInputError;
    }
  }

  fc::RunOptions options;
  options.out_dir = out_dir;
  options.seed = seed;
  options.quiet = quiet;
  return fc::run_command(verb, scenario, options, std::cout, std::cerr);
}
