// txpolicy: experiment runner for two-objective treatment policies.
//
//   txpolicy <subcommand> --config run.json [--seed N] [--out DIR]
//
// Exit codes: 0 ok, 1 usage/config, 2 data, 3 numerical.

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "txp/error.hpp"
#include "txp/experiment.hpp"

namespace {

using Command = std::function<txp::CommandResult(const txp::ExperimentConfig&)>;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run(const Command& command, const Options& opts) {
  txp::ExperimentConfig cfg = txp::load_experiment_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.out_dir = *opts.out;
  const txp::CommandResult result = command(cfg);
  for (const auto& file : result.files) std::cout << file.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and evaluate treatment policies that trade off effectiveness and cost"};
  app.set_version_flag("--version", std::string(txp::kVersion));
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"synth-gen", {"generate synthetic train/test cohorts", txp::cmd_synth_gen}},
      {"train", {"fit one policy and write policy.json", txp::cmd_train}},
      {"eval", {"evaluate a serialized policy on the test cohort", txp::cmd_eval}},
      {"frontier", {"sweep every selected method and assemble the frontier", txp::cmd_frontier}},
      {"defer-sweep", {"train deferring direct policies over the lambda grid", txp::cmd_defer_sweep}},
      {"baseline", {"fit the unconstrained and count-calibrated baselines", txp::cmd_baseline}},
  };

  Options opts;
  std::map<CLI::App*, const Command*> dispatch;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", opts.seed, "master seed; overrides the config");
    sub->add_option("--out", opts.out, "output directory; overrides the config");
    dispatch[sub] = &entry.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(txp::ExitCode::kConfig);
  }

  try {
    for (const auto& [sub, command] : dispatch) {
      if (sub->parsed()) return run(*command, opts);
    }
    return static_cast<int>(txp::ExitCode::kConfig);
  } catch (const txp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(txp::ExitCode::kData);
  }
}
