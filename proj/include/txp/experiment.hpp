#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "txp/core.hpp"
#include "txp/optim.hpp"
#include "txp/outcome_models.hpp"
#include "txp/policy_direct.hpp"
#include "txp/serialize.hpp"
#include "txp/synthetic.hpp"

namespace txp {

inline constexpr const char* kVersion = "txpolicy 0.1.0";

struct SynthGenConfig {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  std::size_t n_train = 10000;
  std::size_t n_test = 100000;  // 0 skips the test cohort
  std::optional<ClinicianSim> clinician;
  friend bool operator==(const SynthGenConfig&, const SynthGenConfig&) = default;
};

struct ExperimentConfig {
  std::optional<ActionSet> actions;
  std::string train_path;
  std::string test_path;
  std::vector<std::string> methods;

  TuningPlan tuning;
  OptimizerConfig outcome_optimizer = default_outcome_optimizer();
  OptimizerConfig direct_optimizer = default_direct_optimizer();
  std::optional<EarlyStopRule> early_stop = EarlyStopRule{};
  double direct_val_fraction = 0.30;
  RewardTransform reward_transform = RewardTransform::kNone;

  std::vector<double> omegas;
  std::vector<double> budgets;
  std::vector<double> lambda_defer;
  double defer_omega = 0.92;
  std::vector<double> fnr_levels;
  std::vector<std::vector<std::string>> tie_groups;
  std::string default_action;  // empty: first zero-cost action

  std::size_t n_bootstrap = 20;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "runs";

  // train / eval
  std::string method;  // method for `train`
  double omega = 1.0;
  double budget = 1.0;
  double lambda = 0.0;
  std::string policy_path;

  // baseline calibration; alpha <= 0 means 1/(10n)
  double calib_alpha = 0.0;
  std::size_t calib_max_iters = 500;
  std::optional<std::size_t> calib_tolerance;

  SynthGenConfig synth;

  ExperimentConfig();
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Defaults: omega 0.85..1 by 0.005, the budget grid, 21 lambda values on
// [0, 0.10], 11 FNR levels.
Json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

std::vector<double> default_lambda_grid();

struct CommandResult {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> files;
};

// Writes <out>/train.csv (and test.csv) plus JSON sidecars with the spec
// and probe statistics.
CommandResult cmd_synth_gen(const ExperimentConfig& cfg);
CommandResult cmd_train(const ExperimentConfig& cfg);
CommandResult cmd_eval(const ExperimentConfig& cfg);
CommandResult cmd_frontier(const ExperimentConfig& cfg);
CommandResult cmd_defer_sweep(const ExperimentConfig& cfg);
CommandResult cmd_baseline(const ExperimentConfig& cfg);

}  // namespace txp
