#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace txp {

enum class OptimMethod { kGradient, kAdam };

struct OptimizerConfig {
  OptimMethod method = OptimMethod::kAdam;
  double learning_rate = 1e-3;
  double l2_penalty = 0.0;
  double l1_penalty = 0.0;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;

  // Adam decay constants.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

enum class StopMetric { kValidationReward, kValidationLoss };
enum class StopMode { kMaximize, kMinimize };

struct EarlyStopRule {
  StopMetric metric = StopMetric::kValidationReward;
  std::size_t patience = 5;
  StopMode mode = StopMode::kMaximize;
  friend bool operator==(const EarlyStopRule&, const EarlyStopRule&) = default;
};

// Mean loss over the given rows (all rows when `rows` is empty); writes the
// gradient into `grad`, which has the same length as the parameters.
using BatchLossFn = std::function<double(std::span<const double> params,
                                         std::span<double> grad,
                                         std::span<const std::size_t> rows)>;

struct Objective {
  std::size_t num_samples = 0;
  BatchLossFn eval;
  // Which coordinates the penalty applies to; empty means all of them.
  std::vector<bool> penalized;
};

using ValidationFn = std::function<double(std::span<const double> params)>;

struct MinimizeResult {
  std::vector<double> params;
  // Validation metric after each epoch when early stopping is active.
  std::vector<double> trace;
  // Penalized training loss per epoch: the full-batch loss at the start of
  // the epoch, or the mean mini-batch loss over the epoch.
  std::vector<double> train_loss;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  std::size_t epochs_run = 0;
};

// Throws NumericalError when the loss or gradient becomes non-finite.
MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& config,
                        const std::optional<EarlyStopRule>& stop = std::nullopt,
                        const ValidationFn& validation = {});

using LossGradFn =
    std::function<double(std::span<const double> params, std::span<double> grad)>;

// max_i |analytic_i - central_i| / (|analytic_i| + 1e-8)
double check_gradient(const LossGradFn& f, std::span<const double> point, double step);

}  // namespace txp
