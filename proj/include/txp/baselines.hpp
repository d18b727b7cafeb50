#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "txp/core.hpp"
#include "txp/outcome_models.hpp"

namespace txp {

// Lowest predicted resistance (1 - effectiveness), canonical tie-break.
std::size_t unconstrained_choice(std::span<const double> effectiveness);

// argmin_a (1 - f_a) + c_a, canonical tie-break.
std::size_t constrained_choice(std::span<const double> effectiveness,
                               std::span<const double> adjustments);

struct CalibrationStep {
  std::size_t iteration = 0;
  std::vector<double> c;
  std::vector<std::size_t> counts;
  std::size_t max_deviation = 0;
};

struct CalibratedCosts {
  std::vector<double> c;  // best-seen adjustments
  double alpha = 0.0;
  std::size_t max_iters = 0;
  std::size_t tolerance = 0;
  std::vector<std::size_t> target_counts;
  std::vector<std::size_t> counts;  // induced by `c`
  bool converged = false;
  std::size_t best_iteration = 0;
  std::vector<CalibrationStep> trace;
};

// ceil(0.02 * n)
std::size_t default_count_tolerance(std::size_t n);
// 1/(10n)
double default_calibration_step(std::size_t n);

// Per-action counts of the recorded clinician choices.
std::vector<std::size_t> doctor_counts(const Cohort& cohort, const ActionSet& actions);

// Iterates c <- c + alpha * (count_policy - count_target) from c = 0 until
// every action's count is within `tolerance` of its target or `max_iters`
// updates have been made; returns the best-seen adjustments either way.
CalibratedCosts calibrate_costs_from_predictions(const MatrixD& effectiveness,
                                                 std::span<const std::size_t> target_counts,
                                                 double alpha, std::size_t max_iters,
                                                 std::size_t tolerance);

CalibratedCosts calibrate_costs(std::span<const LogisticModel> models, const Cohort& cohort,
                                std::span<const std::size_t> target_counts, double alpha,
                                std::size_t max_iters, std::size_t tolerance);

class UnconstrainedPolicy final : public Policy {
 public:
  explicit UnconstrainedPolicy(std::vector<LogisticModel> models);
  std::size_t num_features() const override { return models_.front().num_features(); }
  std::size_t num_outputs() const override { return models_.size(); }
  std::size_t decide(std::span<const double> x) const override;
  const std::vector<LogisticModel>& models() const noexcept { return models_; }

 private:
  std::vector<LogisticModel> models_;
};

class ConstrainedPolicy final : public Policy {
 public:
  ConstrainedPolicy(std::vector<LogisticModel> models, std::vector<double> adjustments);
  std::size_t num_features() const override { return models_.front().num_features(); }
  std::size_t num_outputs() const override { return models_.size(); }
  std::size_t decide(std::span<const double> x) const override;
  const std::vector<LogisticModel>& models() const noexcept { return models_; }
  const std::vector<double>& adjustments() const noexcept { return c_; }

 private:
  std::vector<LogisticModel> models_;
  std::vector<double> c_;
};

std::size_t unconstrained_decide(std::span<const LogisticModel> models, std::span<const double> x);
std::size_t constrained_decide(std::span<const LogisticModel> models, const CalibratedCosts& costs,
                               std::span<const double> x);

}  // namespace txp
