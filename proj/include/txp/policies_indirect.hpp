#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "txp/core.hpp"
#include "txp/outcome_models.hpp"

namespace txp {

// Cheapest action predicted effective (f_a(x) >= t_a), lowest index among
// equal costs; `default_action` when no action clears its threshold.
std::size_t threshold_choice(std::span<const double> predictions,
                             std::span<const double> thresholds,
                             const ActionSet& actions, std::size_t default_action);

class ThresholdPolicy final : public Policy {
 public:
  // Thresholds lie in [0,1] or are +inf (never predicted effective).
  ThresholdPolicy(std::vector<LogisticModel> models, std::vector<double> thresholds,
                  ActionSet actions, std::size_t default_action);

  std::size_t num_features() const override;
  std::size_t num_outputs() const override { return actions_.size(); }
  std::size_t decide(std::span<const double> x) const override;

  const std::vector<LogisticModel>& models() const noexcept { return models_; }
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const ActionSet& actions() const noexcept { return actions_; }
  std::size_t default_action() const noexcept { return default_action_; }

 private:
  std::vector<LogisticModel> models_;
  std::vector<double> thresholds_;
  ActionSet actions_;
  std::size_t default_action_;
};

std::size_t threshold_decide(const ThresholdPolicy& policy, std::span<const double> x);

struct ThresholdGrid {
  std::vector<double> fnr_levels = default_levels();
  // Sets of actions constrained to share a level; actions not listed form
  // singleton groups.
  std::vector<std::vector<std::size_t>> tie_groups;

  static std::vector<double> default_levels();  // 0.0, 0.1, ..., 1.0
  // Partition of [0,K) ordered by each group's smallest action index.
  std::vector<std::vector<std::size_t>> groups(std::size_t num_actions) const;
  std::size_t cardinality(std::size_t num_actions) const;
};

struct BudgetGrid {
  std::vector<double> budgets;

  // 0.01..0.05 by 0.01, then 0.075..1.0 by 0.025.
  static BudgetGrid default_grid();
  void validate() const;
};

// K x L table: the threshold achieving each FNR level on the given
// (training) predictions, per action.
MatrixD threshold_table(std::span<const LogisticModel> models, const Cohort& train,
                        std::span<const double> fnr_levels);

struct BudgetChoice {
  double budget = 0.0;
  bool fallback = false;  // no grid combination was feasible
  std::size_t combination = 0;
  std::vector<std::size_t> levels;  // per action
  std::vector<double> thresholds;   // per action
  double mean_benefit = 0.0;        // averaged over validation sets
  double mean_cost = 0.0;
};

// For every budget, the grid combination with the highest mean validation
// benefit among those whose mean validation cost is within the budget; ties
// go to the lowest combination index. Budgets with no feasible combination
// fall back to always choosing `default_action`.
std::vector<BudgetChoice> search_thresholds(std::span<const LogisticModel> models,
                                            const ActionSet& actions, const ThresholdGrid& grid,
                                            const MatrixD& level_thresholds,
                                            std::span<const Cohort> validation,
                                            const BudgetGrid& budgets,
                                            std::size_t default_action);

ThresholdPolicy make_threshold_policy(std::span<const LogisticModel> models,
                                      const ActionSet& actions, const BudgetChoice& choice,
                                      std::size_t default_action);

// argmax_a omega*f_a + (1-omega)*(1-C(a)) with canonical tie-break.
std::size_t reward_max_choice(std::span<const double> predictions, double omega,
                              const ActionSet& actions);

class RewardMaxPolicy final : public Policy {
 public:
  RewardMaxPolicy(std::vector<LogisticModel> models, double omega, ActionSet actions);

  std::size_t num_features() const override;
  std::size_t num_outputs() const override { return actions_.size(); }
  std::size_t decide(std::span<const double> x) const override;

  double omega() const noexcept { return omega_; }
  const std::vector<LogisticModel>& models() const noexcept { return models_; }
  const ActionSet& actions() const noexcept { return actions_; }

 private:
  std::vector<LogisticModel> models_;
  double omega_;
  ActionSet actions_;
};

std::size_t reward_max_decide(const RewardMaxPolicy& policy, std::span<const double> x);

// 0.85..1.0 by 0.005 (31 values).
std::vector<double> default_omega_grid();

// Sorted, with duplicates removed.
std::vector<double> dedupe_grid(std::vector<double> values);

std::vector<RewardMaxPolicy> sweep_omega(std::span<const LogisticModel> models,
                                         std::vector<double> omegas, const ActionSet& actions);

}  // namespace txp
