#include "txp/policies_indirect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "txp/kernels.hpp"

namespace txp {
namespace {

void check_models(std::span<const LogisticModel> models, const ActionSet& actions) {
  if (models.size() != actions.size()) {
    throw ConfigError("expected one outcome model per action (" + std::to_string(actions.size()) +
                      "), got " + std::to_string(models.size()));
  }
  for (std::size_t a = 1; a < models.size(); ++a) {
    if (models[a].num_features() != models[0].num_features()) {
      throw ShapeError("outcome models disagree on the feature count");
    }
  }
}

std::vector<double> predict_row(const std::vector<LogisticModel>& models,
                                std::span<const double> x) {
  std::vector<double> f(models.size());
  for (std::size_t a = 0; a < models.size(); ++a) f[a] = models[a].predict(x);
  return f;
}

}  // namespace

std::size_t threshold_choice(std::span<const double> predictions,
                             std::span<const double> thresholds, const ActionSet& actions,
                             std::size_t default_action) {
  std::size_t best = default_action;
  bool found = false;
  for (std::size_t a = 0; a < predictions.size(); ++a) {
    if (predictions[a] >= thresholds[a] && (!found || actions.cost(a) < actions.cost(best))) {
      best = a;
      found = true;
    }
  }
  return best;
}

ThresholdPolicy::ThresholdPolicy(std::vector<LogisticModel> models, std::vector<double> thresholds,
                                 ActionSet actions, std::size_t default_action)
    : models_(std::move(models)),
      thresholds_(std::move(thresholds)),
      actions_(std::move(actions)),
      default_action_(default_action) {
  check_models(models_, actions_);
  if (thresholds_.size() != actions_.size()) throw ConfigError("one threshold per action required");
  for (double t : thresholds_) {
    if (!(t >= 0.0 && (t <= 1.0 || std::isinf(t)))) {
      throw ConfigError("thresholds must lie in [0,1] or be +inf");
    }
  }
  if (default_action_ >= actions_.size() || actions_.cost(default_action_) != 0.0) {
    throw ConfigError("threshold policy default action must be a zero-cost action");
  }
}

std::size_t ThresholdPolicy::num_features() const { return models_.front().num_features(); }

std::size_t ThresholdPolicy::decide(std::span<const double> x) const {
  return threshold_choice(predict_row(models_, x), thresholds_, actions_, default_action_);
}

std::size_t threshold_decide(const ThresholdPolicy& policy, std::span<const double> x) {
  return policy.decide(x);
}

std::vector<double> ThresholdGrid::default_levels() {
  std::vector<double> levels;
  for (int i = 0; i <= 10; ++i) levels.push_back(i / 10.0);
  return levels;
}

std::vector<std::vector<std::size_t>> ThresholdGrid::groups(std::size_t num_actions) const {
  std::vector<int> owner(num_actions, -1);
  std::vector<std::vector<std::size_t>> out;
  for (const auto& tie : tie_groups) {
    if (tie.empty()) continue;
    std::vector<std::size_t> g;
    for (auto a : tie) {
      if (a >= num_actions) throw ConfigError("tie group names an unknown action index");
      if (owner[a] != -1) throw ConfigError("an action appears in two tie groups");
      owner[a] = static_cast<int>(out.size());
      g.push_back(a);
    }
    std::sort(g.begin(), g.end());
    out.push_back(std::move(g));
  }
  for (std::size_t a = 0; a < num_actions; ++a) {
    if (owner[a] == -1) out.push_back({a});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& l, const auto& r) { return l.front() < r.front(); });
  return out;
}

std::size_t ThresholdGrid::cardinality(std::size_t num_actions) const {
  std::size_t total = 1;
  for (std::size_t g = 0; g < groups(num_actions).size(); ++g) total *= fnr_levels.size();
  return total;
}

BudgetGrid BudgetGrid::default_grid() {
  BudgetGrid grid;
  for (int i = 1; i <= 5; ++i) grid.budgets.push_back(i / 100.0);
  for (int i = 3; i <= 40; ++i) grid.budgets.push_back(i / 40.0);
  return grid;
}

void BudgetGrid::validate() const {
  if (budgets.empty()) throw ConfigError("budget grid is empty");
  for (std::size_t j = 0; j < budgets.size(); ++j) {
    if (!(budgets[j] >= 0.0 && budgets[j] <= 1.0)) throw ConfigError("budgets must lie in [0,1]");
    if (j > 0 && !(budgets[j] > budgets[j - 1])) {
      throw ConfigError("budgets must be sorted ascending without duplicates");
    }
  }
}

MatrixD threshold_table(std::span<const LogisticModel> models, const Cohort& train,
                        std::span<const double> fnr_levels) {
  MatrixD table(models.size(), fnr_levels.size());
  for (std::size_t a = 0; a < models.size(); ++a) {
    const auto scores = predict_effectiveness(models[a], train.X);
    std::vector<std::uint8_t> labels(train.n());
    for (std::size_t i = 0; i < train.n(); ++i) labels[i] = train.Y(i, a);
    const auto roc = roc_points(scores, labels);
    for (std::size_t l = 0; l < fnr_levels.size(); ++l) {
      table(a, l) = threshold_for_fnr(roc, fnr_levels[l]);
    }
  }
  return table;
}

std::vector<BudgetChoice> search_thresholds(std::span<const LogisticModel> models,
                                            const ActionSet& actions, const ThresholdGrid& grid,
                                            const MatrixD& level_thresholds,
                                            std::span<const Cohort> validation,
                                            const BudgetGrid& budgets,
                                            std::size_t default_action) {
  check_models(models, actions);
  budgets.validate();
  if (validation.empty()) throw ConfigError("threshold search needs at least one validation set");
  if (grid.fnr_levels.empty()) throw ConfigError("threshold grid has no levels");
  if (level_thresholds.rows() != actions.size() ||
      level_thresholds.cols() != grid.fnr_levels.size()) {
    throw ShapeError("threshold table must be K x levels");
  }
  if (default_action >= actions.size() || actions.cost(default_action) != 0.0) {
    throw ConfigError("threshold search default action must be a zero-cost action");
  }

  kernels::ThresholdGridProblem problem;
  for (std::size_t a = 0; a < actions.size(); ++a) problem.costs.push_back(actions.cost(a));
  problem.level_thresholds = level_thresholds;
  problem.groups = grid.groups(actions.size());
  problem.default_action = default_action;
  const std::size_t combos = problem.num_combinations();

  std::vector<double> mean_benefit(combos, 0.0), mean_cost(combos, 0.0);
  double default_benefit = 0.0;
  for (const auto& cohort : validation) {
    if (cohort.k() != actions.size()) throw ShapeError("validation cohort does not match actions");
    if (cohort.n() == 0) throw DataError("empty validation cohort");
    const MatrixD predictions = predict_all(models, cohort.X);
    problem.predictions = &predictions;
    problem.outcomes = &cohort.Y;
    const auto totals = kernels::threshold_grid_totals(problem);
    const double inv = 1.0 / static_cast<double>(cohort.n());
    for (std::size_t c = 0; c < combos; ++c) {
      mean_benefit[c] += totals.benefit[c] * inv;
      mean_cost[c] += totals.cost[c] * inv;
    }
    double b = 0.0;
    for (std::size_t i = 0; i < cohort.n(); ++i) b += cohort.Y(i, default_action);
    default_benefit += b * inv;
  }
  const double sets = static_cast<double>(validation.size());
  for (std::size_t c = 0; c < combos; ++c) {
    mean_benefit[c] /= sets;
    mean_cost[c] /= sets;
  }
  default_benefit /= sets;

  std::vector<BudgetChoice> out;
  for (double budget : budgets.budgets) {
    BudgetChoice choice;
    choice.budget = budget;
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < combos; ++c) {
      if (mean_cost[c] > budget + 1e-12) continue;
      if (!best || mean_benefit[c] > mean_benefit[*best] + 1e-12) best = c;
    }
    if (best) {
      choice.combination = *best;
      choice.levels = problem.decode(*best);
      for (std::size_t a = 0; a < actions.size(); ++a) {
        choice.thresholds.push_back(level_thresholds(a, choice.levels[a]));
      }
      choice.mean_benefit = mean_benefit[*best];
      choice.mean_cost = mean_cost[*best];
    } else {
      choice.fallback = true;
      choice.thresholds.assign(actions.size(), std::numeric_limits<double>::infinity());
      choice.mean_benefit = default_benefit;
      choice.mean_cost = 0.0;
    }
    out.push_back(std::move(choice));
  }
  return out;
}

ThresholdPolicy make_threshold_policy(std::span<const LogisticModel> models,
                                      const ActionSet& actions, const BudgetChoice& choice,
                                      std::size_t default_action) {
  return ThresholdPolicy(std::vector<LogisticModel>(models.begin(), models.end()),
                         choice.thresholds, actions, default_action);
}

std::size_t reward_max_choice(std::span<const double> predictions, double omega,
                              const ActionSet& actions) {
  std::vector<double> scores(predictions.size());
  for (std::size_t a = 0; a < predictions.size(); ++a) {
    scores[a] = omega * predictions[a] + (1.0 - omega) * (1.0 - actions.cost(a));
  }
  return argmax_canonical(scores);
}

RewardMaxPolicy::RewardMaxPolicy(std::vector<LogisticModel> models, double omega,
                                 ActionSet actions)
    : models_(std::move(models)), omega_(omega), actions_(std::move(actions)) {
  check_models(models_, actions_);
  if (!(omega_ >= 0.0 && omega_ <= 1.0)) throw ConfigError("omega must lie in [0,1]");
}

std::size_t RewardMaxPolicy::num_features() const { return models_.front().num_features(); }

std::size_t RewardMaxPolicy::decide(std::span<const double> x) const {
  return reward_max_choice(predict_row(models_, x), omega_, actions_);
}

std::size_t reward_max_decide(const RewardMaxPolicy& policy, std::span<const double> x) {
  return policy.decide(x);
}

std::vector<double> default_omega_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back((170 + i) / 200.0);
  return grid;
}

std::vector<double> dedupe_grid(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
               values.end());
  return values;
}

std::vector<RewardMaxPolicy> sweep_omega(std::span<const LogisticModel> models,
                                         std::vector<double> omegas, const ActionSet& actions) {
  std::vector<RewardMaxPolicy> out;
  for (double w : dedupe_grid(std::move(omegas))) {
    out.emplace_back(std::vector<LogisticModel>(models.begin(), models.end()), w, actions);
  }
  return out;
}

}  // namespace txp
