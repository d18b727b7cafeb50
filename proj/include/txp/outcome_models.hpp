#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "txp/core.hpp"
#include "txp/optim.hpp"

namespace txp {

enum class PenaltyKind { kL2, kL1 };

// Regularization setting on the inverse-strength scale: a larger
// `inverse_strength` means weaker shrinkage.
struct Penalty {
  PenaltyKind kind = PenaltyKind::kL2;
  double inverse_strength = 1.0;

  // Per-sample penalty weight for a fit on n rows, matching the
  // C * sum(loss) + R(w) convention after dividing by C * n.
  double weight(std::size_t n) const;
  friend bool operator==(const Penalty&, const Penalty&) = default;
};

std::vector<Penalty> default_penalty_grid();

// Logistic model for P(Y(a)=1 | x) on standardized features.
struct LogisticModel {
  std::size_t action = 0;
  std::string action_label;
  std::vector<double> weights;  // m coefficients then the intercept
  Standardizer standardization;
  Penalty penalty;
  double mean_validation_auc = 0.0;

  std::size_t num_features() const noexcept { return standardization.size(); }
  double predict(std::span<const double> x) const;
};

struct TuningPlan {
  std::size_t n_splits = 20;
  double val_fraction = 0.30;
  std::vector<Penalty> penalty_grid = default_penalty_grid();
  std::uint64_t seed = 0;

  void validate(std::size_t n) const;
  friend bool operator==(const TuningPlan&, const TuningPlan&) = default;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Random train/validation partitions, reproducible from plan.seed.
std::vector<Split> make_splits(std::size_t n, const TuningPlan& plan);

// Default optimizer for outcome models: full-batch Adam.
OptimizerConfig default_outcome_optimizer();

// One penalized fit; standardization is estimated from X and frozen.
LogisticModel fit_logistic(const MatrixD& X, std::span<const double> y, const Penalty& penalty,
                           const OptimizerConfig& opt);

// Selects, per action, the penalty with the highest mean validation AUC over
// the plan's splits and refits it on the whole cohort.
std::vector<LogisticModel> fit_outcome_models(const Cohort& cohort, const ActionSet& actions,
                                              const TuningPlan& plan,
                                              const OptimizerConfig& opt);

std::vector<double> predict_effectiveness(const LogisticModel& model, const MatrixD& X);

// n x K matrix of effectiveness predictions, one column per model.
MatrixD predict_all(std::span<const LogisticModel> models, const MatrixD& X);

struct RocPoint {
  double threshold;  // predict positive iff score >= threshold
  double fpr;
  double fnr;
  double tpr;
};

// Starts at threshold +inf (nothing positive) followed by one point per
// distinct score in descending order.
std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels);
double roc_auc(std::span<const RocPoint> roc);
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Largest ROC threshold whose empirical FNR (share of positives scored below
// it) does not exceed target_fnr.
double threshold_for_fnr(std::span<const RocPoint> roc, double target_fnr);

}  // namespace txp
