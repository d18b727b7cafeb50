#include "txp/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace txp {
namespace {

std::vector<double> predict_row(std::span<const LogisticModel> models, std::span<const double> x) {
  std::vector<double> f(models.size());
  for (std::size_t a = 0; a < models.size(); ++a) f[a] = models[a].predict(x);
  return f;
}

void check_models(std::span<const LogisticModel> models) {
  if (models.empty()) throw ConfigError("baseline needs at least one outcome model");
}

}  // namespace

std::size_t unconstrained_choice(std::span<const double> effectiveness) {
  std::vector<double> resistance(effectiveness.size());
  for (std::size_t a = 0; a < effectiveness.size(); ++a) resistance[a] = 1.0 - effectiveness[a];
  return argmin_canonical(resistance);
}

std::size_t constrained_choice(std::span<const double> effectiveness,
                               std::span<const double> adjustments) {
  if (adjustments.size() != effectiveness.size()) {
    throw ShapeError("one cost adjustment per action required");
  }
  std::vector<double> score(effectiveness.size());
  for (std::size_t a = 0; a < effectiveness.size(); ++a) {
    score[a] = 1.0 - effectiveness[a] + adjustments[a];
  }
  return argmin_canonical(score);
}

std::size_t default_count_tolerance(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(n) - 1e-9));
}

double default_calibration_step(std::size_t n) {
  return 0.1 / static_cast<double>(std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> doctor_counts(const Cohort& cohort, const ActionSet& actions) {
  if (!cohort.has_doctor()) throw ConfigError("cohort has no doctor_action column");
  std::vector<std::size_t> counts(actions.size(), 0);
  for (auto a : *cohort.doctor_action) ++counts.at(a);
  return counts;
}

CalibratedCosts calibrate_costs_from_predictions(const MatrixD& effectiveness,
                                                 std::span<const std::size_t> target_counts,
                                                 double alpha, std::size_t max_iters,
                                                 std::size_t tolerance) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("calibration step size must be positive");
  const std::size_t k = effectiveness.cols();
  const std::size_t n = effectiveness.rows();
  if (target_counts.size() != k) throw ShapeError("one target count per action required");
  std::size_t total = 0;
  for (auto t : target_counts) total += t;
  if (total != n) {
    throw ConfigError("target counts sum to " + std::to_string(total) + ", cohort has " +
                      std::to_string(n) + " units");
  }

  CalibratedCosts out;
  out.alpha = alpha;
  out.max_iters = max_iters;
  out.tolerance = tolerance;
  out.target_counts.assign(target_counts.begin(), target_counts.end());

  std::vector<double> c(k, 0.0);
  std::size_t best_dev = static_cast<std::size_t>(-1);
  for (std::size_t it = 0;; ++it) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[constrained_choice(effectiveness.row(i), c)];
    std::size_t dev = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const auto d = counts[a] > target_counts[a] ? counts[a] - target_counts[a]
                                                  : target_counts[a] - counts[a];
      dev = std::max(dev, d);
    }
    out.trace.push_back({it, c, counts, dev});
    if (dev < best_dev) {
      best_dev = dev;
      out.c = c;
      out.counts = counts;
      out.best_iteration = it;
    }
    if (dev <= tolerance) {
      out.converged = true;
      break;
    }
    if (it == max_iters) break;
    for (std::size_t a = 0; a < k; ++a) {
      c[a] += alpha * (static_cast<double>(counts[a]) - static_cast<double>(target_counts[a]));
    }
  }
  return out;
}

CalibratedCosts calibrate_costs(std::span<const LogisticModel> models, const Cohort& cohort,
                                std::span<const std::size_t> target_counts, double alpha,
                                std::size_t max_iters, std::size_t tolerance) {
  check_models(models);
  return calibrate_costs_from_predictions(predict_all(models, cohort.X), target_counts, alpha,
                                          max_iters, tolerance);
}

UnconstrainedPolicy::UnconstrainedPolicy(std::vector<LogisticModel> models)
    : models_(std::move(models)) {
  check_models(models_);
}

std::size_t UnconstrainedPolicy::decide(std::span<const double> x) const {
  return unconstrained_choice(predict_row(models_, x));
}

ConstrainedPolicy::ConstrainedPolicy(std::vector<LogisticModel> models,
                                     std::vector<double> adjustments)
    : models_(std::move(models)), c_(std::move(adjustments)) {
  check_models(models_);
  if (c_.size() != models_.size()) throw ShapeError("one cost adjustment per action required");
}

std::size_t ConstrainedPolicy::decide(std::span<const double> x) const {
  return constrained_choice(predict_row(models_, x), c_);
}

std::size_t unconstrained_decide(std::span<const LogisticModel> models, std::span<const double> x) {
  return unconstrained_choice(predict_row(models, x));
}

std::size_t constrained_decide(std::span<const LogisticModel> models, const CalibratedCosts& costs,
                               std::span<const double> x) {
  return constrained_choice(predict_row(models, x), costs.c);
}

}  // namespace txp
