#include "txp/outcome_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "txp/kernels.hpp"

namespace txp {

double Penalty::weight(std::size_t n) const {
  const double cn = inverse_strength * static_cast<double>(std::max<std::size_t>(n, 1));
  return kind == PenaltyKind::kL2 ? 1.0 / (2.0 * cn) : 1.0 / cn;
}

std::vector<Penalty> default_penalty_grid() {
  std::vector<Penalty> grid;
  for (auto kind : {PenaltyKind::kL2, PenaltyKind::kL1}) {
    for (double c : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) grid.push_back({kind, c});
  }
  return grid;
}

double LogisticModel::predict(std::span<const double> x) const {
  const std::size_t m = num_features();
  if (x.size() != m) {
    throw ShapeError("outcome model expects " + std::to_string(m) + " features, got " +
                     std::to_string(x.size()));
  }
  double z = weights[m];
  for (std::size_t j = 0; j < m; ++j) {
    z += weights[j] * (x[j] - standardization.mean[j]) / standardization.sd[j];
  }
  return 1.0 / (1.0 + std::exp(-z));
}

void TuningPlan::validate(std::size_t n) const {
  if (n_splits == 0) throw ConfigError("tuning needs at least one split");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in (0,1)");
  }
  if (penalty_grid.empty()) throw ConfigError("penalty grid is empty");
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n_val < 1 || n_val >= n) {
    throw ConfigError("val_fraction leaves an empty train or validation part for n=" +
                      std::to_string(n));
  }
}

std::vector<Split> make_splits(std::size_t n, const TuningPlan& plan) {
  plan.validate(n);
  const auto n_val = static_cast<std::size_t>(std::llround(plan.val_fraction * static_cast<double>(n)));
  std::vector<Split> splits;
  splits.reserve(plan.n_splits);
  std::vector<std::size_t> idx(n);
  for (std::size_t s = 0; s < plan.n_splits; ++s) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(kernels::derive_seed(plan.seed, s));
    std::shuffle(idx.begin(), idx.end(), rng);
    Split split;
    split.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

OptimizerConfig default_outcome_optimizer() {
  OptimizerConfig cfg;
  cfg.method = OptimMethod::kAdam;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 200;
  cfg.batch_size = 0;
  return cfg;
}

LogisticModel fit_logistic(const MatrixD& X, std::span<const double> y, const Penalty& penalty,
                           const OptimizerConfig& opt) {
  if (y.size() != X.rows()) throw ShapeError("label count differs from row count");
  if (X.rows() == 0) throw DataError("cannot fit a logistic model on zero rows");
  LogisticModel model;
  model.standardization = Standardizer::fit(X);
  model.penalty = penalty;
  const MatrixD Z = model.standardization.apply(X);
  const std::size_t m = X.cols();

  OptimizerConfig cfg = opt;
  cfg.l1_penalty = 0.0;
  cfg.l2_penalty = 0.0;
  (penalty.kind == PenaltyKind::kL2 ? cfg.l2_penalty : cfg.l1_penalty) = penalty.weight(X.rows());

  Objective obj;
  obj.num_samples = X.rows();
  obj.eval = [&](std::span<const double> w, std::span<double> g, std::span<const std::size_t> rows) {
    return kernels::logistic_loss_grad(w, Z, y, rows, g);
  };
  obj.penalized.assign(m + 1, true);
  obj.penalized[m] = false;  // intercept

  std::vector<double> init(m + 1, 0.0);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const double clipped = std::clamp(mean, 1e-3, 1.0 - 1e-3);
  init[m] = std::log(clipped / (1.0 - clipped));
  model.weights = minimize(obj, std::move(init), cfg).params;
  return model;
}

namespace {

std::vector<double> outcome_column(const Cohort& cohort, std::size_t a) {
  std::vector<double> y(cohort.n());
  for (std::size_t i = 0; i < cohort.n(); ++i) y[i] = cohort.Y(i, a);
  return y;
}

template <typename T>
std::vector<T> gather(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

std::vector<LogisticModel> fit_outcome_models(const Cohort& cohort, const ActionSet& actions,
                                              const TuningPlan& plan,
                                              const OptimizerConfig& opt) {
  if (cohort.k() != actions.size()) throw ShapeError("cohort does not match the action set");
  if (cohort.n() < 2) throw DataError("need at least 2 units to fit outcome models");
  for (std::size_t a = 0; a < actions.size(); ++a) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < cohort.n(); ++i) positives += cohort.Y(i, a);
    if (positives == 0 || positives == cohort.n()) {
      throw DataError("degenerate outcome: y_" + actions.label(a) + " has a single class");
    }
  }
  const auto splits = make_splits(cohort.n(), plan);
  std::vector<MatrixD> split_train, split_val;
  for (const auto& s : splits) {
    split_train.push_back(cohort.X.select_rows(s.train));
    split_val.push_back(cohort.X.select_rows(s.validation));
  }

  std::vector<LogisticModel> models;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const auto y = outcome_column(cohort, a);
    std::vector<std::uint8_t> labels(y.begin(), y.end());

    std::size_t best = 0;
    double best_auc = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < plan.penalty_grid.size(); ++g) {
      double total = 0.0;
      std::size_t used = 0;
      for (std::size_t s = 0; s < splits.size(); ++s) {
        const auto y_train = gather<double>(y, splits[s].train);
        const auto y_val = gather<std::uint8_t>(labels, splits[s].validation);
        const auto pos = std::count(y_val.begin(), y_val.end(), std::uint8_t{1});
        const auto pos_train = std::count(y_train.begin(), y_train.end(), 1.0);
        if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y_val.size()) || pos_train == 0 ||
            pos_train == static_cast<std::ptrdiff_t>(y_train.size())) {
          continue;  // AUC undefined on this split
        }
        const auto model = fit_logistic(split_train[s], y_train, plan.penalty_grid[g], opt);
        total += auc(predict_effectiveness(model, split_val[s]), y_val);
        ++used;
      }
      const double mean_auc = used > 0 ? total / static_cast<double>(used) : 0.5;
      if (mean_auc > best_auc) {
        best_auc = mean_auc;
        best = g;
      }
    }
    auto model = fit_logistic(cohort.X, y, plan.penalty_grid[best], opt);
    model.action = a;
    model.action_label = actions.label(a);
    model.mean_validation_auc = best_auc;
    models.push_back(std::move(model));
  }
  return models;
}

std::vector<double> predict_effectiveness(const LogisticModel& model, const MatrixD& X) {
  if (X.rows() > 0 && X.cols() != model.num_features()) {
    throw ShapeError("outcome model expects " + std::to_string(model.num_features()) +
                     " features, matrix has " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = model.predict(X.row(i));
  return out;
}

MatrixD predict_all(std::span<const LogisticModel> models, const MatrixD& X) {
  MatrixD out(X.rows(), models.size());
  for (std::size_t a = 0; a < models.size(); ++a) {
    const auto p = predict_effectiveness(models[a], X);
    for (std::size_t i = 0; i < X.rows(); ++i) out(i, a) = p[i];
  }
  return out;
}

std::vector<RocPoint> roc_points(std::span<const double> scores,
                                 std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  std::size_t pos = 0;
  for (auto l : labels) pos += (l != 0);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("ROC needs both classes among the labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc;
  roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] != 0 ? tp : fp) += 1;
      ++k;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    roc.push_back({s, static_cast<double>(fp) / static_cast<double>(neg), 1.0 - tpr, tpr});
  }
  return roc;
}

double roc_auc(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k) {
    area += (roc[k].fpr - roc[k - 1].fpr) * 0.5 * (roc[k].tpr + roc[k - 1].tpr);
  }
  return area;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return roc_auc(roc_points(scores, labels));
}

double threshold_for_fnr(std::span<const RocPoint> roc, double target_fnr) {
  if (roc.empty()) throw DataError("empty ROC");
  if (!(target_fnr >= 0.0 && target_fnr <= 1.0)) throw ConfigError("target FNR must lie in [0,1]");
  // FNR is non-increasing along the descending-threshold sequence.
  for (const auto& p : roc) {
    if (p.fnr <= target_fnr + 1e-12) return p.threshold;
  }
  return roc.back().threshold;
}

}  // namespace txp
