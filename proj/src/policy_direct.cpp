#include "txp/policy_direct.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "txp/kernels.hpp"

namespace txp {
namespace {

void require_nonnegative(const RewardTable& reward) {
  for (double v : reward.r.data()) {
    if (!(v >= 0.0)) {
      throw ContractError("surrogate loss requires nonnegative rewards (found " +
                          std::to_string(v) + ")");
    }
  }
}

std::size_t pick(std::span<const double> scores, bool lowest) {
  return lowest ? argmin_canonical(scores) : argmax_canonical(scores);
}

}  // namespace

RewardTable regret_transform(const RewardTable& reward) {
  RewardTable out = reward;
  for (std::size_t i = 0; i < out.r.rows(); ++i) {
    auto row = out.r.row(i);
    const double best = *std::max_element(row.begin(), row.end());
    for (auto& v : row) v = best - v;
  }
  return out;
}

LinearPolicy::LinearPolicy(MatrixD theta, ActionSet actions, bool has_defer,
                           Standardizer standardization)
    : theta_(std::move(theta)),
      actions_(std::move(actions)),
      has_defer_(has_defer),
      standardization_(std::move(standardization)) {
  const std::size_t outputs = actions_.size() + (has_defer_ ? 1 : 0);
  if (theta_.cols() != outputs) {
    throw ShapeError("theta has " + std::to_string(theta_.cols()) + " columns, expected " +
                     std::to_string(outputs));
  }
  if (theta_.rows() != standardization_.size() + 1) {
    throw ShapeError("theta must have one row per feature plus an intercept row");
  }
}

std::size_t LinearPolicy::decide(std::span<const double> x) const {
  const std::size_t m = num_features();
  const std::size_t k = theta_.cols();
  std::vector<double> z(m);
  standardization_.apply(x, z);
  std::vector<double> scores(theta_.row(m).begin(), theta_.row(m).end());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t a = 0; a < k; ++a) scores[a] += theta_(j, a) * z[j];
  }
  return pick(scores, choose_lowest);
}

std::pair<double, MatrixD> surrogate_loss_and_grad(const MatrixD& theta, const MatrixD& X,
                                                   const RewardTable& reward, double l2_penalty) {
  require_nonnegative(reward);
  if (theta.rows() != X.cols() + 1 || theta.cols() != reward.r.cols()) {
    throw ShapeError("theta must be (m+1) x K'");
  }
  if (reward.r.rows() != X.rows()) throw ShapeError("reward table and X differ in row count");
  if (l2_penalty < 0.0) throw ConfigError("l2_penalty must be nonnegative");
  MatrixD grad(theta.rows(), theta.cols());
  double loss = kernels::deviance_loss_grad(theta.data(), X, reward.r, {}, grad.data());
  const std::size_t m = X.cols();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t a = 0; a < theta.cols(); ++a) {
      loss += l2_penalty * theta(j, a) * theta(j, a);
      grad(j, a) += 2.0 * l2_penalty * theta(j, a);
    }
  }
  return {loss, std::move(grad)};
}

OptimizerConfig default_direct_optimizer() {
  OptimizerConfig cfg;
  cfg.method = OptimMethod::kAdam;
  cfg.learning_rate = 1e-4;
  cfg.l2_penalty = 3e-3;
  cfg.max_epochs = 50;
  cfg.batch_size = 64;
  return cfg;
}

double mean_realized_reward(const Policy& policy, const MatrixD& X, const RewardTable& reward) {
  const auto decisions = apply_policy(policy, X);
  if (decisions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) total += reward.r(i, decisions[i]);
  return total / static_cast<double>(decisions.size());
}

DirectFit train_direct(const Cohort& cohort, const ActionSet& actions, const RewardSpec& spec,
                       const OptimizerConfig& opt, const std::optional<EarlyStopRule>& stop,
                       const Cohort* validation, RewardTransform transform) {
  RewardTable reward = build_rewards(cohort, actions, spec);
  require_nonnegative(reward);
  const bool lowest = transform == RewardTransform::kRegret;
  if (lowest) reward = regret_transform(reward);
  if (stop && validation == nullptr) {
    throw ConfigError("early stopping requires a validation cohort");
  }
  if (cohort.n() == 0) throw DataError("cannot train on an empty cohort");

  Standardizer standardization = Standardizer::fit(cohort.X);
  const MatrixD Z = standardization.apply(cohort.X);
  const std::size_t m = cohort.m();
  const std::size_t k = reward.r.cols();

  Objective obj;
  obj.num_samples = cohort.n();
  obj.eval = [&](std::span<const double> w, std::span<double> g, std::span<const std::size_t> rows) {
    return kernels::deviance_loss_grad(w, Z, reward.r, rows, g);
  };
  obj.penalized.assign((m + 1) * k, true);
  for (std::size_t a = 0; a < k; ++a) obj.penalized[m * k + a] = false;

  ValidationFn metric;
  MatrixD Zv;
  RewardTable val_reward;
  if (stop) {
    val_reward = build_rewards(*validation, actions, spec);
    Zv = standardization.apply(validation->X);
    metric = [&](std::span<const double> w) {
      const MatrixD scores = kernels::linear_scores(w, k, Zv);
      double total = 0.0;
      for (std::size_t i = 0; i < Zv.rows(); ++i) total += val_reward.r(i, pick(scores.row(i), lowest));
      return Zv.rows() == 0 ? 0.0 : total / static_cast<double>(Zv.rows());
    };
  }

  auto result = minimize(obj, std::vector<double>((m + 1) * k, 0.0), opt, stop, metric);
  MatrixD theta(m + 1, k);
  std::copy(result.params.begin(), result.params.end(), theta.data().begin());
  LinearPolicy policy(std::move(theta), actions, reward.has_defer, std::move(standardization));
  policy.omega = spec.omega;
  policy.lambda_defer = spec.lambda_defer;
  policy.seed = opt.seed;
  policy.choose_lowest = lowest;
  return DirectFit{std::move(policy), std::move(result)};
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

double calibration_probe(const MatrixD& theta, const MatrixD& X, const RewardTable& reward) {
  if (theta.rows() != X.cols() + 1 || theta.cols() != reward.r.cols()) {
    throw ShapeError("theta must be (m+1) x K'");
  }
  const std::size_t k = reward.r.cols();
  std::map<std::vector<double>, std::vector<double>> groups;
  std::map<std::vector<double>, std::size_t> counts;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    std::vector<double> key(X.row(i).begin(), X.row(i).end());
    auto& sums = groups[key];
    sums.resize(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) sums[a] += reward.r(i, a);
    ++counts[key];
  }
  const bool repeats = std::any_of(counts.begin(), counts.end(),
                                   [](const auto& kv) { return kv.second > 1; });
  if (!repeats) {
    throw DataError("calibration probe needs repeated feature rows to estimate conditional means");
  }
  double worst = 0.0;
  for (const auto& [key, sums] : groups) {
    double total = 0.0;
    for (double s : sums) total += s;
    if (total <= 0.0) continue;  // normalized means undefined
    MatrixD row(1, key.size());
    std::copy(key.begin(), key.end(), row.row(0).begin());
    const auto scores = kernels::linear_scores(theta.data(), k, row);
    const auto p = softmax(scores.row(0));
    for (std::size_t a = 0; a < k; ++a) worst = std::max(worst, std::abs(p[a] - sums[a] / total));
  }
  return worst;
}

bool convexity_probe(const MatrixD& X, const RewardTable& reward, std::size_t trials,
                     std::uint64_t seed) {
  const std::size_t k = reward.r.cols();
  const std::size_t p = (X.cols() + 1) * k;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> t1(p), t2(p), mid(p);
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t q = 0; q < p; ++q) {
      t1[q] = normal(rng);
      t2[q] = normal(rng);
    }
    const double lam = unit(rng);
    for (std::size_t q = 0; q < p; ++q) mid[q] = lam * t1[q] + (1.0 - lam) * t2[q];
    const double l1 = kernels::deviance_loss_grad(t1, X, reward.r, {}, {});
    const double l2 = kernels::deviance_loss_grad(t2, X, reward.r, {}, {});
    const double lm = kernels::deviance_loss_grad(mid, X, reward.r, {}, {});
    if (lm > lam * l1 + (1.0 - lam) * l2 + 1e-10) return false;
  }
  return true;
}

}  // namespace txp
