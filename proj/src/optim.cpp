#include "txp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "txp/error.hpp"

namespace txp {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (l2_penalty < 0.0 || l1_penalty < 0.0) throw ConfigError("penalties must be nonnegative");
  if (l2_penalty > 0.0 && l1_penalty > 0.0) {
    throw ConfigError("at most one of l1_penalty and l2_penalty may be nonzero");
  }
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double add_penalty(const OptimizerConfig& cfg, const std::vector<bool>& mask,
                   std::span<const double> w, std::span<double> grad) {
  double pen = 0.0;
  for (std::size_t q = 0; q < w.size(); ++q) {
    if (!mask.empty() && !mask[q]) continue;
    if (cfg.l2_penalty > 0.0) {
      pen += cfg.l2_penalty * w[q] * w[q];
      grad[q] += 2.0 * cfg.l2_penalty * w[q];
    } else if (cfg.l1_penalty > 0.0) {
      pen += cfg.l1_penalty * std::abs(w[q]);
      // subgradient 0 at w = 0
      grad[q] += cfg.l1_penalty * static_cast<double>((w[q] > 0.0) - (w[q] < 0.0));
    }
  }
  return pen;
}

}  // namespace

MinimizeResult minimize(const Objective& objective, std::vector<double> init,
                        const OptimizerConfig& config,
                        const std::optional<EarlyStopRule>& stop,
                        const ValidationFn& validation) {
  config.validate();
  if (stop && !validation) throw ConfigError("early stopping needs a validation callback");
  if (!objective.penalized.empty() && objective.penalized.size() != init.size()) {
    throw ConfigError("penalty mask length differs from parameter count");
  }
  const std::size_t p = init.size();
  const std::size_t n = objective.num_samples;
  const std::size_t batch = (config.batch_size == 0 || config.batch_size >= n) ? 0 : config.batch_size;

  MinimizeResult result;
  std::vector<double> w = std::move(init);
  std::vector<double> grad(p), m1(p, 0.0), m2(p, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::size_t step = 0;

  std::optional<double> best_metric;
  std::vector<double> best_w = w;

  auto take_step = [&](std::span<const std::size_t> rows, std::size_t epoch) {
    double loss = objective.eval(w, grad, rows);
    loss += add_penalty(config, objective.penalized, w, grad);
    if (!std::isfinite(loss) || !all_finite(grad)) {
      throw NumericalError("optimization diverged at epoch " + std::to_string(epoch));
    }
    ++step;
    if (config.method == OptimMethod::kGradient) {
      for (std::size_t q = 0; q < p; ++q) w[q] -= config.learning_rate * grad[q];
    } else {
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t q = 0; q < p; ++q) {
        m1[q] = config.beta1 * m1[q] + (1.0 - config.beta1) * grad[q];
        m2[q] = config.beta2 * m2[q] + (1.0 - config.beta2) * grad[q] * grad[q];
        w[q] -= config.learning_rate * (m1[q] / c1) / (std::sqrt(m2[q] / c2) + config.epsilon);
      }
    }
    return loss;
  };

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (batch == 0) {
      result.train_loss.push_back(take_step({}, epoch));
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t lo = 0; lo < n; lo += batch) {
        const std::size_t hi = std::min(n, lo + batch);
        total += take_step(std::span<const std::size_t>(order.data() + lo, hi - lo), epoch);
        ++count;
      }
      result.train_loss.push_back(total / static_cast<double>(count));
    }
    result.epochs_run = epoch;
    if (!all_finite(w)) throw NumericalError("parameters became non-finite at epoch " + std::to_string(epoch));

    if (!stop) continue;
    const double metric = validation(w);
    if (!std::isfinite(metric)) {
      throw NumericalError("validation metric is non-finite at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(metric);
    const bool better = !best_metric || (stop->mode == StopMode::kMaximize ? metric > *best_metric
                                                                            : metric < *best_metric);
    if (better) {
      best_metric = metric;
      best_w = w;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best > stop->patience) {
      break;
    }
  }

  if (stop) {
    result.params = std::move(best_w);
  } else {
    result.params = std::move(w);
    result.best_epoch = result.epochs_run;
  }
  return result;
}

double check_gradient(const LossGradFn& f, std::span<const double> point, double step) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(x.size()), scratch(x.size());
  f(x, analytic);
  double worst = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) {
    const double saved = x[q];
    x[q] = saved + step;
    const double up = f(x, scratch);
    x[q] = saved - step;
    const double down = f(x, scratch);
    x[q] = saved;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[q] - numeric) / (std::abs(analytic[q]) + 1e-8));
  }
  return worst;
}

}  // namespace txp
