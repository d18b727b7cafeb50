#include "txp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

namespace txp::kernels {
namespace {

std::size_t row_count(const MatrixD& X, std::span<const std::size_t> rows) {
  return rows.empty() ? X.rows() : rows.size();
}

std::size_t row_at(std::span<const std::size_t> rows, std::size_t k) {
  return rows.empty() ? k : rows[k];
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// One unit's deviance contribution; accumulates into grad when non-empty.
// `scores` and `probs` are scratch of length K.
double deviance_row(std::span<const double> theta, std::span<const double> x,
                    std::span<const double> r, std::span<double> scores,
                    std::span<double> grad) {
  const std::size_t m = x.size();
  const std::size_t k = r.size();
  double rsum = 0.0;
  for (double v : r) rsum += v;
  if (rsum == 0.0) return 0.0;
  for (std::size_t a = 0; a < k; ++a) scores[a] = theta[m * k + a];
  for (std::size_t j = 0; j < m; ++j) {
    const double xj = x[j];
    const double* th = theta.data() + j * k;
    for (std::size_t a = 0; a < k; ++a) scores[a] += th[a] * xj;
  }
  double mx = scores[0];
  for (std::size_t a = 1; a < k; ++a) mx = std::max(mx, scores[a]);
  double z = 0.0;
  for (std::size_t a = 0; a < k; ++a) z += std::exp(scores[a] - mx);
  const double lse = mx + std::log(z);
  double loss = rsum * lse;
  for (std::size_t a = 0; a < k; ++a) loss -= r[a] * scores[a];
  if (!grad.empty()) {
    // d/df_a = softmax_a * sum(r) - r_a
    for (std::size_t a = 0; a < k; ++a) {
      scores[a] = std::exp(scores[a] - lse) * rsum - r[a];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double xj = x[j];
      double* g = grad.data() + j * k;
      for (std::size_t a = 0; a < k; ++a) g[a] += scores[a] * xj;
    }
    double* g = grad.data() + m * k;
    for (std::size_t a = 0; a < k; ++a) g[a] += scores[a];
  }
  return loss;
}

double logistic_row(std::span<const double> w, std::span<const double> x, double y,
                    std::span<double> grad) {
  const std::size_t m = x.size();
  double z = w[m];
  for (std::size_t j = 0; j < m; ++j) z += w[j] * x[j];
  const double loss = softplus(z) - y * z;
  if (!grad.empty()) {
    const double d = sigmoid(z) - y;
    for (std::size_t j = 0; j < m; ++j) grad[j] += d * x[j];
    grad[m] += d;
  }
  return loss;
}

std::size_t decide_row(const ThresholdGridProblem& p, std::span<const double> f,
                       std::span<const double> thresholds) {
  std::size_t best = p.default_action;
  bool found = false;
  for (std::size_t a = 0; a < f.size(); ++a) {
    if (f[a] >= thresholds[a] && (!found || p.costs[a] < p.costs[best])) {
      best = a;
      found = true;
    }
  }
  return best;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over (master, stream)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double deviance_loss_grad(std::span<const double> theta, const MatrixD& X,
                          const MatrixD& reward, std::span<const std::size_t> rows,
                          std::span<double> grad) {
  const std::size_t n = row_count(X, rows);
  const std::size_t k = reward.cols();
  const std::size_t p = theta.size();
  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  const bool want_grad = !grad.empty();
  std::vector<double> block_loss(blocks, 0.0);
  std::vector<double> block_grad(want_grad ? blocks * p : 0, 0.0);

#pragma omp parallel
  {
    std::vector<double> scores(k);
#pragma omp for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
      const std::size_t hi = std::min(n, lo + kBlockRows);
      std::span<double> g = want_grad
                                ? std::span<double>(block_grad.data() + b * p, p)
                                : std::span<double>();
      double acc = 0.0;
      for (std::size_t t = lo; t < hi; ++t) {
        const std::size_t i = row_at(rows, t);
        acc += deviance_row(theta, X.row(i), reward.row(i), scores, g);
      }
      block_loss[b] = acc;
    }
  }

  double loss = 0.0;
  for (double v : block_loss) loss += v;
  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t q = 0; q < p; ++q) grad[q] += block_grad[b * p + q];
    }
  }
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (auto& g : grad) g *= inv;
  }
  return loss * inv;
}

double logistic_loss_grad(std::span<const double> w, const MatrixD& X,
                          std::span<const double> y, std::span<const std::size_t> rows,
                          std::span<double> grad) {
  const std::size_t n = row_count(X, rows);
  const std::size_t p = w.size();
  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  const bool want_grad = !grad.empty();
  std::vector<double> block_loss(blocks, 0.0);
  std::vector<double> block_grad(want_grad ? blocks * p : 0, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlockRows;
    const std::size_t hi = std::min(n, lo + kBlockRows);
    std::span<double> g = want_grad
                              ? std::span<double>(block_grad.data() + b * p, p)
                              : std::span<double>();
    double acc = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
      const std::size_t i = row_at(rows, t);
      acc += logistic_row(w, X.row(i), y[i], g);
    }
    block_loss[b] = acc;
  }

  double loss = 0.0;
  for (double v : block_loss) loss += v;
  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t q = 0; q < p; ++q) grad[q] += block_grad[b * p + q];
    }
  }
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (auto& g : grad) g *= inv;
  }
  return loss * inv;
}

MatrixD linear_scores(std::span<const double> theta, std::size_t num_outputs,
                      const MatrixD& X) {
  const std::size_t m = X.cols();
  const std::size_t k = num_outputs;
  MatrixD out(X.rows(), k);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(X.rows()); ++i) {
    auto x = X.row(i);
    auto s = out.row(i);
    for (std::size_t a = 0; a < k; ++a) s[a] = theta[m * k + a];
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t a = 0; a < k; ++a) s[a] += theta[j * k + a] * x[j];
    }
  }
  return out;
}

std::size_t ThresholdGridProblem::num_combinations() const {
  std::size_t total = 1;
  for (std::size_t g = 0; g < groups.size(); ++g) total *= num_levels();
  return total;
}

std::vector<std::size_t> ThresholdGridProblem::decode(std::size_t c) const {
  const std::size_t levels = num_levels();
  std::vector<std::size_t> per_action(level_thresholds.rows(), 0);
  for (std::size_t g = groups.size(); g-- > 0;) {
    const std::size_t digit = c % levels;
    c /= levels;
    for (auto a : groups[g]) per_action[a] = digit;
  }
  return per_action;
}

GridTotals threshold_grid_totals(const ThresholdGridProblem& p) {
  const std::size_t combos = p.num_combinations();
  const std::size_t n = p.predictions->rows();
  const std::size_t k = p.predictions->cols();
  GridTotals out{std::vector<double>(combos, 0.0), std::vector<double>(combos, 0.0)};
#pragma omp parallel
  {
    std::vector<double> thresholds(k);
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(combos); ++c) {
      const auto levels = p.decode(static_cast<std::size_t>(c));
      for (std::size_t a = 0; a < k; ++a) thresholds[a] = p.level_thresholds(a, levels[a]);
      double benefit = 0.0;
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = decide_row(p, p.predictions->row(i), thresholds);
        benefit += (*p.outcomes)(i, a);
        cost += p.costs[a];
      }
      out.benefit[c] = benefit;
      out.cost[c] = cost;
    }
  }
  return out;
}

MatrixD bootstrap_means(const MatrixD& per_unit, std::size_t num_resamples,
                        std::uint64_t seed) {
  const std::size_t n = per_unit.rows();
  const std::size_t v = per_unit.cols();
  MatrixD out(num_resamples, v);
  if (n == 0) return out;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(num_resamples); ++b) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    auto acc = out.row(b);
    for (std::size_t t = 0; t < n; ++t) {
      auto row = per_unit.row(pick(rng));
      for (std::size_t q = 0; q < v; ++q) acc[q] += row[q];
    }
    for (auto& s : acc) s /= static_cast<double>(n);
  }
  return out;
}

namespace reference {

double deviance_loss_grad(std::span<const double> theta, const MatrixD& X,
                          const MatrixD& reward, std::span<const std::size_t> rows,
                          std::span<double> grad) {
  const std::size_t n = row_count(X, rows);
  const std::size_t m = X.cols();
  const std::size_t k = reward.cols();
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = row_at(rows, t);
    std::vector<double> f(k), p(k);
    for (std::size_t a = 0; a < k; ++a) {
      f[a] = theta[m * k + a];
      for (std::size_t j = 0; j < m; ++j) f[a] += theta[j * k + a] * X(i, j);
    }
    double z = 0.0;
    for (std::size_t a = 0; a < k; ++a) z += std::exp(f[a]);
    double rsum = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      p[a] = std::exp(f[a]) / z;
      rsum += reward(i, a);
      if (reward(i, a) != 0.0) loss -= reward(i, a) * std::log(p[a]);
    }
    if (grad.empty()) continue;
    for (std::size_t a = 0; a < k; ++a) {
      const double d = p[a] * rsum - reward(i, a);
      for (std::size_t j = 0; j < m; ++j) grad[j * k + a] += d * X(i, j);
      grad[m * k + a] += d;
    }
  }
  if (n == 0) return 0.0;
  for (auto& g : grad) g /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

double logistic_loss_grad(std::span<const double> w, const MatrixD& X,
                          std::span<const double> y, std::span<const std::size_t> rows,
                          std::span<double> grad) {
  const std::size_t n = row_count(X, rows);
  const std::size_t m = X.cols();
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = row_at(rows, t);
    double z = w[m];
    for (std::size_t j = 0; j < m; ++j) z += w[j] * X(i, j);
    const double prob = 1.0 / (1.0 + std::exp(-z));
    loss -= y[i] * std::log(prob) + (1.0 - y[i]) * std::log1p(-prob);
    if (grad.empty()) continue;
    for (std::size_t j = 0; j < m; ++j) grad[j] += (prob - y[i]) * X(i, j);
    grad[m] += prob - y[i];
  }
  if (n == 0) return 0.0;
  for (auto& g : grad) g /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

MatrixD linear_scores(std::span<const double> theta, std::size_t num_outputs,
                      const MatrixD& X) {
  const std::size_t m = X.cols();
  MatrixD out(X.rows(), num_outputs);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t a = 0; a < num_outputs; ++a) {
      double s = theta[m * num_outputs + a];
      for (std::size_t j = 0; j < m; ++j) s += theta[j * num_outputs + a] * X(i, j);
      out(i, a) = s;
    }
  }
  return out;
}

GridTotals threshold_grid_totals(const ThresholdGridProblem& p) {
  const std::size_t combos = p.num_combinations();
  const std::size_t n = p.predictions->rows();
  const std::size_t k = p.predictions->cols();
  GridTotals out{std::vector<double>(combos, 0.0), std::vector<double>(combos, 0.0)};
  for (std::size_t c = 0; c < combos; ++c) {
    const auto levels = p.decode(c);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t chosen = p.default_action;
      double chosen_cost = 0.0;
      bool any = false;
      for (std::size_t a = 0; a < k; ++a) {
        if ((*p.predictions)(i, a) < p.level_thresholds(a, levels[a])) continue;
        if (!any || p.costs[a] < chosen_cost) {
          chosen = a;
          chosen_cost = p.costs[a];
          any = true;
        }
      }
      out.benefit[c] += (*p.outcomes)(i, chosen);
      out.cost[c] += p.costs[chosen];
    }
  }
  return out;
}

MatrixD bootstrap_means(const MatrixD& per_unit, std::size_t num_resamples,
                        std::uint64_t seed) {
  const std::size_t n = per_unit.rows();
  MatrixD out(num_resamples, per_unit.cols());
  if (n == 0) return out;
  for (std::size_t b = 0; b < num_resamples; ++b) {
    std::mt19937_64 rng(derive_seed(seed, b));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = pick(rng);
      for (std::size_t q = 0; q < per_unit.cols(); ++q) out(b, q) += per_unit(i, q);
    }
    for (std::size_t q = 0; q < per_unit.cols(); ++q) out(b, q) /= static_cast<double>(n);
  }
  return out;
}

}  // namespace reference
}  // namespace txp::kernels
