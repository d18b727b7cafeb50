#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation in
// txp::kernels and a plain serial loop in txp::kernels::reference that the
// tests hold it against. The parallel versions reduce fixed-size row blocks
// in block order, so their results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "txp/matrix.hpp"

namespace txp::kernels {

inline constexpr std::size_t kBlockRows = 256;

// Mean over the selected rows of -sum_a r(i,a) * log softmax_a(theta^T [x_i;1]).
// theta is (m+1) x K row-major with the intercept row last. An empty `rows`
// selects every row. `grad` is overwritten when non-empty.
double deviance_loss_grad(std::span<const double> theta, const MatrixD& X,
                          const MatrixD& reward, std::span<const std::size_t> rows,
                          std::span<double> grad);

// Mean binary cross-entropy of sigmoid(w^T [x;1]) against y in {0,1}; w has
// m+1 entries with the intercept last.
double logistic_loss_grad(std::span<const double> w, const MatrixD& X,
                          std::span<const double> y, std::span<const std::size_t> rows,
                          std::span<double> grad);

// Scores theta^T [x_i;1] for every row: n x K.
MatrixD linear_scores(std::span<const double> theta, std::size_t num_outputs,
                      const MatrixD& X);

// Exhaustive threshold-grid evaluation. Actions are partitioned into groups
// that share a level; combination c encodes one level per group in base L
// with group 0 the most significant digit. A unit receives the cheapest
// action whose prediction reaches its threshold (lowest index on ties), or
// `default_action` when none does.
struct ThresholdGridProblem {
  const MatrixD* predictions = nullptr;           // n x K
  const Matrix<std::uint8_t>* outcomes = nullptr;  // n x K
  std::vector<double> costs;                      // K
  MatrixD level_thresholds;                       // K x L
  std::vector<std::vector<std::size_t>> groups;   // partition of [0,K)
  std::size_t default_action = 0;

  std::size_t num_levels() const { return level_thresholds.cols(); }
  std::size_t num_combinations() const;
  // Per-action level indices for combination c.
  std::vector<std::size_t> decode(std::size_t c) const;
};

struct GridTotals {
  std::vector<double> benefit;  // per combination, summed over units
  std::vector<double> cost;
};

GridTotals threshold_grid_totals(const ThresholdGridProblem& problem);

// Bootstrap means of per-unit values. Returns B x V (one row per resample,
// one column per value series). Resample b draws n indices with a generator
// seeded from (seed, b).
MatrixD bootstrap_means(const MatrixD& per_unit, std::size_t num_resamples,
                        std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

namespace reference {

double deviance_loss_grad(std::span<const double> theta, const MatrixD& X,
                          const MatrixD& reward, std::span<const std::size_t> rows,
                          std::span<double> grad);
double logistic_loss_grad(std::span<const double> w, const MatrixD& X,
                          std::span<const double> y, std::span<const std::size_t> rows,
                          std::span<double> grad);
MatrixD linear_scores(std::span<const double> theta, std::size_t num_outputs,
                      const MatrixD& X);
GridTotals threshold_grid_totals(const ThresholdGridProblem& problem);
MatrixD bootstrap_means(const MatrixD& per_unit, std::size_t num_resamples,
                        std::uint64_t seed);

}  // namespace reference

}  // namespace txp::kernels
