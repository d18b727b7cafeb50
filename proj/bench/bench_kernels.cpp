// Serial reference vs OpenMP kernels. Range argument: number of rows.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "txp/kernels.hpp"

namespace {

using txp::MatrixD;
namespace k = txp::kernels;

MatrixD random_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixD m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

constexpr std::size_t kFeatures = 30;
constexpr std::size_t kActions = 4;

template <bool Parallel>
void BM_Deviance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD X = random_matrix(n, kFeatures, -2, 2, 1);
  const MatrixD r = random_matrix(n, kActions, 0, 1, 2);
  const MatrixD theta = random_matrix(kFeatures + 1, kActions, -0.5, 0.5, 3);
  std::vector<double> grad(theta.data().size());
  for (auto _ : state) {
    const double loss = Parallel ? k::deviance_loss_grad(theta.data(), X, r, {}, grad)
                                 : k::reference::deviance_loss_grad(theta.data(), X, r, {}, grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Logistic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD X = random_matrix(n, kFeatures, -2, 2, 4);
  std::vector<double> y(n);
  std::mt19937_64 rng(5);
  for (auto& v : y) v = static_cast<double>(rng() & 1U);
  const MatrixD w = random_matrix(kFeatures + 1, 1, -0.5, 0.5, 6);
  std::vector<double> grad(kFeatures + 1);
  for (auto _ : state) {
    const double loss = Parallel ? k::logistic_loss_grad(w.data(), X, y, {}, grad)
                                 : k::reference::logistic_loss_grad(w.data(), X, y, {}, grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_ThresholdGrid(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD predictions = random_matrix(n, kActions, 0, 1, 7);
  txp::Matrix<std::uint8_t> outcomes(n, kActions);
  std::mt19937_64 rng(8);
  for (auto& v : outcomes.data()) v = static_cast<std::uint8_t>(rng() & 1U);
  k::ThresholdGridProblem problem;
  problem.predictions = &predictions;
  problem.outcomes = &outcomes;
  problem.costs = {0.0, 0.0, 1.0, 1.0};
  problem.level_thresholds = random_matrix(kActions, 11, 0, 1, 9);
  problem.groups = {{0}, {1}, {2, 3}};
  for (auto _ : state) {
    auto totals = Parallel ? k::threshold_grid_totals(problem) : k::reference::threshold_grid_totals(problem);
    benchmark::DoNotOptimize(totals.benefit.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * problem.num_combinations()));
}

template <bool Parallel>
void BM_Bootstrap(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD per_unit = random_matrix(n, 3, 0, 1, 10);
  for (auto _ : state) {
    auto draws = Parallel ? k::bootstrap_means(per_unit, 20, 11) : k::reference::bootstrap_means(per_unit, 20, 11);
    benchmark::DoNotOptimize(draws.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 20));
}

BENCHMARK(BM_Deviance<false>)->Name("deviance/serial")->Arg(10000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_Deviance<true>)->Name("deviance/openmp")->Arg(10000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_Logistic<false>)->Name("logistic/serial")->Arg(10000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_Logistic<true>)->Name("logistic/openmp")->Arg(10000)->Arg(100000)->UseRealTime();
BENCHMARK(BM_ThresholdGrid<false>)->Name("threshold_grid/serial")->Arg(2000)->UseRealTime();
BENCHMARK(BM_ThresholdGrid<true>)->Name("threshold_grid/openmp")->Arg(2000)->UseRealTime();
BENCHMARK(BM_Bootstrap<false>)->Name("bootstrap/serial")->Arg(100000)->UseRealTime();
BENCHMARK(BM_Bootstrap<true>)->Name("bootstrap/openmp")->Arg(100000)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
