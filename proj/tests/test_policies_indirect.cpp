#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "txp/error.hpp"
#include "txp/policies_indirect.hpp"

using namespace txp;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Three actions on three features: model a reads feature a.
std::vector<LogisticModel> toy_models(std::size_t k) {
  std::vector<LogisticModel> models;
  for (std::size_t a = 0; a < k; ++a) models.push_back(oracle::feature_model(k, a, 1.5));
  return models;
}

Cohort toy_cohort(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<int>> y;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(k);
    std::vector<int> out(k);
    for (std::size_t a = 0; a < k; ++a) {
      row[a] = z(rng);
      out[a] = row[a] + z(rng) > -0.3;
    }
    x.push_back(row);
    y.push_back(out);
  }
  return test::make_cohort(x, y);
}

}  // namespace

TEST_CASE("threshold choice picks the cheapest effective action") {
  const auto acts = test::uti_actions();
  const std::vector<double> f = {0.6, 0.8, 0.9, 0.95};
  CHECK(threshold_choice(f, std::vector<double>{0.7, 0.7, 0.9, 0.9}, acts, 0) == 1);
  CHECK(threshold_choice(f, std::vector<double>{0.99, 0.99, 0.99, 0.99}, acts, 0) == 0);
  CHECK(threshold_choice(f, std::vector<double>{0, 0, 0, 0}, acts, 0) == 0);
  CHECK(threshold_choice(f, std::vector<double>{0.99, 0.99, 0.9, 0.9}, acts, 0) == 2);
  CHECK(threshold_choice(f, std::vector<double>{kInf, kInf, kInf, kInf}, acts, 1) == 1);
}

TEST_CASE("threshold policy validates its inputs") {
  const auto acts = test::uti_actions();
  const auto models = toy_models(4);
  CHECK_THROWS_AS(ThresholdPolicy(models, {0.5, 0.5, 0.5, 0.5}, acts, 2), ConfigError);
  CHECK_THROWS_AS(ThresholdPolicy(models, {0.5, 1.5, 0.5, 0.5}, acts, 0), ConfigError);
  const ThresholdPolicy p(models, {0.0, 0.0, 0.0, 0.0}, acts, 0);
  std::mt19937_64 rng(1);
  const MatrixD X = test::random_matrix(30, 4, rng, -3, 3);
  for (std::size_t i = 0; i < X.rows(); ++i) CHECK(threshold_decide(p, X.row(i)) == 0);
}

TEST_CASE("raising a threshold never adds units to that action") {
  const auto acts = test::uti_actions();
  const auto models = toy_models(4);
  std::mt19937_64 rng(2);
  const MatrixD X = test::random_matrix(400, 4, rng, -3, 3);
  for (std::size_t a = 0; a < 4; ++a) {
    std::size_t prev = X.rows() + 1;
    for (double t = 0.0; t <= 1.0; t += 0.1) {
      std::vector<double> th = {0.5, 0.5, 0.5, 0.5};
      th[a] = t;
      const ThresholdPolicy p(models, th, acts, 0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto f = predict_all(models, X.select_rows(std::vector<std::size_t>{i}));
        const bool effective = f(0, a) >= t;
        const std::size_t d = p.decide(X.row(i));
        if (d == a && a != 0) CHECK(effective);
        count += d == a;
      }
      if (a != 0) CHECK(count <= prev);
      prev = count;
    }
  }
}

TEST_CASE("grid cardinality with tied actions") {
  ThresholdGrid g;
  g.tie_groups = {{2, 3}};
  CHECK(g.cardinality(4) == 1331);
  CHECK(g.groups(4) == std::vector<std::vector<std::size_t>>{{0}, {1}, {2, 3}});
  ThresholdGrid bad;
  bad.tie_groups = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(bad.groups(3), ConfigError);
}

TEST_CASE("budget grid") {
  const auto g = BudgetGrid::default_grid();
  CHECK(g.budgets.size() == 43);
  CHECK(g.budgets.front() == 0.01);
  CHECK(g.budgets[5] == 0.075);
  CHECK(g.budgets.back() == 1.0);
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS((BudgetGrid{{0.2, 0.1}}.validate()), ConfigError);
  CHECK_THROWS_AS((BudgetGrid{{0.1, 0.1}}.validate()), ConfigError);
}

TEST_CASE("threshold search equals exhaustive enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> levels_pick(1, 3), n_pick(4, 50), sets_pick(1, 3), cost_pick(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t k = trial % 2 == 0 ? 3 : 2;
    std::vector<ActionSet::Action> list = {{"A", 0.0}};
    for (std::size_t a = 1; a < k; ++a) list.push_back({"B" + std::to_string(a), double(cost_pick(rng))});
    const ActionSet acts(list);
    const auto models = toy_models(k);
    const Cohort train = toy_cohort(n_pick(rng), k, rng);
    std::vector<Cohort> val;
    for (int s = sets_pick(rng); s > 0; --s) val.push_back(toy_cohort(n_pick(rng), k, rng));

    ThresholdGrid grid;
    const int L = levels_pick(rng);
    grid.fnr_levels.clear();
    for (int l = 0; l < L; ++l) grid.fnr_levels.push_back(L == 1 ? 0.5 : double(l) / (L - 1));
    if (k == 3 && trial % 4 == 0) grid.tie_groups = {{1, 2}};
    const MatrixD table = trial % 3 == 0 ? test::random_matrix(k, L, rng, 0.0, 1.0)
                                         : threshold_table(models, train, grid.fnr_levels);
    const BudgetGrid budgets{{0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0}};

    const auto got = search_thresholds(models, acts, grid, table, val, budgets, 0);
    const auto want = oracle::threshold_search(models, acts, grid.groups(k), table, val,
                                               budgets.budgets, 0);
    REQUIRE(got.size() == want.size());
    double prev_benefit = -1.0;
    for (std::size_t j = 0; j < got.size(); ++j) {
      CAPTURE(trial);
      CAPTURE(j);
      CHECK(got[j].fallback == want[j].fallback);
      if (!want[j].fallback) CHECK(got[j].combination == want[j].rank);
      CHECK(got[j].thresholds == want[j].thresholds);
      CHECK(got[j].mean_cost <= budgets.budgets[j] + 1e-12);
      if (!got[j].fallback) CHECK(got[j].mean_benefit == doctest::Approx(want[j].mean_benefit));
      CHECK(got[j].mean_benefit >= prev_benefit - 1e-12);
      prev_benefit = got[j].mean_benefit;
    }
  }
}

TEST_CASE("search edge budgets") {
  std::mt19937_64 rng(4);
  const auto acts = ActionSet({{"A", 0.0}, {"B", 0.0}, {"C", 1.0}});
  const auto models = toy_models(3);
  const Cohort train = toy_cohort(60, 3, rng);
  const std::vector<Cohort> val = {toy_cohort(40, 3, rng)};
  ThresholdGrid grid;
  const MatrixD table = threshold_table(models, train, grid.fnr_levels);
  const auto picks = search_thresholds(models, acts, grid, table, val, BudgetGrid{{0.0, 1.0}}, 0);
  // Budget 0: only zero-cost policies are feasible.
  CHECK(picks[0].mean_cost == 0.0);
  const ThresholdPolicy p0 = make_threshold_policy(models, acts, picks[0], 0);
  for (std::size_t i = 0; i < val[0].n(); ++i) CHECK(acts.cost(p0.decide(val[0].X.row(i))) == 0.0);
  // Budget 1: the unconstrained maximum.
  double best = 0.0;
  const auto all = oracle::threshold_search(models, acts, grid.groups(3), table, val, {1.0}, 0);
  best = all[0].mean_benefit;
  CHECK(picks[1].mean_benefit == doctest::Approx(best));
}

TEST_CASE("reward maximization choice") {
  const auto acts = test::uti_actions();
  const std::vector<double> f = {0.7, 0.7, 0.95, 0.9};
  CHECK(reward_max_choice(f, 0.8, acts) == 0);
  CHECK(reward_max_choice(f, 1.0, acts) == 2);
  CHECK(reward_max_choice(std::vector<double>{0.1, 0.2, 0.99, 0.99}, 0.0, acts) == 0);
  // Positive rescaling of predicted rewards keeps the argmax.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r = {u(rng), u(rng), u(rng), u(rng)};
    std::vector<double> s = r;
    const double c = 0.1 + 5 * u(rng);
    for (auto& v : s) v *= c;
    CHECK(argmax_canonical(r) == argmax_canonical(s));
  }
}

TEST_CASE("omega sweep") {
  const auto acts = test::uti_actions();
  const auto models = toy_models(4);
  CHECK(sweep_omega(models, {1.0}, acts).size() == 1);
  CHECK(sweep_omega(models, {0.9, 1.0, 0.9}, acts).size() == 2);
  const auto grid = default_omega_grid();
  CHECK(grid.size() == 31);
  CHECK(grid.front() == 0.85);
  CHECK(grid.back() == 1.0);
  CHECK(sweep_omega(models, grid, acts).size() == 31);
  CHECK_THROWS_AS(sweep_omega(models, {1.5}, acts), ConfigError);
}
