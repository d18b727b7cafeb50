// Acceptance gate: one PASS/FAIL line per criterion. `--only N` runs a
// single criterion; the exit status is nonzero when any selected criterion
// fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "txp/baselines.hpp"
#include "txp/evaluation.hpp"
#include "txp/experiment.hpp"
#include "txp/kernels.hpp"
#include "txp/outcome_models.hpp"
#include "txp/policies_indirect.hpp"
#include "txp/policy_direct.hpp"
#include "txp/synthetic.hpp"

using namespace txp;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Synthetic ordering
Verdict synthetic_ordering() {
  constexpr int kSeeds = 10;
  const ActionSet acts({{"A1", 0.0}, {"A2", 0.0}, {"A3", 0.0}});
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 999;
  const Cohort full_test = generate(spec, 100000);
  const Cohort test = full_test.subset(nonuniform_units(full_test));
  const double bayes = mean_outcome_nonuniform(test, apply_policy(BayesPolicy(spec), test.X));

  OptimizerConfig direct_opt;
  direct_opt.method = OptimMethod::kGradient;
  direct_opt.learning_rate = 0.1;
  direct_opt.l2_penalty = 1e-3;
  direct_opt.max_epochs = 50;
  direct_opt.batch_size = 0;

  Verdict v{true, "bayes=" + fmt(bayes)};
  double direct_large = 0.0;
  for (std::size_t n : {100, 1000, 10000}) {
    double direct = 0.0, indirect = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
      SyntheticSpec train_spec = spec;
      train_spec.seed = kernels::derive_seed(1, n * 100 + s);
      const Cohort train = generate(train_spec, n);
      direct_opt.seed = s;
      const auto fit = train_direct(train, acts, RewardSpec{1.0, 0.0}, direct_opt);
      direct += mean_outcome_nonuniform(test, apply_policy(fit.policy, test.X)) / kSeeds;
      TuningPlan plan;
      plan.n_splits = 5;
      plan.seed = s;
      const auto models = fit_outcome_models(train, acts, plan, default_outcome_optimizer());
      const RewardMaxPolicy indirect_policy(models, 1.0, acts);
      indirect += mean_outcome_nonuniform(test, apply_policy(indirect_policy, test.X)) / kSeeds;
    }
    v.detail += " n=" + std::to_string(n) + ":direct=" + fmt(direct) + ",indirect=" + fmt(indirect);
    if (direct < indirect) v.pass = false;
    if (n == 10000) direct_large = direct;
  }
  v.detail += " gap@1e4=" + fmt(std::abs(direct_large - bayes));
  if (std::abs(direct_large - bayes) > 0.02) v.pass = false;
  return v;
}

// ---------------------------------------------------------------------------
// 2 and 3. Bayes consistency and calibration on tabular instances
OptimizerConfig converge_config() {
  OptimizerConfig o;
  o.method = OptimMethod::kGradient;
  o.learning_rate = 0.5;
  o.max_epochs = 3000;
  o.l2_penalty = 0.0;
  return o;
}

struct TabularRun {
  std::size_t contexts = 0, agree = 0;
  double worst_calibration = 0.0;
};

const TabularRun& tabular_run() {
  static const TabularRun run = [] {
    TabularRun r;
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 20; ++t) {
      const auto inst = oracle::make_tabular(rng);
      const auto fit = train_direct(inst.cohort, inst.actions, inst.spec, converge_config());
      const MatrixD Z = fit.policy.standardization().apply(inst.cohort.X);
      // One representative row per context.
      std::vector<bool> seen(inst.contexts, false);
      for (std::size_t i = 0; i < inst.cohort.n(); ++i) {
        const auto g = inst.context_of[i];
        if (seen[g]) continue;
        seen[g] = true;
        ++r.contexts;
        if (fit.policy.decide(inst.cohort.X.row(i)) == argmax_canonical(inst.mean_reward[g])) ++r.agree;
        // Softmax of the fitted scores against normalized mean rewards.
        std::vector<double> s(inst.actions.size(), 0.0);
        for (std::size_t a = 0; a < s.size(); ++a) {
          for (std::size_t j = 0; j < Z.cols(); ++j) s[a] += fit.policy.theta()(j, a) * Z(i, j);
          s[a] += fit.policy.theta()(Z.cols(), a);
        }
        double mx = s[0], z = 0.0, total = 0.0;
        for (double x : s) mx = std::max(mx, x);
        for (double& x : s) z += (x = std::exp(x - mx));
        for (double m : inst.mean_reward[g]) total += m;
        for (std::size_t a = 0; a < s.size(); ++a) {
          r.worst_calibration =
              std::max(r.worst_calibration, std::abs(s[a] / z - inst.mean_reward[g][a] / total));
        }
      }
    }
    return r;
  }();
  return run;
}

Verdict bayes_consistency() {
  const auto& r = tabular_run();
  return {r.agree == r.contexts,
          std::to_string(r.agree) + "/" + std::to_string(r.contexts) + " contexts agree over 20 instances"};
}

Verdict calibration() {
  const auto& r = tabular_run();
  return {r.worst_calibration < 1e-3, "max deviation " + fmt(r.worst_calibration, 3)};
}

// ---------------------------------------------------------------------------
// 4. Gradient and convexity
Verdict gradient_convexity() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    const MatrixD X = test::random_matrix(50, 3, rng, -2, 2);
    RewardTable table;
    table.r = test::random_matrix(50, 4, rng, 0, 1);
    const double l2 = point % 2 == 0 ? 0.0 : 0.01;
    MatrixD theta = test::random_matrix(4, 4, rng, -1, 1);
    const MatrixD grad = surrogate_loss_and_grad(theta, X, table, l2).second;
    for (std::size_t q = 0; q < theta.data().size(); ++q) {
      const double h = 1e-5, keep = theta.data()[q];
      theta.data()[q] = keep + h;
      const double up = surrogate_loss_and_grad(theta, X, table, l2).first;
      theta.data()[q] = keep - h;
      const double down = surrogate_loss_and_grad(theta, X, table, l2).first;
      theta.data()[q] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.data()[q];
      worst = std::max(worst, std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8));
    }
  }

  // Midpoint inequality on random parameter pairs, evaluated independently.
  const MatrixD X = test::random_matrix(60, 3, rng, -2, 2);
  RewardTable table;
  table.r = test::random_matrix(60, 3, rng, 0, 1);
  std::size_t violations = 0;
  double worst_slack = -1e300;
  for (int pair = 0; pair < 1000; ++pair) {
    const MatrixD t1 = test::random_matrix(4, 3, rng, -3, 3);
    const MatrixD t2 = test::random_matrix(4, 3, rng, -3, 3);
    MatrixD mid(4, 3);
    for (std::size_t q = 0; q < mid.data().size(); ++q) mid.data()[q] = 0.5 * (t1.data()[q] + t2.data()[q]);
    const double lhs = surrogate_loss_and_grad(mid, X, table, 0.0).first;
    const double rhs = 0.5 * surrogate_loss_and_grad(t1, X, table, 0.0).first +
                       0.5 * surrogate_loss_and_grad(t2, X, table, 0.0).first;
    worst_slack = std::max(worst_slack, lhs - rhs);
    if (lhs > rhs + 1e-10) ++violations;
  }
  return {worst < 1e-5 && violations == 0,
          "max gradient rel err " + fmt(worst, 3) + ", convexity violations " +
              std::to_string(violations) + "/1000 (worst midpoint slack " + fmt(worst_slack, 3) + ")"};
}

// ---------------------------------------------------------------------------
// 5. Threshold search equals brute force
Verdict threshold_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> levels_pick(1, 3), n_pick(4, 50), sets_pick(1, 3), cost_pick(0, 1);
  std::normal_distribution<double> z;
  std::size_t mismatches = 0, infeasible = 0, non_monotone = 0, checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 2;
    std::vector<ActionSet::Action> list = {{"A", 0.0}};
    for (std::size_t a = 1; a < k; ++a) list.push_back({"B" + std::to_string(a), double(cost_pick(rng))});
    const ActionSet acts(list);
    std::vector<LogisticModel> models;
    for (std::size_t a = 0; a < k; ++a) models.push_back(oracle::feature_model(k, a, 1.5));
    auto cohort = [&](std::size_t n) {
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
    };
    // Threshold tables need both outcome classes per action in training.
    auto both_classes = [&](const Cohort& c) {
      for (std::size_t a = 0; a < k; ++a) {
        std::size_t ones = 0;
        for (std::size_t i = 0; i < c.n(); ++i) ones += c.Y(i, a);
        if (ones == 0 || ones == c.n()) return false;
      }
      return true;
    };
    Cohort train = cohort(n_pick(rng));
    while (!both_classes(train)) train = cohort(n_pick(rng));
    std::vector<Cohort> val;
    for (int s = sets_pick(rng); s > 0; --s) val.push_back(cohort(n_pick(rng)));
    ThresholdGrid grid;
    const int L = levels_pick(rng);
    grid.fnr_levels.clear();
    for (int l = 0; l < L; ++l) grid.fnr_levels.push_back(L == 1 ? 0.5 : double(l) / (L - 1));
    if (k == 3 && trial % 4 == 1) grid.tie_groups = {{1, 2}};
    const MatrixD table = threshold_table(models, train, grid.fnr_levels);
    const std::vector<double> budgets = {0.0, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0};

    const auto got = search_thresholds(models, acts, grid, table, val, BudgetGrid{budgets}, 0);
    const auto want = oracle::threshold_search(models, acts, grid.groups(k), table, val, budgets, 0);
    double prev = -1.0;
    for (std::size_t j = 0; j < budgets.size(); ++j) {
      ++checked;
      const bool same = got[j].fallback == want[j].fallback && got[j].thresholds == want[j].thresholds &&
                        (want[j].fallback || got[j].combination == want[j].rank);
      if (!same) ++mismatches;
      // Empirical cost of the selected policy on the validation sets.
      const ThresholdPolicy policy = make_threshold_policy(models, acts, got[j], 0);
      double cost = 0.0, benefit = 0.0;
      for (const auto& v : val) {
        double c = 0.0, b = 0.0;
        for (std::size_t i = 0; i < v.n(); ++i) {
          const auto a = policy.decide(v.X.row(i));
          c += acts.cost(a);
          b += v.Y(i, a);
        }
        cost += c / v.n() / val.size();
        benefit += b / v.n() / val.size();
      }
      if (!got[j].fallback && cost > budgets[j] + 1e-12) ++infeasible;
      if (benefit < prev - 1e-12 && !got[j].fallback) ++non_monotone;
      if (!got[j].fallback) prev = benefit;
    }
  }
  return {mismatches == 0 && infeasible == 0 && non_monotone == 0,
          std::to_string(checked) + " budget selections, " + std::to_string(mismatches) +
              " mismatches, " + std::to_string(infeasible) + " over budget, " +
              std::to_string(non_monotone) + " benefit decreases"};
}

// ---------------------------------------------------------------------------
// 6. Baseline calibration
Verdict baseline_calibration() {
  const ActionSet acts({{"A1", 0.0}, {"A2", 0.0}, {"A3", 1.0}});
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 606;
  ClinicianSim sim;
  sim.noise_rate = 0.3;
  sim.bias = {0.8, 0.0, -0.5};
  sim.seed = 607;
  const std::size_t n = 5000;
  const Cohort cohort = simulate_clinician(sim, generate(spec, n), 3);
  TuningPlan plan;
  plan.n_splits = 3;
  plan.seed = 608;
  const auto models = fit_outcome_models(cohort, acts, plan, default_outcome_optimizer());
  const auto targets = doctor_counts(cohort, acts);
  const auto tol = default_count_tolerance(n);
  const auto costs = calibrate_costs(models, cohort, targets, default_calibration_step(n), 500, tol);
  std::size_t dev = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    dev = std::max<std::size_t>(dev, costs.counts[a] > targets[a] ? costs.counts[a] - targets[a]
                                                                   : targets[a] - costs.counts[a]);
  }

  // Targets equal to the unconstrained counts leave c at zero.
  const MatrixD eff = predict_all(models, cohort.X);
  std::vector<std::size_t> own(3, 0);
  for (std::size_t i = 0; i < n; ++i) ++own[unconstrained_choice(eff.row(i))];
  const auto fixed = calibrate_costs_from_predictions(eff, own, 1.0, 500, 0);
  const bool fixed_ok = fixed.converged && fixed.trace.size() == 1 &&
                        fixed.c == std::vector<double>(3, 0.0) && fixed.counts == own;

  return {costs.converged && dev <= tol && fixed_ok,
          "max count deviation " + std::to_string(dev) + " (tolerance " + std::to_string(tol) +
              ") after " + std::to_string(costs.best_iteration) + " iterations, fixed point " +
              (fixed_ok ? "exact" : "broken")};
}

// ---------------------------------------------------------------------------
// 7. Frontier dominance over a simulated clinician
Verdict frontier_dominance() {
  test::TempDir dir;
  ExperimentConfig cfg;
  cfg.actions = test::uti_actions();
  cfg.seed = 707;
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.k = 4;
  cfg.synth.spec = with_target_means(spec, {0.890, 0.804, 0.936, 0.935});
  cfg.synth.n_train = 5000;
  cfg.synth.n_test = 20000;
  ClinicianSim sim;
  sim.noise_rate = 0.3;
  cfg.synth.clinician = sim;
  cfg.out_dir = (dir / "data").string();
  cmd_synth_gen(cfg);

  cfg.train_path = (dir / "data" / "train.csv").string();
  cfg.test_path = (dir / "data" / "test.csv").string();
  cfg.out_dir = (dir / "runs").string();
  cfg.methods = {"thresholding", "reward-max", "direct"};
  cfg.tuning.n_splits = 5;
  const auto result = cmd_frontier(cfg);
  std::ifstream in(result.run_dir / "frontier.json");
  const auto points = nlohmann::json::parse(in).at("points");

  double doc_iat = 0.0, doc_cost = 0.0;
  for (const auto& p : points) {
    if (p["method"] == "doctor") {
      doc_iat = p["iat"].get<double>();
      doc_cost = p["cost"].get<double>();
    }
  }
  Verdict v{true, "doctor iat=" + fmt(doc_iat) + " cost=" + fmt(doc_cost)};
  for (const std::string method : {"thresholding", "reward-max", "direct"}) {
    std::size_t dominating = 0, total = 0;
    for (const auto& p : points) {
      if (p["method"] != method) continue;
      ++total;
      if (p["iat"].get<double>() <= doc_iat && p["cost"].get<double>() <= doc_cost) ++dominating;
    }
    v.detail += "; " + method + " " + std::to_string(dominating) + "/" + std::to_string(total);
    if (dominating == 0) v.pass = false;
  }
  return v;
}

// ---------------------------------------------------------------------------
// 8. Deferral mechanics
Verdict deferral() {
  std::string detail;
  bool pass = true;

  // Dyadic rewards and lambdas make the shift exactly representable.
  std::mt19937_64 rng(808);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  std::vector<std::vector<double>> x;
  std::vector<std::vector<int>> y;
  std::vector<std::size_t> doctor;
  for (int i = 0; i < 200; ++i) {
    x.push_back({0.0});
    y.push_back({coin(rng), coin(rng), coin(rng), coin(rng)});
    doctor.push_back(pick(rng));
  }
  const Cohort toy = test::make_cohort(x, y, doctor);
  const ActionSet acts = test::uti_actions();
  std::size_t shift_errors = 0;
  for (double l1 : {0.015625, 0.03125}) {
    for (double l2 : {0.0625, 0.09375}) {
      const auto r1 = build_rewards(toy, acts, RewardSpec{0.75, l1});
      const auto r2 = build_rewards(toy, acts, RewardSpec{0.75, l2});
      for (std::size_t i = 0; i < toy.n(); ++i) {
        if (r2.r(i, 4) - r1.r(i, 4) != l2 - l1) ++shift_errors;
        for (std::size_t a = 0; a < 4; ++a) {
          if (r1.r(i, a) != r2.r(i, a)) ++shift_errors;
        }
      }
    }
  }
  detail += "reward shift errors " + std::to_string(shift_errors);
  pass = pass && shift_errors == 0;

  test::TempDir dir;
  ExperimentConfig cfg;
  cfg.actions = test::uti_actions();
  cfg.seed = 809;
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.k = 4;
  cfg.synth.spec = with_target_means(spec, {0.890, 0.804, 0.936, 0.935});
  cfg.synth.n_train = 3000;
  cfg.synth.n_test = 5000;
  ClinicianSim sim;
  sim.noise_rate = 0.3;
  cfg.synth.clinician = sim;
  cfg.out_dir = (dir / "data").string();
  cmd_synth_gen(cfg);
  cfg.train_path = (dir / "data" / "train.csv").string();
  cfg.test_path = (dir / "data" / "test.csv").string();
  cfg.out_dir = (dir / "runs").string();
  cfg.n_bootstrap = 0;

  const auto sweep = cmd_defer_sweep(cfg);
  std::ifstream sin(sweep.run_dir / "defer_sweep.json");
  const auto report = nlohmann::json::parse(sin);
  const auto& rows = report["rows"];
  const bool full_grid = rows.size() == 21 && rows.front()["lambda"] == 0.0 && rows.back()["lambda"] == 0.1;

  cfg.method = "direct";
  cfg.omega = cfg.defer_omega;
  cfg.lambda = 0.0;
  const auto trained = cmd_train(cfg);
  ExperimentConfig ecfg = cfg;
  ecfg.policy_path = (trained.run_dir / "policy.json").string();
  const auto evaluated = cmd_eval(ecfg);
  std::ifstream ein(evaluated.run_dir / "eval.json");
  const auto eval = nlohmann::json::parse(ein);
  const bool zero_matches = rows.front()["overall_iat"] == eval["iat"] &&
                            rows.front()["overall_cost"] == eval["cost"] &&
                            rows.front()["defer_rate"] == 0.0;
  detail += ", lambda=0 equals no-defer eval: " + std::string(zero_matches ? "yes" : "no");
  detail += ", sweep rows " + std::to_string(rows.size());
  pass = pass && full_grid && zero_matches;
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 9. Reproducibility through the CLI
int run_cli(const std::string& args) {
  const std::string cmd = std::string(TXP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path only_subdir(const fs::path& p) {
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_directory()) return e.path();
  }
  return {};
}

Verdict reproducibility() {
  test::TempDir dir;
  test::write_file(dir / "actions.json", R"({"actions": [{"label": "A1", "cost": 0},
    {"label": "A2", "cost": 0}, {"label": "A3", "cost": 1}]})");
  test::write_file(dir / "synth.json",
                   R"({"actions": ")" + (dir / "actions.json").string() +
                       R"(", "synth": {"n_train": 1500, "n_test": 4000, "clinician": {"rule": "argmax-features", "noise_rate": 0.3}}})");
  if (run_cli("synth-gen --config " + (dir / "synth.json").string() + " --seed 9 --out " +
              (dir / "data").string()) != 0) {
    return {false, "synth-gen failed"};
  }
  test::write_file(dir / "frontier.json",
                   R"({"actions": ")" + (dir / "actions.json").string() + R"(", "train": ")" +
                       (dir / "data" / "train.csv").string() + R"(", "test": ")" +
                       (dir / "data" / "test.csv").string() +
                       R"(", "methods": ["thresholding", "reward-max", "direct", "baseline-constrained"],
                          "tuning": {"n_splits": 3}})");
  for (const char* run : {"run1", "run2"}) {
    if (run_cli("frontier --config " + (dir / "frontier.json").string() + " --seed 42 --out " +
                (dir / run).string()) != 0) {
      return {false, std::string("frontier ") + run + " failed"};
    }
  }
  const auto a = test::read_file(only_subdir(dir / "run1") / "frontier.csv");
  const auto b = test::read_file(only_subdir(dir / "run2") / "frontier.csv");
  const bool same = !a.empty() && a == b;
  return {same, std::to_string(a.size()) + " bytes, identical: " + (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"synthetic ordering", synthetic_ordering},
      {"Bayes consistency", bayes_consistency},
      {"calibration", calibration},
      {"gradient and convexity", gradient_convexity},
      {"threshold search oracle", threshold_oracle},
      {"baseline calibration", baseline_calibration},
      {"frontier dominance", frontier_dominance},
      {"deferral mechanics", deferral},
      {"reproducibility", reproducibility},
  };
  std::size_t only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::stoul(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }
  if (only > criteria.size()) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }

  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (only != 0 && only != c + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c + 1 << " (" << criteria[c].first
              << "): " << v.detail << " [" << fmt(secs, 3) << "s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
