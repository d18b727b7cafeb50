#include "txp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "txp/kernels.hpp"

namespace txp {
namespace {

MetricSummary summarize(const MatrixD& draws, std::size_t col) {
  MetricSummary s;
  const std::size_t b = draws.rows();
  if (b == 0) return s;
  for (std::size_t r = 0; r < b; ++r) s.mean += draws(r, col);
  s.mean /= static_cast<double>(b);
  if (b > 1) {
    double ss = 0.0;
    for (std::size_t r = 0; r < b; ++r) ss += (draws(r, col) - s.mean) * (draws(r, col) - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(b - 1));
  }
  return s;
}

}  // namespace

PolicyEval evaluate_decisions(std::span<const std::size_t> decisions, const Cohort& cohort,
                              const ActionSet& actions, std::size_t n_bootstrap,
                              std::uint64_t seed) {
  const std::size_t k = actions.size();
  if (cohort.k() != k) throw ShapeError("cohort outcome table does not match the action set");
  if (decisions.size() != cohort.n()) throw ShapeError("one decision per unit required");
  // Columns: inappropriate therapy indicator, cost, deferred indicator.
  MatrixD per_unit(cohort.n(), 3);
  PolicyEval eval;
  eval.n = cohort.n();
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    std::size_t a = decisions[i];
    const bool deferred = a == k;
    if (a > k) throw DataError("decision index out of range");
    if (deferred) {
      if (!cohort.has_doctor()) {
        throw ConfigError("policy deferred but the cohort has no doctor_action");
      }
      a = (*cohort.doctor_action)[i];
    }
    per_unit(i, 0) = 1.0 - cohort.Y(i, a);
    per_unit(i, 1) = actions.cost(a);
    per_unit(i, 2) = deferred ? 1.0 : 0.0;
    if (!deferred) ++eval.n_decided;
  }
  if (cohort.n() > 0) {
    double sums[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < cohort.n(); ++i) {
      for (int q = 0; q < 3; ++q) sums[q] += per_unit(i, q);
    }
    const double n = static_cast<double>(cohort.n());
    eval.iat_rate = sums[0] / n;
    eval.cost_rate = sums[1] / n;
    eval.defer_rate = sums[2] / n;
  }
  if (n_bootstrap > 0 && cohort.n() > 0) {
    const MatrixD draws = kernels::bootstrap_means(per_unit, n_bootstrap, seed);
    BootstrapSummary summary;
    summary.resamples = n_bootstrap;
    summary.iat = summarize(draws, 0);
    summary.cost = summarize(draws, 1);
    summary.defer = summarize(draws, 2);
    eval.bootstrap = summary;
  }
  return eval;
}

PolicyEval evaluate_policy(const Policy& policy, const Cohort& cohort, const ActionSet& actions,
                           std::size_t n_bootstrap, std::uint64_t seed) {
  if (policy.can_defer() && !cohort.has_doctor()) {
    throw ConfigError("evaluating a deferring policy requires doctor_action in the cohort");
  }
  const auto decisions = apply_policy(policy, cohort.X);
  return evaluate_decisions(decisions, cohort, actions, n_bootstrap, seed);
}

PolicyEval doctor_eval(const Cohort& cohort, const ActionSet& actions, std::size_t n_bootstrap,
                       std::uint64_t seed) {
  if (!cohort.has_doctor()) throw ConfigError("cohort has no doctor_action column");
  return evaluate_decisions(*cohort.doctor_action, cohort, actions, n_bootstrap, seed);
}

bool dominates(const PolicyEval& p, const PolicyEval& q) {
  const double pi = p.reported_iat(), pc = p.reported_cost();
  const double qi = q.reported_iat(), qc = q.reported_cost();
  return pi <= qi && pc <= qc && (pi < qi || pc < qc);
}

std::vector<FrontierPoint> assemble_frontier(std::vector<FrontierPoint> points) {
  for (auto& p : points) {
    p.dominated = std::any_of(points.begin(), points.end(),
                              [&](const FrontierPoint& q) { return dominates(q.eval, p.eval); });
  }
  std::stable_sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.eval.reported_iat() != b.eval.reported_iat()) {
      return a.eval.reported_iat() < b.eval.reported_iat();
    }
    return a.eval.reported_cost() < b.eval.reported_cost();
  });
  return points;
}

std::string frontier_csv(std::span<const FrontierPoint> points) {
  std::ostringstream out;
  out << "method,param,iat,iat_sd,cost,cost_sd,defer_rate,dominated\n";
  for (const auto& p : points) {
    const auto& e = p.eval;
    out << csv::quote(p.method) << ',' << csv::format_double(p.param) << ','
        << csv::format_double(e.reported_iat()) << ','
        << (e.bootstrap ? csv::format_double(e.bootstrap->iat.sd) : "") << ','
        << csv::format_double(e.reported_cost()) << ','
        << (e.bootstrap ? csv::format_double(e.bootstrap->cost.sd) : "") << ','
        << csv::format_double(e.defer_rate) << ',' << (p.dominated ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string frontier_json(std::span<const FrontierPoint> points) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& p : points) {
    nlohmann::ordered_json item;
    item["method"] = p.method;
    item["param"] = p.param;
    item["iat"] = p.eval.reported_iat();
    item["cost"] = p.eval.reported_cost();
    item["iat_point"] = p.eval.iat_rate;
    item["cost_point"] = p.eval.cost_rate;
    item["defer_rate"] = p.eval.defer_rate;
    item["n"] = p.eval.n;
    item["n_decided"] = p.eval.n_decided;
    if (p.eval.bootstrap) {
      item["bootstrap"] = {{"resamples", p.eval.bootstrap->resamples},
                           {"iat_sd", p.eval.bootstrap->iat.sd},
                           {"cost_sd", p.eval.bootstrap->cost.sd},
                           {"defer_mean", p.eval.bootstrap->defer.mean}};
    }
    item["dominated"] = p.dominated;
    item["policy_ref"] = p.policy_ref;
    doc.push_back(std::move(item));
  }
  return doc.dump(2);
}

DecisionCohortReport decision_cohort_analysis(const Policy& policy, const Cohort& cohort,
                                              const ActionSet& actions) {
  if (!policy.can_defer()) throw ConfigError("decision-cohort analysis needs a deferring policy");
  if (!cohort.has_doctor()) throw ConfigError("decision-cohort analysis needs doctor_action");
  const auto decisions = apply_policy(policy, cohort.X);
  const std::size_t k = actions.size();
  std::vector<std::size_t> decided;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] != k) decided.push_back(i);
  }
  DecisionCohortReport report;
  report.n_decided = decided.size();
  report.defer_rate = cohort.n() == 0 ? 0.0
                                      : 1.0 - static_cast<double>(decided.size()) /
                                                  static_cast<double>(cohort.n());
  if (decided.empty()) {
    report.empty = true;
    return report;
  }
  const Cohort sub = cohort.subset(decided);
  std::vector<std::size_t> sub_decisions;
  for (auto i : decided) sub_decisions.push_back(decisions[i]);
  report.policy = evaluate_decisions(sub_decisions, sub, actions, 0, 0);
  report.doctor = evaluate_decisions(*sub.doctor_action, sub, actions, 0, 0);
  return report;
}

}  // namespace txp
