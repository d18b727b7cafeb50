#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txp/core.hpp"

namespace txp {

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct BootstrapSummary {
  std::size_t resamples = 0;
  MetricSummary iat;
  MetricSummary cost;
  MetricSummary defer;
  friend bool operator==(const BootstrapSummary&, const BootstrapSummary&) = default;
};

// IAT = share of units given an action they do not benefit from; cost rate
// = mean cost of the realized action. Deferred units realize the doctor's
// choice.
struct PolicyEval {
  double iat_rate = 0.0;
  double cost_rate = 0.0;
  double defer_rate = 0.0;
  std::size_t n = 0;
  std::size_t n_decided = 0;
  std::optional<BootstrapSummary> bootstrap;

  // Bootstrap means when available, point estimates otherwise.
  double reported_iat() const { return bootstrap ? bootstrap->iat.mean : iat_rate; }
  double reported_cost() const { return bootstrap ? bootstrap->cost.mean : cost_rate; }
  friend bool operator==(const PolicyEval&, const PolicyEval&) = default;
};

// `decisions` index the action set; the value K (= number of actions) means
// defer.
PolicyEval evaluate_decisions(std::span<const std::size_t> decisions, const Cohort& cohort,
                              const ActionSet& actions, std::size_t n_bootstrap,
                              std::uint64_t seed);

PolicyEval evaluate_policy(const Policy& policy, const Cohort& cohort, const ActionSet& actions,
                           std::size_t n_bootstrap = 20, std::uint64_t seed = 0);

PolicyEval doctor_eval(const Cohort& cohort, const ActionSet& actions,
                       std::size_t n_bootstrap = 0, std::uint64_t seed = 0);

struct FrontierPoint {
  std::string method;  // thresholding, reward-max, direct, baseline-*, doctor
  double param = 0.0;  // omega, budget or lambda_defer
  PolicyEval eval;
  std::string policy_ref;
  bool dominated = false;
};

// p dominates q: no worse on both reported rates, strictly better on one.
bool dominates(const PolicyEval& p, const PolicyEval& q);

// Sorted by reported IAT (then cost, then input order), with dominated
// points flagged.
std::vector<FrontierPoint> assemble_frontier(std::vector<FrontierPoint> points);

// method,param,iat,iat_sd,cost,cost_sd,defer_rate,dominated
std::string frontier_csv(std::span<const FrontierPoint> points);
std::string frontier_json(std::span<const FrontierPoint> points);

struct DecisionCohortReport {
  bool empty = false;  // the policy deferred on every unit
  double defer_rate = 0.0;
  std::size_t n_decided = 0;
  PolicyEval doctor;  // both restricted to units the policy decides
  PolicyEval policy;
};

DecisionCohortReport decision_cohort_analysis(const Policy& policy, const Cohort& cohort,
                                              const ActionSet& actions);

}  // namespace txp
