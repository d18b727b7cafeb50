#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txp/core.hpp"

namespace txp {

// Generative environment with nonlinear outcome models whose Bayes-optimal
// rule is linear:
//   Y(a) | X ~ Bernoulli(sigmoid(b_a + X_a + sum_i alpha_i X_i^2
//                                + sum_{(i,j)} beta_ij X_i X_j))
// with X ~ N(0, I_m) and alpha, beta shared by every action.
struct SyntheticSpec {
  struct Quadratic {
    std::size_t feature;  // 0-based
    double alpha;
    friend bool operator==(const Quadratic&, const Quadratic&) = default;
  };
  struct Interaction {
    std::size_t i, j;  // 0-based, i != j
    double beta;
    friend bool operator==(const Interaction&, const Interaction&) = default;
  };

  std::size_t m = 10;
  std::size_t k = 3;
  std::vector<Quadratic> quadratic;
  std::vector<Interaction> interactions;
  std::vector<double> intercepts;  // b_a; empty means all zero
  // Expected marginal P(Y(a)=1) per action; when empty every action must
  // fall in [0.4, 0.6].
  std::vector<double> target_means;
  std::uint64_t seed = 0;
  // Test-only: admits coefficients with magnitude <= 1.
  bool allow_weak_coefficients = false;

  // alpha alternating +-1.5 on features 4..10, beta = +-2 alternating on
  // pairs (4,5), (6,7), (8,9) (1-based).
  static SyntheticSpec default_environment();

  void validate() const;  // structural checks only
  double logit(std::span<const double> x, std::size_t action) const;
  double intercept(std::size_t action) const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct ProbeStats {
  std::vector<double> marginal_means;
  std::size_t samples = 0;
};

inline constexpr std::size_t kProbeSamples = 100000;

// Marginal outcome rates on a fixed-seed Monte Carlo probe.
ProbeStats probe_marginals(const SyntheticSpec& spec, std::size_t samples = kProbeSamples);

// Throws DataError naming the offending action when the probe falls outside
// the admissible window.
ProbeStats check_marginals(const SyntheticSpec& spec);

// Solves per-action intercepts so the probe marginals hit `targets`.
SyntheticSpec with_target_means(SyntheticSpec spec, std::vector<double> targets);

Cohort generate(const SyntheticSpec& spec, std::size_t n);

// argmax of the first k coordinates, canonical tie-break.
std::size_t bayes_policy(std::span<const double> x, std::size_t k = 3);

// argmax_a b_a + x_a for the given spec.
class BayesPolicy final : public Policy {
 public:
  explicit BayesPolicy(const SyntheticSpec& spec);
  std::size_t num_features() const override { return m_; }
  std::size_t num_outputs() const override { return intercepts_.size(); }
  std::size_t decide(std::span<const double> x) const override;

 private:
  std::size_t m_;
  std::vector<double> intercepts_;
};

// Units whose outcomes differ across actions.
std::vector<std::size_t> nonuniform_units(const Cohort& cohort);

// Mean realized outcome of `decisions` over the non-uniform units.
double mean_outcome_nonuniform(const Cohort& cohort, std::span<const std::size_t> decisions);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t used = 0;   // non-uniform units
  std::size_t drawn = 0;
};

using DecisionFn = std::function<std::size_t(std::span<const double> x)>;

// Monte Carlo mean outcome of `decide` over freshly drawn non-uniform units.
McEstimate policy_value(const SyntheticSpec& spec, const DecisionFn& decide, std::size_t n_mc,
                        std::uint64_t seed);
McEstimate bayes_value(const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed);

struct ClinicianSim {
  enum class Rule { kArgmaxFeatures, kConstant };
  Rule rule = Rule::kArgmaxFeatures;
  std::size_t constant_action = 0;
  std::vector<double> bias;  // added to x_a before the argmax rule
  double noise_rate = 0.0;   // share of uniformly random choices
  std::uint64_t seed = 0;
  friend bool operator==(const ClinicianSim&, const ClinicianSim&) = default;
};

Cohort simulate_clinician(const ClinicianSim& sim, Cohort cohort, std::size_t num_actions);

}  // namespace txp
