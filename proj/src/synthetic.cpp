#include "txp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "txp/kernels.hpp"

namespace txp {
namespace {

constexpr std::uint64_t kProbeSeed = 0x5EEDF00DULL;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Draws one unit: m features then k outcome uniforms.
void draw_unit(const SyntheticSpec& spec, std::mt19937_64& rng,
               std::normal_distribution<double>& normal,
               std::uniform_real_distribution<double>& unit, std::span<double> x,
               std::span<std::uint8_t> y) {
  for (auto& v : x) v = normal(rng);
  for (std::size_t a = 0; a < spec.k; ++a) {
    y[a] = unit(rng) < sigmoid(spec.logit(x, a)) ? 1 : 0;
  }
}

bool nonuniform(std::span<const std::uint8_t> y) {
  return std::any_of(y.begin(), y.end(), [&](auto v) { return v != y[0]; });
}

}  // namespace

SyntheticSpec SyntheticSpec::default_environment() {
  SyntheticSpec spec;
  double sign = 1.0;
  for (std::size_t f = 3; f < 10; ++f) {
    spec.quadratic.push_back({f, 1.5 * sign});
    sign = -sign;
  }
  spec.interactions = {{3, 4, 2.0}, {5, 6, -2.0}, {7, 8, 2.0}};
  return spec;
}

void SyntheticSpec::validate() const {
  if (k < 2) throw ConfigError("synthetic environment needs at least 2 actions");
  if (m < k) throw ConfigError("synthetic environment needs m >= k features");
  if (!intercepts.empty() && intercepts.size() != k) {
    throw ConfigError("one intercept per action required");
  }
  if (!target_means.empty() && target_means.size() != k) {
    throw ConfigError("one target mean per action required");
  }
  for (const auto& q : quadratic) {
    if (q.feature >= m) throw ConfigError("quadratic term names a feature beyond m");
    if (!allow_weak_coefficients && !(std::abs(q.alpha) > 1.0)) {
      throw ConfigError("quadratic coefficients must have magnitude > 1");
    }
  }
  for (const auto& t : interactions) {
    if (t.i >= m || t.j >= m || t.i == t.j) throw ConfigError("invalid interaction pair");
    if (!allow_weak_coefficients && !(std::abs(t.beta) > 1.0)) {
      throw ConfigError("interaction coefficients must have magnitude > 1");
    }
  }
}

double SyntheticSpec::intercept(std::size_t action) const {
  return intercepts.empty() ? 0.0 : intercepts[action];
}

double SyntheticSpec::logit(std::span<const double> x, std::size_t action) const {
  double z = intercept(action) + x[action];
  for (const auto& q : quadratic) z += q.alpha * x[q.feature] * x[q.feature];
  for (const auto& t : interactions) z += t.beta * x[t.i] * x[t.j];
  return z;
}

ProbeStats probe_marginals(const SyntheticSpec& spec, std::size_t samples) {
  spec.validate();
  std::mt19937_64 rng(kProbeSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProbeStats stats;
  stats.samples = samples;
  stats.marginal_means.assign(spec.k, 0.0);
  std::vector<double> x(spec.m);
  // Expected outcome given X, so the probe carries no Bernoulli noise.
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& v : x) v = normal(rng);
    for (std::size_t a = 0; a < spec.k; ++a) stats.marginal_means[a] += sigmoid(spec.logit(x, a));
  }
  for (auto& v : stats.marginal_means) v /= static_cast<double>(samples);
  return stats;
}

ProbeStats check_marginals(const SyntheticSpec& spec) {
  auto stats = probe_marginals(spec);
  for (std::size_t a = 0; a < spec.k; ++a) {
    const double mean = stats.marginal_means[a];
    const bool ok = spec.target_means.empty() ? (mean >= 0.4 && mean <= 0.6)
                                              : std::abs(mean - spec.target_means[a]) <= 0.02;
    if (!ok) {
      throw DataError("synthetic spec rejected: action " + std::to_string(a) +
                      " has marginal outcome mean " + std::to_string(mean) +
                      " outside the admissible window");
    }
  }
  return stats;
}

SyntheticSpec with_target_means(SyntheticSpec spec, std::vector<double> targets) {
  if (targets.size() != spec.k) throw ConfigError("one target mean per action required");
  spec.intercepts.assign(spec.k, 0.0);
  spec.target_means.clear();
  for (std::size_t a = 0; a < spec.k; ++a) {
    if (!(targets[a] > 0.0 && targets[a] < 1.0)) throw ConfigError("target means must lie in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int iter = 0; iter < 50; ++iter) {
      spec.intercepts[a] = 0.5 * (lo + hi);
      const double mean = probe_marginals(spec, 20000).marginal_means[a];
      (mean < targets[a] ? lo : hi) = spec.intercepts[a];
    }
    spec.intercepts[a] = 0.5 * (lo + hi);
  }
  spec.target_means = std::move(targets);
  return spec;
}

Cohort generate(const SyntheticSpec& spec, std::size_t n) {
  if (n == 0) throw ConfigError("synthetic cohort size must be positive");
  check_marginals(spec);
  Cohort cohort;
  cohort.X = MatrixD(n, spec.m);
  cohort.Y = Matrix<std::uint8_t>(n, spec.k);
  for (std::size_t j = 0; j < spec.m; ++j) cohort.feature_names.push_back("x" + std::to_string(j + 1));
  cohort.ids.reserve(n);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    draw_unit(spec, rng, normal, unit, cohort.X.row(i), cohort.Y.row(i));
    cohort.ids.push_back("u" + std::to_string(i));
  }
  return cohort;
}

std::size_t bayes_policy(std::span<const double> x, std::size_t k) {
  if (x.size() < k) throw ShapeError("Bayes rule needs at least k features");
  return argmax_canonical(x.first(k));
}

BayesPolicy::BayesPolicy(const SyntheticSpec& spec) : m_(spec.m) {
  spec.validate();
  for (std::size_t a = 0; a < spec.k; ++a) intercepts_.push_back(spec.intercept(a));
}

std::size_t BayesPolicy::decide(std::span<const double> x) const {
  std::vector<double> s(intercepts_.size());
  for (std::size_t a = 0; a < s.size(); ++a) s[a] = intercepts_[a] + x[a];
  return argmax_canonical(s);
}

std::vector<std::size_t> nonuniform_units(const Cohort& cohort) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    if (nonuniform(cohort.Y.row(i))) out.push_back(i);
  }
  return out;
}

double mean_outcome_nonuniform(const Cohort& cohort, std::span<const std::size_t> decisions) {
  if (decisions.size() != cohort.n()) throw ShapeError("one decision per unit required");
  const auto units = nonuniform_units(cohort);
  if (units.empty()) return 0.0;
  double total = 0.0;
  for (auto i : units) total += cohort.Y(i, decisions[i]);
  return total / static_cast<double>(units.size());
}

McEstimate policy_value(const SyntheticSpec& spec, const DecisionFn& decide, std::size_t n_mc,
                        std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(spec.m);
  std::vector<std::uint8_t> y(spec.k);
  McEstimate est;
  est.drawn = n_mc;
  double total = 0.0;
  for (std::size_t s = 0; s < n_mc; ++s) {
    draw_unit(spec, rng, normal, unit, x, y);
    if (!nonuniform(y)) continue;
    const auto a = decide(x);
    if (a >= spec.k) throw DataError("decision out of range in policy_value");
    total += y[a];
    ++est.used;
  }
  if (est.used > 0) {
    est.value = total / static_cast<double>(est.used);
    est.std_error = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(est.used));
  }
  return est;
}

McEstimate bayes_value(const SyntheticSpec& spec, std::size_t n_mc, std::uint64_t seed) {
  const BayesPolicy bayes(spec);
  return policy_value(spec, [&](std::span<const double> x) { return bayes.decide(x); }, n_mc, seed);
}

Cohort simulate_clinician(const ClinicianSim& sim, Cohort cohort, std::size_t num_actions) {
  if (!(sim.noise_rate >= 0.0 && sim.noise_rate <= 1.0)) {
    throw ConfigError("clinician noise_rate must lie in [0,1]");
  }
  if (num_actions == 0) throw ConfigError("clinician needs at least one action");
  if (sim.rule == ClinicianSim::Rule::kConstant && sim.constant_action >= num_actions) {
    throw ConfigError("clinician constant action out of range");
  }
  if (sim.rule == ClinicianSim::Rule::kArgmaxFeatures && cohort.m() < num_actions) {
    throw ShapeError("argmax clinician needs at least one feature per action");
  }
  if (!sim.bias.empty() && sim.bias.size() != num_actions) {
    throw ConfigError("clinician bias needs one entry per action");
  }
  std::mt19937_64 rng(sim.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any(0, num_actions - 1);
  std::vector<std::size_t> doctor(cohort.n());
  std::vector<double> s(num_actions);
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    // Both draws happen for every unit so choices stay aligned across noise rates.
    const double u = unit(rng);
    const std::size_t random_action = any(rng);
    if (u < sim.noise_rate) {
      doctor[i] = random_action;
    } else if (sim.rule == ClinicianSim::Rule::kConstant) {
      doctor[i] = sim.constant_action;
    } else {
      for (std::size_t a = 0; a < num_actions; ++a) {
        s[a] = cohort.X(i, a) + (sim.bias.empty() ? 0.0 : sim.bias[a]);
      }
      doctor[i] = argmax_canonical(s);
    }
  }
  cohort.doctor_action = std::move(doctor);
  return cohort;
}

}  // namespace txp
