#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "txp/error.hpp"
#include "txp/synthetic.hpp"

using namespace txp;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

SyntheticSpec linear_only() {
  SyntheticSpec s;
  s.m = 10;
  s.k = 3;
  return s;
}

// Bayes value for the purely linear environment by one-dimensional
// quadrature over the maximum coordinate:
//   numerator = 3 * int phi(t) s(t) [Phi(t)^2 - G(t)^2] dt,  G(t) = int_{-inf}^t phi s
//   P(non-uniform) = 1 - 2 * (1/2)^3
double linear_bayes_value_quadrature() {
  const double lo = -12.0, hi = 12.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  double Phi = 0.0, G = 0.0, num = 0.0;
  double prev_phi = phi(lo), prev_g = phi(lo) * sigmoid(lo);
  double prev_integrand = 0.0;
  for (int s = 1; s <= steps; ++s) {
    const double t = lo + s * h;
    const double p = phi(t);
    const double g = p * sigmoid(t);
    Phi += 0.5 * h * (p + prev_phi);
    G += 0.5 * h * (g + prev_g);
    const double integrand = 3.0 * g * (Phi * Phi - G * G);
    num += 0.5 * h * (integrand + prev_integrand);
    prev_phi = p;
    prev_g = g;
    prev_integrand = integrand;
  }
  return num / 0.75;
}

}  // namespace

TEST_CASE("default spec passes the marginal probe") {
  const auto spec = SyntheticSpec::default_environment();
  CHECK_NOTHROW(spec.validate());
  const auto stats = check_marginals(spec);
  for (double m : stats.marginal_means) {
    CHECK(m >= 0.4);
    CHECK(m <= 0.6);
  }
  CHECK(spec.quadratic.size() == 7);
  CHECK(spec.quadratic.front().feature == 3);
  CHECK(spec.quadratic.front().alpha == 1.5);
  CHECK(spec.interactions.size() == 3);
  CHECK(spec.interactions[1].beta == -2.0);
}

TEST_CASE("generated cohorts have admissible outcome rates") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 41;
  const Cohort c = generate(spec, 100000);
  CHECK(c.n() == 100000);
  CHECK(c.m() == 10);
  for (std::size_t a = 0; a < 3; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < c.n(); ++i) mean += c.Y(i, a);
    mean /= c.n();
    CHECK(mean >= 0.4);
    CHECK(mean <= 0.6);
  }
}

TEST_CASE("generation is seed-determined") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 1;
  const Cohort a = generate(spec, 1000);
  const Cohort b = generate(spec, 1000);
  CHECK(a.X == b.X);
  CHECK(a.Y == b.Y);
  spec.seed = 2;
  const Cohort c = generate(spec, 1000);
  std::size_t hamming = 0;
  for (std::size_t i = 0; i < a.Y.data().size(); ++i) hamming += a.Y.data()[i] != c.Y.data()[i];
  CHECK(hamming > 0);
}

TEST_CASE("coefficient magnitude rule") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.quadratic[0].alpha = 0.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.allow_weak_coefficients = true;
  CHECK_NOTHROW(spec.validate());
  SyntheticSpec bad = SyntheticSpec::default_environment();
  bad.interactions[0].beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("probe rejects specs outside the window and names the action") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.intercepts = {0.0, 3.0, 0.0};
  try {
    generate(spec, 10);
    FAIL("expected rejection");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("action 1") != std::string::npos);
  }
}

TEST_CASE("intercepts can be solved for target marginals") {
  const SyntheticSpec spec = with_target_means(SyntheticSpec::default_environment(), {0.89, 0.80, 0.93});
  const auto stats = probe_marginals(spec);
  CHECK(stats.marginal_means[0] == doctest::Approx(0.89).epsilon(0.01));
  CHECK(stats.marginal_means[1] == doctest::Approx(0.80).epsilon(0.01));
  CHECK(stats.marginal_means[2] == doctest::Approx(0.93).epsilon(0.01));
  CHECK_NOTHROW(check_marginals(spec));
}

TEST_CASE("linear-only environment has P(Y(a)=1|x) = sigmoid(x_a)") {
  SyntheticSpec spec = linear_only();
  spec.seed = 3;
  std::mt19937_64 rng(4);
  const MatrixD X = test::random_matrix(20, 10, rng, -3, 3);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) CHECK(spec.logit(X.row(i), a) == X(i, a));
  }
  const Cohort c = generate(spec, 100000);
  for (std::size_t a = 0; a < 3; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < c.n(); ++i) mean += c.Y(i, a);
    CHECK(mean / c.n() == doctest::Approx(0.5).epsilon(0.02));
  }
}

TEST_CASE("outcome rate increases with the action's own feature") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 5;
  const Cohort c = generate(spec, 60000);
  for (std::size_t a = 0; a < 3; ++a) {
    std::vector<double> hits(5, 0.0), counts(5, 0.0);
    for (std::size_t i = 0; i < c.n(); ++i) {
      const double x = c.X(i, a);
      const int bin = x < -1.0 ? 0 : x < -0.3 ? 1 : x < 0.3 ? 2 : x < 1.0 ? 3 : 4;
      hits[bin] += c.Y(i, a);
      counts[bin] += 1.0;
    }
    double prev = -1e9;
    for (int b = 0; b < 5; ++b) {
      const double p = hits[b] / counts[b];
      const double logit = std::log(p / (1.0 - p));
      CHECK(logit > prev);
      prev = logit;
    }
  }
}

TEST_CASE("Bayes rule") {
  CHECK(bayes_policy(std::vector<double>{2.0, 0.5, -1.0, 9.0}) == 0);
  CHECK(bayes_policy(std::vector<double>{1.0, 1.0, 1.0}) == 0);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(10);
    for (auto& v : x) v = z(rng);
    const std::size_t d = bayes_policy(x);
    std::vector<double> p = {x[2], x[0], x[1]};  // cyclic permutation of 1-3
    p.insert(p.end(), x.begin() + 3, x.end());
    CHECK(bayes_policy(p) == (d + 1) % 3);
    std::vector<double> q = x;
    for (std::size_t j = 3; j < 10; ++j) q[j] = z(rng);
    CHECK(bayes_policy(q) == d);
  }
  const BayesPolicy bp(SyntheticSpec::default_environment());
  CHECK(bp.decide(std::vector<double>(10, 0.0)) == 0);
}

TEST_CASE("Bayes value matches quadrature in the linear environment") {
  const double exact = linear_bayes_value_quadrature();
  const auto mc = bayes_value(linear_only(), 200000, 7);
  CHECK(std::abs(mc.value - exact) < 3.0 * mc.std_error);
  CHECK(mc.used < mc.drawn);
  CHECK(mc.used > 0);
}

TEST_CASE("Monte Carlo standard error scales as one over root n") {
  const auto spec = SyntheticSpec::default_environment();
  const auto a = bayes_value(spec, 100000, 8);
  const auto b = bayes_value(spec, 200000, 9);
  CHECK(b.std_error / a.std_error == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("random policy is worse than the Bayes rule") {
  const auto spec = SyntheticSpec::default_environment();
  const auto bayes = bayes_value(spec, 100000, 10);
  std::mt19937_64 rng(11);
  const DecisionFn random_rule = [&](std::span<const double>) {
    return std::uniform_int_distribution<std::size_t>(0, 2)(rng);
  };
  const auto random = policy_value(spec, random_rule, 100000, 10);
  CHECK(random.value < bayes.value - 3.0 * (bayes.std_error + random.std_error));
}

TEST_CASE("non-uniform filter") {
  const Cohort c = test::make_cohort({{0.0}, {0.0}, {0.0}, {0.0}}, {{1, 1, 1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 1}});
  CHECK(nonuniform_units(c) == std::vector<std::size_t>{2, 3});
  CHECK(mean_outcome_nonuniform(c, std::vector<std::size_t>{0, 0, 0, 0}) == 0.5);
}

TEST_CASE("simulated clinician") {
  SyntheticSpec spec = SyntheticSpec::default_environment();
  spec.seed = 12;
  const Cohort base = generate(spec, 10000);

  ClinicianSim exact;
  const Cohort c0 = simulate_clinician(exact, base, 3);
  for (std::size_t i = 0; i < c0.n(); ++i) CHECK((*c0.doctor_action)[i] == bayes_policy(c0.X.row(i)));

  ClinicianSim noisy;
  noisy.noise_rate = 1.0;
  noisy.seed = 13;
  const Cohort c1 = simulate_clinician(noisy, base, 3);
  std::vector<double> counts(3, 0.0);
  for (auto a : *c1.doctor_action) counts[a] += 1.0;
  double chi2 = 0.0;
  const double expected = c1.n() / 3.0;
  for (double o : counts) chi2 += (o - expected) * (o - expected) / expected;
  CHECK(chi2 < 13.82);  // 2 degrees of freedom, p = 0.001
  CHECK(simulate_clinician(noisy, base, 3).doctor_action == c1.doctor_action);

  ClinicianSim fixed;
  fixed.rule = ClinicianSim::Rule::kConstant;
  fixed.constant_action = 2;
  const Cohort c2 = simulate_clinician(fixed, base, 3);
  CHECK(*c2.doctor_action == std::vector<std::size_t>(base.n(), 2));
}
