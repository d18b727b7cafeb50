#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "txp/matrix.hpp"

namespace txp {

// Ordered action labels with per-action cost. Label order is the canonical
// tie-break order everywhere: the lowest index wins ties.
class ActionSet {
 public:
  struct Action {
    std::string label;
    double cost = 0.0;  // in [0,1]
    friend bool operator==(const Action&, const Action&) = default;
  };

  ActionSet() = default;
  explicit ActionSet(std::vector<Action> actions);

  std::size_t size() const noexcept { return actions_.size(); }
  const std::string& label(std::size_t a) const { return actions_.at(a).label; }
  double cost(std::size_t a) const { return actions_.at(a).cost; }
  const std::vector<Action>& actions() const noexcept { return actions_; }
  std::vector<std::string> labels() const;

  std::optional<std::size_t> find(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;  // throws ParseError

  // Lowest-index action with zero cost, if any.
  std::optional<std::size_t> first_zero_cost() const;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

 private:
  std::vector<Action> actions_;
};

// {"actions":[{"label":"NIT","cost":0},...]}
ActionSet parse_action_set(const std::string& json_text);
ActionSet load_action_set(const std::filesystem::path& path);
std::string action_set_to_json(const ActionSet& actions);

// Feature matrix plus the fully observed per-action benefit table.
struct Cohort {
  std::vector<std::string> ids;
  std::vector<std::string> feature_names;
  MatrixD X;                      // n x m
  Matrix<std::uint8_t> Y;         // n x K, entries in {0,1}
  std::optional<std::vector<std::size_t>> doctor_action;

  std::size_t n() const noexcept { return X.rows(); }
  std::size_t m() const noexcept { return X.cols(); }
  std::size_t k() const noexcept { return Y.cols(); }
  bool has_doctor() const noexcept { return doctor_action.has_value(); }

  Cohort subset(std::span<const std::size_t> rows) const;
  // Throws on invariant violations (shapes, binary Y, action indices,
  // non-finite X).
  void validate(const ActionSet& actions) const;
};

Cohort load_cohort(const std::filesystem::path& path, const ActionSet& actions);
void write_cohort(const std::filesystem::path& path, const Cohort& cohort,
                  const ActionSet& actions);

struct RewardSpec {
  double omega = 1.0;
  double lambda_defer = 0.0;  // 0 disables the defer action
  void validate() const;
  bool defers() const noexcept { return lambda_defer > 0.0; }
};

// r(i,a) = omega*Y_i(a) + (1-omega)*(1-C(a)); an extra last column holds
// r(i,defer) = r(i,doctor_i) + lambda_defer when deferral is enabled.
struct RewardTable {
  MatrixD r;
  bool has_defer = false;
};

RewardTable build_rewards(const Cohort& cohort, const ActionSet& actions,
                          const RewardSpec& spec);

// Per-feature z-scores frozen from training data. Constant features keep
// unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  static Standardizer fit(const MatrixD& X);
  static Standardizer identity(std::size_t m);
  std::size_t size() const noexcept { return mean.size(); }
  void apply(std::span<const double> x, std::span<double> out) const;
  MatrixD apply(const MatrixD& X) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// Index of the largest value; a later entry only wins when it exceeds the
// incumbent by more than a relative 1e-12, so near-ties resolve to the
// lowest index.
std::size_t argmax_canonical(std::span<const double> values);
std::size_t argmin_canonical(std::span<const double> values);

// Deterministic map from a feature row to an action index. Indices equal to
// the number of real actions denote deferral for policies that can defer.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::size_t num_features() const = 0;
  virtual std::size_t num_outputs() const = 0;
  virtual bool can_defer() const { return false; }
  virtual std::size_t decide(std::span<const double> x) const = 0;
};

std::vector<std::size_t> apply_policy(const Policy& policy, const MatrixD& X);

// Always returns the same action; mostly for tests and degenerate baselines.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(std::size_t m, std::size_t outputs, std::size_t action,
                 bool defers = false);
  std::size_t num_features() const override { return m_; }
  std::size_t num_outputs() const override { return outputs_; }
  bool can_defer() const override { return defers_; }
  std::size_t decide(std::span<const double>) const override { return action_; }

 private:
  std::size_t m_, outputs_, action_;
  bool defers_;
};

}  // namespace txp
