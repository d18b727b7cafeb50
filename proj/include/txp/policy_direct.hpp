#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "txp/core.hpp"
#include "txp/optim.hpp"

namespace txp {

// Optional preprocessing for reward tables with negative entries: replaces
// r(a) by max_a' r(a') - r(a). The learned scores then track expected regret
// and the policy picks the lowest-scoring action.
enum class RewardTransform { kNone, kRegret };

RewardTable regret_transform(const RewardTable& reward);

// Linear score policy over standardized features: decide(x) is the
// canonical-tie-break argmax of theta^T [z(x);1]. theta is (m+1) x K' with
// the intercept row last; K' = K + 1 when the last column is "defer".
class LinearPolicy final : public Policy {
 public:
  LinearPolicy(MatrixD theta, ActionSet actions, bool has_defer, Standardizer standardization);

  std::size_t num_features() const override { return standardization_.size(); }
  std::size_t num_outputs() const override { return theta_.cols(); }
  bool can_defer() const override { return has_defer_; }
  std::size_t decide(std::span<const double> x) const override;

  const MatrixD& theta() const noexcept { return theta_; }
  const ActionSet& actions() const noexcept { return actions_; }
  bool has_defer() const noexcept { return has_defer_; }
  const Standardizer& standardization() const noexcept { return standardization_; }

  // Provenance of the fit.
  double omega = 1.0;
  double lambda_defer = 0.0;
  std::uint64_t seed = 0;
  bool choose_lowest = false;  // set for regret-transformed fits

 private:
  MatrixD theta_;
  ActionSet actions_;
  bool has_defer_;
  Standardizer standardization_;
};

// Reward-weighted multinomial deviance, averaged over units, plus
// l2_penalty * ||theta without the intercept row||^2. Rejects negative
// rewards. Returns (loss, gradient with theta's shape).
std::pair<double, MatrixD> surrogate_loss_and_grad(const MatrixD& theta, const MatrixD& X,
                                                   const RewardTable& reward, double l2_penalty);

// Defaults: Adam, learning rate 1e-4, L2 3e-3, 50 epochs.
OptimizerConfig default_direct_optimizer();

struct DirectFit {
  LinearPolicy policy;
  MinimizeResult optimization;
};

// Minimizes the surrogate on standardized training features. With a stop
// rule and a validation cohort, returns the epoch with the best validation
// mean realized reward.
DirectFit train_direct(const Cohort& cohort, const ActionSet& actions, const RewardSpec& spec,
                       const OptimizerConfig& opt,
                       const std::optional<EarlyStopRule>& stop = std::nullopt,
                       const Cohort* validation = nullptr,
                       RewardTransform transform = RewardTransform::kNone);

// Mean of reward(i, decide(x_i)).
double mean_realized_reward(const Policy& policy, const MatrixD& X, const RewardTable& reward);

// Groups identical rows of X and returns the largest gap between
// softmax(theta^T [x;1]) and the group's normalized mean reward vector.
// Throws DataError when no row repeats.
double calibration_probe(const MatrixD& theta, const MatrixD& X, const RewardTable& reward);

// Checks L(l*t1 + (1-l)*t2) <= l*L(t1) + (1-l)*L(t2) + 1e-10 on random
// parameter pairs (no penalty). Does not validate reward signs.
bool convexity_probe(const MatrixD& X, const RewardTable& reward, std::size_t trials,
                     std::uint64_t seed);

// Softmax of one score row.
std::vector<double> softmax(std::span<const double> scores);

}  // namespace txp
