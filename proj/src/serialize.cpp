#include "txp/serialize.hpp"

#include <cmath>
#include <limits>

namespace txp {
namespace {

Json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw SchemaError("expected a number, got \"" + s + "\"");
  }
  return j.get<double>();
}

const Json& field(const Json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::vector<LogisticModel> models_from_json(const Json& j) {
  std::vector<LogisticModel> models;
  for (const auto& m : field(j, "models")) models.push_back(logistic_model_from_json(m));
  return models;
}

Json models_to_json(const std::vector<LogisticModel>& models) {
  Json arr = Json::array();
  for (const auto& m : models) arr.push_back(to_json(m));
  return arr;
}

}  // namespace

Json to_json(const ActionSet& actions) {
  Json arr = Json::array();
  for (const auto& a : actions.actions()) arr.push_back({{"label", a.label}, {"cost", a.cost}});
  return Json{{"actions", arr}};
}

ActionSet action_set_from_json(const Json& j) {
  std::vector<ActionSet::Action> actions;
  for (const auto& a : field(j, "actions")) {
    actions.push_back({field(a, "label").get<std::string>(), field(a, "cost").get<double>()});
  }
  return ActionSet(std::move(actions));
}

Json to_json(const Standardizer& s) { return Json{{"mean", s.mean}, {"sd", s.sd}}; }

Standardizer standardizer_from_json(const Json& j) {
  Standardizer s{field(j, "mean").get<std::vector<double>>(), field(j, "sd").get<std::vector<double>>()};
  if (s.mean.size() != s.sd.size()) throw SchemaError("standardization mean/sd lengths differ");
  return s;
}

Json to_json(const LogisticModel& model) {
  return Json{{"action", model.action_label},
              {"action_index", model.action},
              {"weights", model.weights},
              {"standardization", to_json(model.standardization)},
              {"penalty",
               {{"type", model.penalty.kind == PenaltyKind::kL2 ? "l2" : "l1"},
                {"inverse_strength", model.penalty.inverse_strength}}},
              {"mean_validation_auc", model.mean_validation_auc}};
}

LogisticModel logistic_model_from_json(const Json& j) {
  LogisticModel m;
  m.action_label = field(j, "action").get<std::string>();
  m.action = field(j, "action_index").get<std::size_t>();
  m.weights = field(j, "weights").get<std::vector<double>>();
  m.standardization = standardizer_from_json(field(j, "standardization"));
  const auto& pen = field(j, "penalty");
  const auto type = field(pen, "type").get<std::string>();
  if (type != "l1" && type != "l2") throw SchemaError("unknown penalty type " + type);
  m.penalty.kind = type == "l2" ? PenaltyKind::kL2 : PenaltyKind::kL1;
  m.penalty.inverse_strength = field(pen, "inverse_strength").get<double>();
  m.mean_validation_auc = j.value("mean_validation_auc", 0.0);
  if (m.weights.size() != m.standardization.size() + 1) {
    throw SchemaError("model weights must have one entry per feature plus an intercept");
  }
  return m;
}

Json to_json(const ThresholdPolicy& policy) {
  Json t = Json::array();
  for (double v : policy.thresholds()) t.push_back(number_or_inf(v));
  return Json{{"type", "thresholding"},
              {"actions", to_json(policy.actions())["actions"]},
              {"thresholds", t},
              {"default_action", policy.actions().label(policy.default_action())},
              {"models", models_to_json(policy.models())}};
}

Json to_json(const RewardMaxPolicy& policy) {
  return Json{{"type", "reward-max"},
              {"actions", to_json(policy.actions())["actions"]},
              {"omega", policy.omega()},
              {"models", models_to_json(policy.models())}};
}

Json to_json(const LinearPolicy& policy) {
  Json theta = Json::array();
  for (std::size_t r = 0; r < policy.theta().rows(); ++r) {
    auto row = policy.theta().row(r);
    theta.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return Json{{"type", "direct"},
              {"actions", to_json(policy.actions())["actions"]},
              {"has_defer", policy.has_defer()},
              {"choose_lowest", policy.choose_lowest},
              {"theta", theta},
              {"standardization", to_json(policy.standardization())},
              {"omega", policy.omega},
              {"lambda_defer", policy.lambda_defer},
              {"seed", policy.seed}};
}

Json to_json(const UnconstrainedPolicy& policy, const ActionSet& actions) {
  return Json{{"type", "baseline-unconstrained"},
              {"actions", to_json(actions)["actions"]},
              {"models", models_to_json(policy.models())}};
}

Json to_json(const ConstrainedPolicy& policy, const ActionSet& actions) {
  return Json{{"type", "baseline-constrained"},
              {"actions", to_json(actions)["actions"]},
              {"adjustments", policy.adjustments()},
              {"models", models_to_json(policy.models())}};
}

Json to_json(const CalibratedCosts& costs) {
  Json trace = Json::array();
  for (const auto& s : costs.trace) {
    trace.push_back({{"iteration", s.iteration},
                     {"c", s.c},
                     {"counts", s.counts},
                     {"max_deviation", s.max_deviation}});
  }
  return Json{{"c", costs.c},
              {"alpha", costs.alpha},
              {"max_iters", costs.max_iters},
              {"tolerance", costs.tolerance},
              {"target_counts", costs.target_counts},
              {"counts", costs.counts},
              {"converged", costs.converged},
              {"best_iteration", costs.best_iteration},
              {"trace", trace}};
}

std::unique_ptr<Policy> policy_from_json(const Json& j, const ActionSet& expected) {
  const auto type = field(j, "type").get<std::string>();
  const ActionSet stored = action_set_from_json(Json{{"actions", field(j, "actions")}});
  if (!(stored == expected)) {
    throw SchemaError("policy was trained for actions that differ from the evaluation action set");
  }
  try {
    if (type == "thresholding") {
      std::vector<double> t;
      for (const auto& v : field(j, "thresholds")) t.push_back(read_number(v));
      return std::make_unique<ThresholdPolicy>(models_from_json(j), std::move(t), stored,
                                               stored.index_of(field(j, "default_action").get<std::string>()));
    }
    if (type == "reward-max") {
      return std::make_unique<RewardMaxPolicy>(models_from_json(j), field(j, "omega").get<double>(),
                                               stored);
    }
    if (type == "direct") {
      const auto rows = field(j, "theta").get<std::vector<std::vector<double>>>();
      MatrixD theta;
      for (const auto& r : rows) theta.append_row(r);
      auto p = std::make_unique<LinearPolicy>(std::move(theta), stored,
                                              field(j, "has_defer").get<bool>(),
                                              standardizer_from_json(field(j, "standardization")));
      p->choose_lowest = j.value("choose_lowest", false);
      p->omega = j.value("omega", 1.0);
      p->lambda_defer = j.value("lambda_defer", 0.0);
      p->seed = j.value("seed", std::uint64_t{0});
      return p;
    }
    if (type == "baseline-unconstrained") {
      return std::make_unique<UnconstrainedPolicy>(models_from_json(j));
    }
    if (type == "baseline-constrained") {
      return std::make_unique<ConstrainedPolicy>(models_from_json(j),
                                                 field(j, "adjustments").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed policy: ") + e.what());
  }
  throw SchemaError("unknown policy type " + type);
}

}  // namespace txp
