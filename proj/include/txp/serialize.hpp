#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "txp/baselines.hpp"
#include "txp/core.hpp"
#include "txp/outcome_models.hpp"
#include "txp/policies_indirect.hpp"
#include "txp/policy_direct.hpp"

namespace txp {

using Json = nlohmann::ordered_json;

Json to_json(const ActionSet& actions);
ActionSet action_set_from_json(const Json& j);

Json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const Json& j);

Json to_json(const LogisticModel& model);
LogisticModel logistic_model_from_json(const Json& j);

Json to_json(const ThresholdPolicy& policy);
Json to_json(const RewardMaxPolicy& policy);
Json to_json(const LinearPolicy& policy);
Json to_json(const UnconstrainedPolicy& policy, const ActionSet& actions);
Json to_json(const ConstrainedPolicy& policy, const ActionSet& actions);
Json to_json(const CalibratedCosts& costs);

// Any serialized policy; the "type" field selects the class. Throws
// SchemaError when the stored action set differs from `expected`.
std::unique_ptr<Policy> policy_from_json(const Json& j, const ActionSet& expected);

}  // namespace txp
