#pragma once

#include <string>

#include <json.hpp>

#include "nlmemboot/bootstrap.hpp"
#include "nlmemboot/conditional.hpp"
#include "nlmemboot/model.hpp"
#include "nlmemboot/saem.hpp"
#include "nlmemboot/scenario.hpp"
#include "nlmemboot/study.hpp"

namespace nlmemboot {

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const PopulationParams& p);
PopulationParams params_from_json(const nlohmann::json& j);

nlohmann::json settings_to_json(const SaemSettings& s);
SaemSettings settings_from_json(const nlohmann::json& j);

/// Fit artifact: model echo, theta_hat, SEs (null when unavailable), the FIM
/// row-major, the optional iteration trace and the seed/settings echo.
nlohmann::json estimate_to_json(const ModelSpec& spec,
                                const PopulationEstimate& est,
                                bool include_trace = false);
PopulationEstimate estimate_from_json(const nlohmann::json& j, ModelSpec* spec_out);

nlohmann::json conditional_to_json(const ConditionalDraws& draws);
ConditionalDraws conditional_from_json(const nlohmann::json& j);

/// Scenario files name the model, theta, design groups, K/B/M, methods and
/// alpha levels; designs are expressed as groups of identical subjects.
nlohmann::json scenario_to_json(const ScenarioSpec& scenario);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

nlohmann::json replicate_to_json(const ReplicateRecord& record);
ReplicateRecord replicate_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const BootstrapSummary& summary);

/// Per-replicate bootstrap table: `replicate,status,<param...>`; failed
/// replicates leave the parameter cells empty.
std::string bootstrap_csv(const BootstrapRun& run);

}  // namespace nlmemboot
