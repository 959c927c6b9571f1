#pragma once

#include "dcue/cross_fit.hpp"
#include "dcue/estimators.hpp"
#include "dcue/inference.hpp"
#include "dcue/pipeline.hpp"
#include "dcue/simulate.hpp"

#include <json.hpp>

#include <string>

namespace dcue {

// JSON views of the result types. Non-finite numbers become null.

nlohmann::json to_json(const ModelSummary& s);
nlohmann::json to_json(const FittedModelInfo& info);
nlohmann::json to_json(const SearchInterval& b);
nlohmann::json to_json(const EstimateReport& r);
nlohmann::json to_json(const InferenceReport& r);
nlohmann::json to_json(const MethodResult& r);
nlohmann::json to_json(const EstimateRun& run);
nlohmann::json to_json(const LearnerSpec& spec);
nlohmann::json to_json(const ScenarioConfig& cfg);

/// Overlays the keys present in `j` onto `base`. Unknown keys raise ConfigError.
LearnerSpec learner_from_json(const nlohmann::json& j, LearnerSpec base);
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base);

/// Human-readable table: estimate, se, 95% CI (estimate +/- 1.96 se), then the
/// first-stage F and, for an overidentified CUE fit, J.
std::string render_estimate_summary(const EstimateRun& run);

}  // namespace dcue
