#pragma once

#include "vbnn/ensemble.hpp"
#include "vbnn/model_state.hpp"
#include "vbnn/sparsifier.hpp"

#include <json.hpp>

namespace vbnn {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const NetworkConfig& c);
NetworkConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GlobalVariational& g);
GlobalVariational global_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitResult& r);
FitResult fit_result_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SparseMask& m);
SparseMask mask_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EnsembleModel& e);
EnsembleModel ensemble_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);

}  // namespace vbnn
