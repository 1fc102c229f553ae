#pragma once

#include <nlohmann/json.hpp>

#include "cbop/agent.hpp"

namespace cbop {

nlohmann::json to_json(const DynamicsConfig& config);
nlohmann::json to_json(const TrainConfig& config);

/// Applies the keys of `j` on top of `base`. Unknown keys and ill-typed
/// values raise ConfigError; the result is validated.
DynamicsConfig dynamics_config_from_json(const nlohmann::json& j, DynamicsConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const EpochMetrics& m);
EpochMetrics epoch_metrics_from_json(const nlohmann::json& j);

}  // namespace cbop
