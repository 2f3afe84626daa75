#pragma once

// nlohmann::json conversions for the configuration structs.

#include <json.hpp>

#include "gemr/model.hpp"
#include "gemr/synth.hpp"
#include "gemr/train.hpp"

namespace gemr {

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

void to_json(nlohmann::json& j, const AttentionOptions& o);
void from_json(const nlohmann::json& j, AttentionOptions& o);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Missing keys keep their defaults for the two configs below; unknown keys
// are rejected so typos in config files surface.
void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace gemr
