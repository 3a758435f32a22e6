#pragma once

#include <json.hpp>

#include "snprex/encoder.hpp"
#include "snprex/head.hpp"
#include "snprex/preprocess.hpp"
#include "snprex/train.hpp"

/// JSON views of the configuration structs. The update_* functions override
/// only the keys present and throw ConfigMismatch on unknown keys or bad values.
namespace snprex {

nlohmann::ordered_json to_json(const HeadConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const EncoderSpec& s);
nlohmann::ordered_json to_json(const PreprocessConfig& c);

void update_from_json(const nlohmann::json& j, HeadConfig& c);
void update_from_json(const nlohmann::json& j, TrainConfig& c);
void update_from_json(const nlohmann::json& j, EncoderSpec& s);
/// Accepts "stopwords_file" to replace the built-in list.
void update_from_json(const nlohmann::json& j, PreprocessConfig& c);

}  // namespace snprex
