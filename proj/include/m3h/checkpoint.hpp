#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>
#include "m3h/model.hpp"

namespace m3h {

// Binary layout, all integers and floats little-endian:
//   "M3H1"
//   u64 metadata length, metadata JSON (modalities, tasks, model config, extra)
//   u64 parameter count
//   per parameter: u32 name length, name, u64 rows, u64 cols, rows*cols f64 row-major
inline constexpr char kCheckpointMagic[4] = {'M', '3', 'H', '1'};

std::string serialize_checkpoint(const Model& model, const nlohmann::json& extra = nlohmann::json::object());
// Throws FormatError on a malformed or mismatched image.
Model deserialize_checkpoint(std::string_view bytes, nlohmann::json* extra = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& extra = nlohmann::json::object());
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);  // throws ConfigError

}  // namespace m3h
