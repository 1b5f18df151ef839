#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "earlycorr/model.hpp"

namespace earlycorr {

inline constexpr const char* kCheckpointManifest = "manifest.json";
inline constexpr const char* kCheckpointParams = "params.bin";

/// Writes <dir>/manifest.json (model config, metadata, parameter table) and
/// <dir>/params.bin (little-endian float32 values in parameter order).
void save_checkpoint(Model<float>& model, const nlohmann::json& metadata,
                     const std::filesystem::path& dir);

struct Checkpoint {
  std::unique_ptr<Model<float>> model;
  nlohmann::json metadata;
};

/// Throws CheckpointMismatch when `expected` is given and differs from the
/// stored config, or when the parameter table does not match the model.
Checkpoint load_checkpoint(const std::filesystem::path& dir,
                           const ModelConfig* expected = nullptr);

}  // namespace earlycorr
