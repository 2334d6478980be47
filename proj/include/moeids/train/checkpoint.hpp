#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/train/model.hpp"

namespace moeids::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  IdsModel model;
  std::optional<data::PipelineStats> stats;
  std::uint32_t schema_hash = 0;
  /// Training config, seed, epochs run and final losses.
  nlohmann::json metadata;
};

/// Single-file checkpoint; byte layout in docs/file-formats.md. The file is
/// written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const IdsModel& model, const data::PipelineStats* stats,
                     std::uint32_t schema_hash, const nlohmann::json& metadata);

/// Throws IntegrityError on a bad checksum, truncation or malformed content and
/// VersionError on an unsupported format version. Nothing is returned unless
/// the whole file verified.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace moeids::train
