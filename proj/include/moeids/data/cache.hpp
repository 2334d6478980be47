#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "moeids/data/pipeline.hpp"

namespace moeids::data {

inline constexpr std::uint32_t kDatasetCacheVersion = 1;

struct DatasetCacheHeader {
  std::uint32_t version = 0;
  std::uint32_t schema_hash = 0;
  std::uint32_t source_hash = 0;
  std::uint64_t train_count = 0;
  std::uint64_t test_count = 0;
};

/// Binary encoded-dataset cache. Layout is described in docs/file-formats.md.
void write_dataset_cache(const std::filesystem::path& path, const PreparedDataset& dataset);

/// Reads and verifies the whole cache. Throws IntegrityError on corruption,
/// VersionError on an unknown version.
PreparedDataset read_dataset_cache(const std::filesystem::path& path);

/// Header only, without checksum verification; nullopt if the file is absent
/// or is not a dataset cache.
std::optional<DatasetCacheHeader> peek_dataset_cache(const std::filesystem::path& path);

}  // namespace moeids::data
