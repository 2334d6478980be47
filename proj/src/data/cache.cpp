#include "moeids/data/cache.hpp"

#include <cstring>
#include <fstream>

#include "core/binary_io.hpp"
#include "moeids/errors.hpp"

namespace moeids::data {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'E', 'I', 'D', 'S', 'D', 'S'};

void write_samples(detail::BinaryWriter& w, const std::vector<EncodedSample>& samples) {
  for (const auto& s : samples) {
    w.value<std::int32_t>(s.label);
    w.doubles(s.values);
  }
}

std::vector<EncodedSample> read_samples(detail::BinaryReader& r, std::uint64_t count) {
  std::vector<EncodedSample> out(count);
  for (auto& s : out) {
    s.label = r.value<std::int32_t>();
    if (s.label < 0 || s.label >= static_cast<int>(kNumClasses)) throw IntegrityError("dataset cache has an invalid label");
    r.doubles(s.values);
  }
  return out;
}

bool read_magic(std::istream& in) {
  char magic[8]{};
  in.read(magic, sizeof magic);
  return in.gcount() == sizeof magic && std::memcmp(magic, kMagic, sizeof magic) == 0;
}

}  // namespace

void write_dataset_cache(const std::filesystem::path& path, const PreparedDataset& dataset) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    detail::BinaryWriter w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.value<std::uint32_t>(kDatasetCacheVersion);
    w.value<std::uint32_t>(dataset.schema_hash);
    w.value<std::uint32_t>(dataset.source_hash);
    w.value<std::uint64_t>(dataset.train.size());
    w.value<std::uint64_t>(dataset.test.size());
    w.string(to_json(dataset.stats).dump());
    w.string(dataset.summary.dump());
    write_samples(w, dataset.train);
    write_samples(w, dataset.test);
    w.finish();
    if (!w.good()) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<DatasetCacheHeader> peek_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in || !read_magic(in)) return std::nullopt;
  DatasetCacheHeader h;
  in.read(reinterpret_cast<char*>(&h.version), sizeof h.version);
  in.read(reinterpret_cast<char*>(&h.schema_hash), sizeof h.schema_hash);
  in.read(reinterpret_cast<char*>(&h.source_hash), sizeof h.source_hash);
  in.read(reinterpret_cast<char*>(&h.train_count), sizeof h.train_count);
  in.read(reinterpret_cast<char*>(&h.test_count), sizeof h.test_count);
  if (!in) return std::nullopt;
  return h;
}

PreparedDataset read_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  detail::BinaryReader r(in, "dataset cache " + path.string());
  char magic[8]{};
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw IntegrityError(path.string() + " is not a dataset cache");
  const auto version = r.value<std::uint32_t>();
  if (version != kDatasetCacheVersion) {
    throw VersionError("dataset cache version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDatasetCacheVersion) + ")");
  }
  PreparedDataset d;
  d.schema_hash = r.value<std::uint32_t>();
  d.source_hash = r.value<std::uint32_t>();
  const auto n_train = r.value<std::uint64_t>();
  const auto n_test = r.value<std::uint64_t>();
  const std::uint64_t record_bytes = sizeof(std::int32_t) + kEncodedWidth * sizeof(double);
  const auto file_size = std::filesystem::file_size(path);
  if (n_train > file_size / record_bytes || n_test > file_size / record_bytes) {
    throw IntegrityError("dataset cache " + path.string() + " declares more samples than it holds");
  }
  const auto stats_text = r.string();
  const auto summary_text = r.string();
  d.train = read_samples(r, n_train);
  d.test = read_samples(r, n_test);
  r.verify_checksum();
  try {
    d.stats = pipeline_stats_from_json(nlohmann::json::parse(stats_text));
    d.summary = nlohmann::json::parse(summary_text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("dataset cache metadata is malformed: " + std::string(e.what()));
  }
  return d;
}

}  // namespace moeids::data
