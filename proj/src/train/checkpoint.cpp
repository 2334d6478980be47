#include "moeids/train/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "core/binary_io.hpp"
#include "moeids/errors.hpp"

namespace moeids::train {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'E', 'I', 'D', 'S', 'C', 'K'};
constexpr std::uint32_t kMaxRank = 8;

void write_tensors(detail::BinaryWriter& w, const std::vector<nn::NamedTensor>& tensors) {
  w.value<std::uint64_t>(tensors.size());
  for (const auto& t : tensors) {
    w.string(t.name);
    w.value<std::uint32_t>(static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) w.value<std::uint64_t>(d);
    w.doubles(t.tensor.data());
  }
}

std::vector<nn::NamedTensor> read_tensors(detail::BinaryReader& r, std::uint64_t file_size) {
  const auto count = r.value<std::uint64_t>();
  if (count > file_size) throw IntegrityError("checkpoint declares an implausible tensor count");
  std::vector<nn::NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    nn::NamedTensor t;
    t.name = r.string(4096);
    const auto rank = r.value<std::uint32_t>();
    if (rank == 0 || rank > kMaxRank) throw IntegrityError("tensor '" + t.name + "' has an invalid rank");
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = r.value<std::uint64_t>();
      if (d == 0 || d > file_size) throw IntegrityError("tensor '" + t.name + "' has an invalid dimension");
      numel *= d;
      if (numel > file_size / sizeof(double)) throw IntegrityError("tensor '" + t.name + "' is larger than the file");
    }
    std::vector<double> values(numel);
    r.doubles(values);
    t.tensor = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json parse_block(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint ") + what + " block is malformed: " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const IdsModel& model, const data::PipelineStats* stats,
                     std::uint32_t schema_hash, const nlohmann::json& metadata) {
  auto tensors = model.parameters();
  for (auto& b : model.buffers()) tensors.push_back(b);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    detail::BinaryWriter w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.value<std::uint32_t>(kCheckpointVersion);
    w.value<std::uint32_t>(schema_hash);
    w.string(model.config().to_json().dump());
    w.string(metadata.dump());
    w.string(stats ? data::to_json(*stats).dump() : std::string());
    write_tensors(w, tensors);
    w.finish();
    if (!w.good()) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  detail::BinaryReader r(in, "checkpoint " + path.string());
  char magic[8]{};
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw IntegrityError(path.string() + " is not a checkpoint");
  const auto version = r.value<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const auto schema_hash = r.value<std::uint32_t>();
  const auto config_text = r.string(file_size);
  const auto metadata_text = r.string(file_size);
  const auto stats_text = r.string(file_size);
  auto tensors = read_tensors(r, file_size);
  r.verify_checksum();

  ModelConfig config;
  try {
    config = ModelConfig::from_json(parse_block(config_text, "config"));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint config is incomplete: ") + e.what());
  }
  Rng unused(0);
  Checkpoint ck{IdsModel(config, unused), std::nullopt, schema_hash, parse_block(metadata_text, "metadata")};
  ck.model.load_state(tensors);
  if (!stats_text.empty()) {
    try {
      ck.stats = data::pipeline_stats_from_json(parse_block(stats_text, "pipeline statistics"));
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError(std::string("checkpoint pipeline statistics are incomplete: ") + e.what());
    }
  }
  return ck;
}

}  // namespace moeids::train
