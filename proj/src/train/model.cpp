#include "moeids/train/model.hpp"

#include <algorithm>
#include <map>

#include "moeids/data/schema.hpp"
#include "moeids/errors.hpp"
#include "moeids/ops.hpp"

namespace moeids::train {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::kFull: return "full";
    case Architecture::kNoMoe: return "no_moe";
    case Architecture::kNoCnn: return "no_cnn";
  }
  return "?";
}

Architecture parse_architecture(std::string_view text) {
  if (text == "full") return Architecture::kFull;
  if (text == "no_moe") return Architecture::kNoMoe;
  if (text == "no_cnn") return Architecture::kNoCnn;
  throw ConfigError("unknown architecture '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (n_classes == 0) throw ConfigError("n_classes must be positive");
  if (backbone.filters.empty()) throw ConfigError("backbone needs at least one cell");
  if (backbone.in_channels * backbone.length != data::kEncodedWidth) {
    throw ConfigError("backbone input " + std::to_string(backbone.in_channels) + "x" + std::to_string(backbone.length) +
                      " does not hold " + std::to_string(data::kEncodedWidth) + " features");
  }
  if (architecture == Architecture::kFull) {
    moe.validate();
    if (moe.input_dim != backbone.output_features() || moe.n_classes != n_classes) {
      throw ConfigError("moe dimensions do not match the backbone and class count");
    }
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"architecture", to_string(architecture)},
          {"n_classes", n_classes},
          {"backbone",
           {{"in_channels", backbone.in_channels},
            {"length", backbone.length},
            {"filters", backbone.filters},
            {"bn_momentum", backbone.batch_norm.momentum},
            {"bn_eps", backbone.batch_norm.eps}}},
          {"moe",
           {{"n_experts", moe.n_experts},
            {"top_k", moe.top_k},
            {"input_dim", moe.input_dim},
            {"expert_hidden", moe.expert_hidden},
            {"w_importance", moe.w_importance},
            {"w_load", moe.w_load},
            {"noise_enabled", moe.noise_enabled}}}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  c.n_classes = j.at("n_classes").get<std::size_t>();
  const auto& b = j.at("backbone");
  c.backbone.in_channels = b.at("in_channels").get<std::size_t>();
  c.backbone.length = b.at("length").get<std::size_t>();
  c.backbone.filters = b.at("filters").get<std::vector<std::size_t>>();
  c.backbone.batch_norm.momentum = b.at("bn_momentum").get<double>();
  c.backbone.batch_norm.eps = b.at("bn_eps").get<double>();
  const auto& m = j.at("moe");
  c.moe.n_experts = m.at("n_experts").get<std::size_t>();
  c.moe.top_k = m.at("top_k").get<std::size_t>();
  c.moe.input_dim = m.at("input_dim").get<std::size_t>();
  c.moe.expert_hidden = m.at("expert_hidden").get<std::size_t>();
  c.moe.n_classes = c.n_classes;
  c.moe.w_importance = m.at("w_importance").get<double>();
  c.moe.w_load = m.at("w_load").get<double>();
  c.moe.noise_enabled = m.at("noise_enabled").get<bool>();
  return c;
}

IdsModel::IdsModel(const ModelConfig& config, Rng& init_rng) : config_(config) {
  config_.validate();
  switch (config_.architecture) {
    case Architecture::kFull:
      backbone_.emplace(config_.backbone, init_rng);
      moe_.emplace(config_.moe, init_rng);
      break;
    case Architecture::kNoMoe:
      backbone_.emplace(config_.backbone, init_rng);
      head_.emplace(backbone_->output_features(), config_.n_classes, init_rng);
      break;
    case Architecture::kNoCnn:
      head_.emplace(data::kEncodedWidth, config_.n_classes, init_rng);
      break;
  }
}

Tensor IdsModel::features(const Tensor& batch, nn::Mode mode) {
  const auto& b = config_.backbone;
  if (batch.rank() != 3 || batch.dim(1) != b.in_channels || batch.dim(2) != b.length) {
    throw DimensionError("model: expected input (batch," + std::to_string(b.in_channels) + "," +
                         std::to_string(b.length) + "), got " + shape_to_string(batch.shape()));
  }
  if (backbone_) return backbone_->forward(batch, mode);
  return reshape(batch, {batch.dim(0), data::kEncodedWidth});
}

IdsModel::Output IdsModel::forward(const Tensor& batch, nn::Mode mode, Rng& noise_rng) {
  Output out;
  Tensor f = features(batch, mode);
  if (moe_) {
    auto m = moe_->forward(f, mode, noise_rng);
    out.logits = m.logits;
    out.gates = m.decision.gates;
    out.load_p = m.load_p;
  } else {
    out.logits = head_->forward(f);
  }
  return out;
}

std::optional<moe::GateDecision> IdsModel::route(const Tensor& batch) {
  if (!moe_) return std::nullopt;
  Rng unused(0);
  return moe_->route(features(batch, nn::Mode::kEval), nn::Mode::kEval, unused);
}

std::vector<nn::NamedTensor> IdsModel::parameters() const {
  std::vector<nn::NamedTensor> p;
  if (backbone_) backbone_->collect("backbone.", p);
  if (moe_) moe_->collect("moe.", p);
  if (head_) head_->collect("head.", p);
  return p;
}

std::vector<nn::NamedTensor> IdsModel::buffers() const {
  std::vector<nn::NamedTensor> b;
  if (backbone_) backbone_->collect_buffers("backbone.", b);
  return b;
}

std::size_t IdsModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

void IdsModel::load_state(const std::vector<nn::NamedTensor>& state) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& s : state) {
    if (!by_name.emplace(s.name, &s.tensor).second) throw IntegrityError("duplicate tensor '" + s.name + "'");
  }
  auto targets = parameters();
  for (auto& b : buffers()) targets.push_back(b);
  if (targets.size() != state.size()) {
    throw IntegrityError("state has " + std::to_string(state.size()) + " tensors, model expects " +
                         std::to_string(targets.size()));
  }
  for (auto& t : targets) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw IntegrityError("state is missing tensor '" + t.name + "'");
    if (it->second->shape() != t.tensor.shape()) {
      throw IntegrityError("tensor '" + t.name + "' has shape " + shape_to_string(it->second->shape()) +
                           ", model expects " + shape_to_string(t.tensor.shape()));
    }
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), t.tensor.mutable_data().begin());
  }
}

}  // namespace moeids::train
