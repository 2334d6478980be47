#include "moeids/train/gating.hpp"

#include <numeric>

#include <fmt/format.h>

#include "moeids/errors.hpp"
#include "moeids/ops.hpp"

namespace moeids::train {

namespace {

double cv2_of(const std::vector<double>& v) {
  return coefficient_of_variation_sq(Tensor({v.size()}, v)).item();
}

}  // namespace

GatingReport gating_report(IdsModel& model, std::span<const data::EncodedSample> samples, std::size_t batch_size) {
  if (model.config().architecture != Architecture::kFull) {
    throw ConfigError("gating report needs a model with a mixture-of-experts head (architecture " +
                      to_string(model.config().architecture) + ")");
  }
  if (samples.empty()) throw InputError("gating report needs at least one sample");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  NoGradGuard guard;
  GatingReport r;
  r.n_experts = model.config().moe.n_experts;
  r.top_k = model.config().moe.top_k;
  r.samples = samples.size();
  r.experts.resize(r.n_experts);
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, samples.size());
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto decision = *model.route(data::make_batch(samples, idx));
    const Tensor p = moe::load_probability(decision);
    for (std::size_t row = 0; row < idx.size(); ++row) {
      for (std::size_t e = 0; e < r.n_experts; ++e) {
        r.experts[e].importance += decision.gates[row * r.n_experts + e];
        r.experts[e].load += p[row * r.n_experts + e];
      }
      for (std::size_t e : decision.selected[row]) ++r.experts[e].selections;
    }
  }
  std::vector<double> imp, load, sel;
  for (const auto& e : r.experts) {
    imp.push_back(e.importance);
    load.push_back(e.load);
    sel.push_back(static_cast<double>(e.selections));
  }
  r.importance_cv2 = cv2_of(imp);
  r.load_cv2 = cv2_of(load);
  r.selection_cv2 = cv2_of(sel);
  return r;
}

nlohmann::json GatingReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t e = 0; e < experts.size(); ++e) {
    rows.push_back({{"expert", e},
                    {"importance", experts[e].importance},
                    {"selections", experts[e].selections},
                    {"load", experts[e].load}});
  }
  return {{"n_experts", n_experts},
          {"top_k", top_k},
          {"samples", samples},
          {"experts", rows},
          {"importance_cv2", importance_cv2},
          {"load_cv2", load_cv2},
          {"selection_cv2", selection_cv2}};
}

std::string GatingReport::to_text() const {
  std::string out = fmt::format("{:>6} {:>12} {:>10} {:>12}\n", "expert", "importance", "selected", "load");
  for (std::size_t e = 0; e < experts.size(); ++e) {
    out += fmt::format("{:>6} {:>12.4f} {:>10} {:>12.4f}\n", e, experts[e].importance, experts[e].selections,
                       experts[e].load);
  }
  out += fmt::format("\nsamples {}  n {}  k {}\nCV^2 importance {:.6f}  load {:.6f}  selections {:.6f}\n", samples,
                     n_experts, top_k, importance_cv2, load_cv2, selection_cv2);
  return out;
}

}  // namespace moeids::train
