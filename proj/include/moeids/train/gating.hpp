#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/train/model.hpp"

namespace moeids::train {

struct ExpertUsage {
  double importance = 0.0;     // total gate mass
  std::size_t selections = 0;  // samples that routed to this expert
  double load = 0.0;           // sum of selection probabilities
};

/// Per-expert utilization under eval-mode routing. The load estimate uses the
/// clean logits as the routing values and the learned noise scale.
struct GatingReport {
  std::size_t n_experts = 0;
  std::size_t top_k = 0;
  std::size_t samples = 0;
  std::vector<ExpertUsage> experts;
  double importance_cv2 = 0.0;
  double load_cv2 = 0.0;
  double selection_cv2 = 0.0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Throws ConfigError for models without a mixture-of-experts head.
GatingReport gating_report(IdsModel& model, std::span<const data::EncodedSample> samples,
                           std::size_t batch_size = 1024);

}  // namespace moeids::train
