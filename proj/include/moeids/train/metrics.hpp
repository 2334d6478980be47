#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/encoder.hpp"
#include "moeids/train/model.hpp"

namespace moeids::train {

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  /// Set when the class was never predicted; precision is then 0.
  bool precision_undefined = false;
  /// Set when the class has no true samples; recall is then 0.
  bool recall_undefined = false;
};

struct EvalReport {
  std::vector<ClassMetrics> classes;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::size_t samples = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Fixed-width table in class order followed by the overall figures.
  std::string to_text() const;
};

/// One-vs-rest metrics from a square confusion matrix; `names` labels its rows.
EvalReport report_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                 const std::vector<std::string>& names);

EvalReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                   const std::vector<std::string>& names);

/// The nine class names in report order.
std::vector<std::string> default_class_names();

/// Eval-mode predictions on `test_set`. Throws InputError on an empty set.
EvalReport evaluate(IdsModel& model, std::span<const data::EncodedSample> test_set, std::size_t batch_size = 1024);

}  // namespace moeids::train
