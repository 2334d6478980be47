#include "moeids/train/metrics.hpp"

#include <fmt/format.h>

#include "moeids/data/schema.hpp"
#include "moeids/errors.hpp"
#include "moeids/train/trainer.hpp"

namespace moeids::train {

std::vector<std::string> default_class_names() {
  return {data::kClassNames.begin(), data::kClassNames.end()};
}

EvalReport report_from_confusion(const std::vector<std::vector<std::size_t>>& confusion,
                                 const std::vector<std::string>& names) {
  const std::size_t c = confusion.size();
  if (names.size() != c) throw DimensionError("confusion matrix and class names disagree in size");
  for (const auto& row : confusion)
    if (row.size() != c) throw DimensionError("confusion matrix must be square");

  EvalReport r;
  r.confusion = confusion;
  std::size_t trace = 0;
  for (std::size_t i = 0; i < c; ++i) {
    trace += confusion[i][i];
    for (std::size_t j = 0; j < c; ++j) r.samples += confusion[i][j];
  }
  if (r.samples == 0) throw InputError("cannot score an empty evaluation set");
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.samples);

  double weighted = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    ClassMetrics m;
    m.name = names[k];
    const std::size_t tp = confusion[k][k];
    std::size_t predicted = 0;
    for (std::size_t i = 0; i < c; ++i) {
      m.support += confusion[k][i];
      predicted += confusion[i][k];
    }
    m.precision_undefined = predicted == 0;
    m.recall_undefined = m.support == 0;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    weighted += static_cast<double>(m.support) * m.f1;
    r.classes.push_back(m);
  }
  r.weighted_f1 = weighted / static_cast<double>(r.samples);
  return r;
}

EvalReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                   const std::vector<std::string>& names) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and predictions differ in length");
  const std::size_t c = names.size();
  std::vector<std::vector<std::size_t>> confusion(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= static_cast<int>(c) || predicted[i] < 0 || predicted[i] >= static_cast<int>(c)) {
      throw LabelError("class index out of range at sample " + std::to_string(i));
    }
    ++confusion[truth[i]][predicted[i]];
  }
  return report_from_confusion(confusion, names);
}

EvalReport evaluate(IdsModel& model, std::span<const data::EncodedSample> test_set, std::size_t batch_size) {
  if (test_set.empty()) throw InputError("evaluation set is empty");
  const auto predicted = predict(model, test_set, batch_size);
  std::vector<int> truth(test_set.size());
  for (std::size_t i = 0; i < test_set.size(); ++i) truth[i] = test_set[i].label;
  return report_from_predictions(truth, predicted, default_class_names());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& m : classes) {
    cls.push_back({{"name", m.name},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support},
                   {"precision_undefined", m.precision_undefined},
                   {"recall_undefined", m.recall_undefined}});
  }
  return {{"classes", cls},
          {"confusion", confusion},
          {"accuracy", accuracy},
          {"weighted_f1", weighted_f1},
          {"samples", samples}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& c : j.at("classes")) {
    ClassMetrics m;
    m.name = c.at("name").get<std::string>();
    m.precision = c.at("precision").get<double>();
    m.recall = c.at("recall").get<double>();
    m.f1 = c.at("f1").get<double>();
    m.support = c.at("support").get<std::size_t>();
    m.precision_undefined = c.at("precision_undefined").get<bool>();
    m.recall_undefined = c.at("recall_undefined").get<bool>();
    r.classes.push_back(m);
  }
  r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
  r.accuracy = j.at("accuracy").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.samples = j.at("samples").get<std::size_t>();
  return r;
}

std::string EvalReport::to_text() const {
  std::string out = fmt::format("{:<18} {:>9} {:>9} {:>9} {:>9}\n", "class", "precision", "recall", "f1", "support");
  for (const auto& m : classes) {
    out += fmt::format("{:<18} {:>9.5f} {:>9.5f} {:>9.5f} {:>9}{}\n", m.name, m.precision, m.recall, m.f1, m.support,
                       m.precision_undefined ? "  (never predicted)" : "");
  }
  out += fmt::format("\naccuracy     {:.5f}\nweighted f1  {:.5f}\nsamples      {}\n", accuracy, weighted_f1, samples);
  return out;
}

}  // namespace moeids::train
