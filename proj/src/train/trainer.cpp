#include "moeids/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "moeids/errors.hpp"
#include "moeids/ops.hpp"
#include "moeids/train/optimizer.hpp"

namespace moeids::train {

namespace {

constexpr std::uint64_t kInitSalt = 1;
constexpr std::uint64_t kShuffleSalt = 2;
constexpr std::uint64_t kNoiseSalt = 3;

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace

LossTerms total_loss(const Tensor& logits, std::span<const int> labels, const Tensor& gates, const Tensor& load_p,
                     double alpha) {
  LossTerms t;
  Tensor ce = nn::cross_entropy(logits, labels);
  t.cross_entropy = ce.item();
  t.total = ce;
  Tensor balance;
  if (gates.defined()) {
    Tensor imp = moe::importance_loss(gates, 1.0);
    t.importance = imp.item();
    balance = imp;
  }
  if (load_p.defined()) {
    Tensor load = moe::load_loss(load_p, 1.0);
    t.load = load.item();
    balance = balance.defined() ? add(balance, load) : load;
  }
  if (balance.defined() && alpha != 0.0) t.total = add(ce, scale(balance, alpha));
  return t;
}

nlohmann::json TrainingHistory::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"steps", e.steps},
                    {"total", e.total},
                    {"cross_entropy", e.cross_entropy},
                    {"importance", e.importance},
                    {"load", e.load},
                    {"train_accuracy", e.train_accuracy}});
  }
  return {{"epochs", rows}};
}

TrainingHistory TrainingHistory::from_json(const nlohmann::json& j) {
  TrainingHistory h;
  for (const auto& r : j.at("epochs")) {
    EpochRecord e;
    e.epoch = r.at("epoch").get<std::size_t>();
    e.steps = r.at("steps").get<std::size_t>();
    e.total = r.at("total").get<double>();
    e.cross_entropy = r.at("cross_entropy").get<double>();
    e.importance = r.at("importance").get<double>();
    e.load = r.at("load").get<double>();
    e.train_accuracy = r.at("train_accuracy").get<double>();
    h.epochs.push_back(e);
  }
  return h;
}

SeedStreams::SeedStreams(std::uint64_t seed)
    : init(Rng(seed).fork(kInitSalt)), shuffle(Rng(seed).fork(kShuffleSalt)), noise(Rng(seed).fork(kNoiseSalt)) {}

IdsModel build_model(const TrainConfig& config) {
  config.validate();
  SeedStreams streams(config.seed);
  return IdsModel(config.model_config(), streams.init);
}

std::vector<std::size_t> batch_boundaries(std::size_t count, std::size_t batch_size) {
  std::vector<std::size_t> ends;
  for (std::size_t end = std::min(batch_size, count); end <= count && end > 0;) {
    ends.push_back(end);
    if (end == count) break;
    end = std::min(end + batch_size, count);
  }
  if (ends.size() >= 2 && ends.back() - ends[ends.size() - 2] == 1) {
    ends.erase(ends.end() - 2);
  }
  return ends;
}

TrainingHistory train(IdsModel& model, std::span<const data::EncodedSample> train_set, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  SeedStreams streams(config.seed);
  auto optimizer = make_optimizer(config.optimizer, model.parameters(), config.learning_rate);
  const bool balance = !config.disable_balancing_losses;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto ends = batch_boundaries(order.size(), config.batch_size);

  TrainingHistory history;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    streams.shuffle.shuffle(std::span<std::size_t>(order));
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t correct = 0, begin = 0;
    for (std::size_t step = 0; step < ends.size(); ++step) {
      const std::span<const std::size_t> idx(order.data() + begin, ends[step] - begin);
      begin = ends[step];
      const Tensor batch = data::make_batch(train_set, idx);
      const auto labels = data::batch_labels(train_set, idx);

      auto out = model.forward(batch, nn::Mode::kTrain, streams.noise);
      auto loss = balance ? total_loss(out.logits, labels, out.gates, out.load_p, config.alpha)
                          : total_loss(out.logits, labels, Tensor(), Tensor(), 0.0);
      const std::pair<const char*, double> parts[] = {{"cross-entropy", loss.cross_entropy},
                                                      {"importance loss", loss.importance},
                                                      {"load loss", loss.load},
                                                      {"total loss", loss.total.item()}};
      for (const auto& [name, value] : parts) {
        if (!std::isfinite(value)) {
          throw TrainingError(std::string(name) + " is not finite (" + std::to_string(value) + ") at epoch " +
                              std::to_string(epoch) + ", step " + std::to_string(step + 1));
        }
      }

      optimizer->zero_grad();
      loss.total.backward();
      optimizer->step();

      rec.total += loss.total.item();
      rec.cross_entropy += loss.cross_entropy;
      rec.importance += loss.importance;
      rec.load += loss.load;
      const std::size_t classes = out.logits.dim(1);
      for (std::size_t r = 0; r < labels.size(); ++r) {
        if (static_cast<int>(argmax_row(out.logits.data().subspan(r * classes, classes))) == labels[r]) ++correct;
      }
      ++rec.steps;
    }
    const double steps = static_cast<double>(rec.steps);
    rec.total /= steps;
    rec.cross_entropy /= steps;
    rec.importance /= steps;
    rec.load /= steps;
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    spdlog::info("epoch {}/{}: loss {:.6f} (ce {:.6f}, importance {:.6f}, load {:.6f}), train accuracy {:.4f}", epoch,
                 config.max_epochs, rec.total, rec.cross_entropy, rec.importance, rec.load, rec.train_accuracy);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

std::vector<int> predict(IdsModel& model, std::span<const data::EncodedSample> samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  NoGradGuard guard;
  Rng unused(0);
  std::vector<int> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, samples.size());
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor logits = model.forward(data::make_batch(samples, idx), nn::Mode::kEval, unused).logits;
    const std::size_t classes = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.push_back(static_cast<int>(argmax_row(logits.data().subspan(r * classes, classes))));
    }
  }
  return out;
}

}  // namespace moeids::train
