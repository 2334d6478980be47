#include "moeids/cli/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "moeids/data/cache.hpp"
#include "moeids/errors.hpp"
#include "moeids/train/ablation.hpp"
#include "moeids/train/checkpoint.hpp"
#include "moeids/train/gating.hpp"
#include "moeids/train/metrics.hpp"
#include "moeids/train/trainer.hpp"

namespace moeids::cli {

namespace fs = std::filesystem;

nlohmann::json RunConfig::to_json() const {
  return {{"command", command},
          {"dataset", dataset.string()},
          {"checkpoint", checkpoint.string()},
          {"out", out.string()},
          {"pipeline", pipeline.to_json()},
          {"train", train.to_json()},
          {"ablate", ablate},
          {"expert_grid", expert_grid},
          {"split", split},
          {"format", format}};
}

void configure_logging() {
  auto logger = spdlog::get("moeids");
  if (!logger) {
    logger = spdlog::stderr_color_mt("moeids");
    spdlog::set_default_logger(logger);
  }
  const char* level = std::getenv("MOEIDS_LOG_LEVEL");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  f << j.dump(2) << '\n';
  if (!f) throw InputError("cannot write " + path.string());
}

fs::path make_run_dir(const RunConfig& cfg) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = fmt::format("run-{}-seed{}", stamp, cfg.train.seed);
  fs::path dir = cfg.out / base;
  for (int i = 2; fs::exists(dir); ++i) dir = cfg.out / fmt::format("{}-{}", base, i);
  fs::create_directories(dir);
  return dir;
}

void require_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw ConfigError(cfg.command + " needs --dataset");
  if (!fs::exists(cfg.dataset)) throw InputError("dataset " + cfg.dataset.string() + " does not exist");
}

/// A dataset cache as is, or a CSV run through the pipeline.
data::PreparedDataset load_prepared(const RunConfig& cfg) {
  require_dataset(cfg);
  const auto& schema = data::FlowSchema::nidd();
  if (data::peek_dataset_cache(cfg.dataset)) {
    auto d = data::read_dataset_cache(cfg.dataset);
    if (d.schema_hash != schema.hash()) {
      throw SchemaError(fmt::format("dataset cache schema hash {:08x} does not match this build's {:08x}", d.schema_hash,
                                    schema.hash()));
    }
    spdlog::info("loaded {} train / {} test samples from cache {}", d.train.size(), d.test.size(),
                 cfg.dataset.string());
    return d;
  }
  return data::prepare_dataset(cfg.dataset, schema, cfg.pipeline);
}

std::vector<data::EncodedSample> evaluation_samples(const RunConfig& cfg, const train::Checkpoint& ck) {
  require_dataset(cfg);
  if (cfg.split != "test" && cfg.split != "all") throw ConfigError("--split must be test or all");
  const bool test_only = cfg.split == "test";
  const auto& schema = data::FlowSchema::nidd();
  if (data::peek_dataset_cache(cfg.dataset)) {
    auto d = data::read_dataset_cache(cfg.dataset);
    if (d.schema_hash != ck.schema_hash) {
      throw SchemaError(fmt::format("dataset schema hash {:08x} is incompatible with the checkpoint's {:08x}",
                                    d.schema_hash, ck.schema_hash));
    }
    if (ck.stats && data::to_json(*ck.stats) != data::to_json(d.stats)) {
      spdlog::warn("the cache was encoded with different preprocessing statistics than the checkpoint");
    }
    if (test_only) return std::move(d.test);
    d.train.insert(d.train.end(), d.test.begin(), d.test.end());
    return std::move(d.train);
  }
  if (ck.schema_hash != schema.hash()) {
    throw SchemaError(fmt::format("checkpoint schema hash {:08x} is incompatible with this build's {:08x}",
                                  ck.schema_hash, schema.hash()));
  }
  if (!ck.stats) throw SchemaError("checkpoint carries no preprocessing statistics; pass a dataset cache instead");
  auto options = data::PipelineOptions::from_json(ck.metadata.value("pipeline", nlohmann::json::object()));
  options.csv.label_column = cfg.pipeline.csv.label_column;
  return data::encode_frozen(data::parse_flow_csv(cfg.dataset, schema, options.csv), schema, options, *ck.stats,
                             test_only);
}

void print_report(std::ostream& out, const RunConfig& cfg, const train::EvalReport& report) {
  if (cfg.format == "json") out << report.to_json().dump(2) << '\n';
  else out << report.to_text();
}

/// Trains `config` on the prepared data and writes checkpoint, history and
/// test report into `dir`.
std::optional<train::EvalReport> train_into(const fs::path& dir, const train::TrainConfig& config,
                                            const data::PreparedDataset& d) {
  fs::create_directories(dir);
  train::IdsModel model = train::build_model(config);
  const auto history = train::train(model, d.train, config);
  const auto& last = history.epochs.back();
  const nlohmann::json metadata = {
      {"train_config", config.to_json()},
      {"pipeline", d.summary.value("options", nlohmann::json::object())},
      {"seed", config.seed},
      {"epochs_run", history.epochs.size()},
      {"parameter_count", model.parameter_count()},
      {"final_losses",
       {{"total", last.total}, {"cross_entropy", last.cross_entropy}, {"importance", last.importance}, {"load", last.load}}}};
  train::save_checkpoint(dir / "checkpoint.bin", model, &d.stats, d.schema_hash, metadata);
  write_json(dir / "history.json", history.to_json());
  write_json(dir / "train_config.json", config.to_json());
  if (d.test.empty()) return std::nullopt;
  auto report = train::evaluate(model, d.test, config.batch_size);
  write_json(dir / "report.json", report.to_json());
  return report;
}

std::vector<std::string> split_top_level(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::vector<std::pair<std::size_t, std::size_t>> grid_pairs(const RunConfig& cfg) {
  if (cfg.expert_grid == "default") return train::default_expert_grid();
  return train::parse_expert_grid(cfg.expert_grid);
}

int cmd_preprocess(const RunConfig& cfg, std::ostream& out) {
  require_dataset(cfg);
  if (data::peek_dataset_cache(cfg.dataset)) throw ConfigError(cfg.dataset.string() + " is already a dataset cache");
  const auto& schema = data::FlowSchema::nidd();
  fs::create_directories(cfg.out);
  const fs::path cache = cfg.out / "dataset.cache";
  const std::uint32_t fingerprint = data::source_fingerprint(cfg.dataset, cfg.pipeline);
  if (auto h = data::peek_dataset_cache(cache);
      h && h->version == data::kDatasetCacheVersion && h->schema_hash == schema.hash() && h->source_hash == fingerprint) {
    spdlog::info("cache {} matches source hash {:08x}; reusing it", cache.string(), fingerprint);
    out << "cache reused: " << cache.string() << '\n';
    return kExitOk;
  }
  auto d = data::prepare_dataset(cfg.dataset, schema, cfg.pipeline);
  data::write_dataset_cache(cache, d);
  write_json(cfg.out / "pipeline_stats.json", data::to_json(d.stats));
  write_json(cfg.out / "summary.json", d.summary);
  write_json(cfg.out / "effective_config.json", cfg.to_json());
  out << fmt::format("{:<18} {:>9} {:>9} {:>9}\n", "class", "total", "train", "test");
  for (const auto& c : d.summary["classes"]) {
    out << fmt::format("{:<18} {:>9} {:>9} {:>9}\n", c["name"].get<std::string>(), c["total"].get<std::size_t>(),
                       c["train"].get<std::size_t>(), c["test"].get<std::size_t>());
  }
  out << fmt::format("skipped rows {}\nwrote {} (width {}, {} samples)\n", d.summary["skipped_rows"].get<std::size_t>(),
                     cache.string(), data::kEncodedWidth, d.train.size() + d.test.size());
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto d = load_prepared(cfg);
  const fs::path run = make_run_dir(cfg);
  write_json(run / "effective_config.json", cfg.to_json());
  if (!cfg.expert_grid.empty()) {
    if (!cfg.ablate.empty()) throw ConfigError("--ablate and --expert-grid cannot be combined for train");
    nlohmann::json summary = nlohmann::json::array();
    out << fmt::format("{:<10} {:>9} {:>12} {:>12}\n", "(n,k)", "params", "accuracy", "weighted f1");
    for (const auto& [n, k] : grid_pairs(cfg)) {
      const auto config = train::apply_ablation(cfg.train, train::AblationVariant::grid(n, k));
      const auto report = train_into(run / fmt::format("grid-n{}-k{}", n, k), config, d);
      const std::size_t params = train::build_model(config).parameter_count();
      nlohmann::json row = {{"n_experts", n}, {"top_k", k}, {"parameter_count", params}};
      if (report) row["report"] = report->to_json();
      summary.push_back(row);
      out << fmt::format("({},{}){:<{}} {:>9} {:>12.5f} {:>12.5f}\n", n, k, "", 10 - fmt::formatted_size("({},{})", n, k),
                         params, report ? report->accuracy : 0.0, report ? report->weighted_f1 : 0.0);
    }
    write_json(run / "grid_summary.json", summary);
  } else {
    train::TrainConfig config = cfg.train;
    if (cfg.ablate.size() > 1) throw ConfigError("train takes a single --ablate variant; use the ablate command for several");
    if (!cfg.ablate.empty()) config = train::apply_ablation(config, train::AblationVariant::parse(cfg.ablate[0]));
    const auto report = train_into(run, config, d);
    if (report) print_report(out, cfg, *report);
  }
  out << "run directory: " << run.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint");
  auto ck = train::load_checkpoint(cfg.checkpoint);
  const auto samples = evaluation_samples(cfg, ck);
  const auto report = train::evaluate(ck.model, samples, cfg.train.batch_size);
  const fs::path run = make_run_dir(cfg);
  write_json(run / "effective_config.json", cfg.to_json());
  write_json(run / "report.json", report.to_json());
  print_report(out, cfg, report);
  return kExitOk;
}

int cmd_gating_report(const RunConfig& cfg, std::ostream& out) {
  if (cfg.checkpoint.empty()) throw ConfigError("gating-report needs --checkpoint");
  auto ck = train::load_checkpoint(cfg.checkpoint);
  const auto samples = evaluation_samples(cfg, ck);
  const auto report = train::gating_report(ck.model, samples, cfg.train.batch_size);
  const fs::path run = make_run_dir(cfg);
  write_json(run / "effective_config.json", cfg.to_json());
  write_json(run / "gating.json", report.to_json());
  if (cfg.format == "json") out << report.to_json().dump(2) << '\n';
  else out << report.to_text();
  return kExitOk;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  std::vector<train::AblationVariant> variants;
  for (const auto& name : cfg.ablate) variants.push_back(train::AblationVariant::parse(name));
  if (!cfg.expert_grid.empty()) {
    for (const auto& [n, k] : grid_pairs(cfg)) variants.push_back(train::AblationVariant::grid(n, k));
  }
  if (variants.empty()) {
    for (const char* name : {"zero_losses", "no_moe", "no_cnn"}) variants.push_back(train::AblationVariant::parse(name));
  }
  for (const auto& v : variants) train::apply_ablation(cfg.train, v);  // validate before training anything

  const auto d = load_prepared(cfg);
  if (d.test.empty()) throw InputError("ablation needs a non-empty test split");
  const fs::path run = make_run_dir(cfg);
  write_json(run / "effective_config.json", cfg.to_json());

  nlohmann::json results = nlohmann::json::array();
  out << fmt::format("{:<22} {:>9} {:>12} {:>12}\n", "variant", "params", "accuracy", "weighted f1");
  auto record = [&](const std::string& name, const train::TrainConfig& config, std::size_t params,
                    const train::TrainingHistory& history, const train::EvalReport& report) {
    results.push_back({{"variant", name},
                       {"config", config.to_json()},
                       {"changed", train::config_diff(cfg.train, config)},
                       {"parameter_count", params},
                       {"history", history.to_json()},
                       {"report", report.to_json()}});
    out << fmt::format("{:<22} {:>9} {:>12.5f} {:>12.5f}\n", name, params, report.accuracy, report.weighted_f1);
  };

  {
    train::IdsModel model = train::build_model(cfg.train);
    const auto history = train::train(model, d.train, cfg.train);
    record("baseline", cfg.train, model.parameter_count(), history,
           train::evaluate(model, d.test, cfg.train.batch_size));
  }
  for (const auto& v : variants) {
    const auto r = train::run_ablation(cfg.train, v, d.train, d.test);
    record(r.variant, r.config, r.parameter_count, r.history, r.report);
  }
  write_json(run / "ablation.json", results);
  out << "run directory: " << run.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  RunConfig cfg;
  CLI::App app{"Mixture-of-experts network intrusion detection", "moeids"};
  app.set_config("--config", "", "Key-value config file (key = value per line); command-line flags take precedence");
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string dataset, checkpoint, out_dir = cfg.out.string(), imputation = "leak-free", optimizer = "adam";
  std::vector<std::string> ablate;
  app.add_option("--dataset", dataset, "Flow CSV or dataset cache");
  app.add_option("--checkpoint", checkpoint, "Checkpoint file (evaluate, gating-report)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--label-column", cfg.pipeline.csv.label_column, "Name of the label column")->capture_default_str();
  app.add_option("--imputation", imputation, "Missing-value protocol")
      ->check(CLI::IsMember({"verbatim", "leak-free"}))
      ->capture_default_str();
  app.add_option("--train-fraction", cfg.pipeline.train_fraction, "Per-class share of rows used for training")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_flag("--pad-vocab", cfg.pipeline.pad_vocabularies,
               "Accept categorical vocabularies smaller than the schema widths");
  app.add_option("--seed", cfg.train.seed, "Seed for splitting, initialization, shuffling and routing noise")
      ->capture_default_str();
  app.add_option("--epochs", cfg.train.max_epochs, "Training epochs")->capture_default_str();
  app.add_option("--batch-size", cfg.train.batch_size, "Mini-batch size")->capture_default_str();
  app.add_option("--alpha", cfg.train.alpha, "Weight of the balancing losses")->capture_default_str();
  app.add_option("--experts", cfg.train.n_experts, "Number of experts")->capture_default_str();
  app.add_option("--top-k", cfg.train.top_k, "Experts used per sample")->capture_default_str();
  app.add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  app.add_option("--lr", cfg.train.learning_rate, "Learning rate")->capture_default_str();
  app.add_option("--ablate", ablate, "zero_losses, no_moe, no_cnn or expert_grid(n,k); comma-separated for ablate");
  auto* grid = app.add_option("--expert-grid", cfg.expert_grid,
                              "Expert sweep as n:k pairs, e.g. 64:16,16:4; without a value the default grid")
                   ->expected(0, 1);
  app.add_option("--split", cfg.split, "Rows scored by evaluate and gating-report: test or all")
      ->check(CLI::IsMember({"test", "all"}))
      ->capture_default_str();
  app.add_option("--format", cfg.format, "Report format on stdout")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  const std::pair<const char*, const char*> commands[] = {
      {"preprocess", "Encode a flow CSV into a dataset cache with statistics and a summary"},
      {"train", "Train a model (or an expert-grid sweep) and write checkpoint, history and report"},
      {"evaluate", "Score a checkpoint on a dataset"},
      {"ablate", "Train and score the baseline and ablation variants"},
      {"gating-report", "Per-expert utilization of a checkpoint on a dataset"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.dataset = dataset;
    cfg.checkpoint = checkpoint;
    cfg.out = out_dir;
    cfg.pipeline.imputation = data::parse_imputation_protocol(imputation);
    cfg.pipeline.seed = cfg.train.seed;
    cfg.train.optimizer = train::parse_optimizer(optimizer);
    for (const auto& a : ablate)
      for (auto& part : split_top_level(a)) cfg.ablate.push_back(part);
    if (grid->count() > 0 && cfg.expert_grid.empty()) cfg.expert_grid = "default";
    cfg.train.validate();

    if (cfg.command == "preprocess") return cmd_preprocess(cfg, out);
    if (cfg.command == "train") return cmd_train(cfg, out);
    if (cfg.command == "evaluate") return cmd_evaluate(cfg, out);
    if (cfg.command == "ablate") return cmd_ablate(cfg, out);
    return cmd_gating_report(cfg, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const VersionError& e) {
    err << "incompatible file: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace moeids::cli
