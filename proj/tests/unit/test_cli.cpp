#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "moeids/cli/cli.hpp"
#include "moeids/data/cache.hpp"
#include "moeids/data/synthetic.hpp"
#include "moeids/train/metrics.hpp"

namespace fs = std::filesystem;
using moeids::cli::run_cli;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path only_run_dir(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) dirs.push_back(e.path());
  EXPECT_EQ(dirs.size(), 1u);
  return dirs.empty() ? fs::path{} : dirs.front();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("moeids_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    moeids::data::SyntheticFlowOptions options;
    options.rows_per_class.assign(moeids::data::kNumClasses, 30);
    options.seed = 5;
    std::ofstream f(csv());
    moeids::data::write_synthetic_flows(f, moeids::data::FlowSchema::nidd(), options);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path csv() const { return dir_ / "flows.csv"; }
  std::vector<std::string> small_train(const std::string& out) const {
    return {"train", "--dataset", csv().string(), "--out", (dir_ / out).string(), "--epochs", "1",
            "--experts", "8", "--top-k", "2", "--batch-size", "32"};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, PreprocessWritesCacheOfWidth78AndReusesIt) {
  auto r = cli({"preprocess", "--dataset", csv().string(), "--out", (dir_ / "prep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cache = dir_ / "prep" / "dataset.cache";
  const auto d = moeids::data::read_dataset_cache(cache);
  EXPECT_EQ(d.train.size() + d.test.size(), 270u);
  EXPECT_EQ(d.train.front().values.size(), 78u);
  for (const char* name : {"pipeline_stats.json", "summary.json", "effective_config.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "prep" / name)) << name;
  }
  const auto before = fs::last_write_time(cache);
  r = cli({"preprocess", "--dataset", csv().string(), "--out", (dir_ / "prep").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("cache reused"), std::string::npos);
  EXPECT_EQ(fs::last_write_time(cache), before);

  // Different options invalidate the cache.
  r = cli({"preprocess", "--dataset", csv().string(), "--out", (dir_ / "prep").string(), "--seed", "3"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("cache reused"), std::string::npos);
}

TEST_F(Cli, MissingSchemaColumnExitsWithSchemaCode) {
  std::string text = slurp(csv());
  const auto pos = text.find(",Proto,");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, ",Protocol,");
  std::ofstream(dir_ / "bad.csv") << text;
  const auto r = cli({"preprocess", "--dataset", (dir_ / "bad.csv").string(), "--out", (dir_ / "p").string()});
  EXPECT_EQ(r.code, moeids::cli::kExitSchema);
  EXPECT_NE(r.err.find("Proto"), std::string::npos);
}

TEST_F(Cli, UnknownFlagAndBadValuesExitWithConfigCode) {
  EXPECT_EQ(cli({"train", "--bogus"}).code, moeids::cli::kExitConfig);
  EXPECT_EQ(cli({"train", "--imputation", "median"}).code, moeids::cli::kExitConfig);
  EXPECT_EQ(cli({"train", "--dataset", csv().string(), "--experts", "4", "--top-k", "8"}).code,
            moeids::cli::kExitConfig);
  EXPECT_EQ(cli({"train"}).code, moeids::cli::kExitConfig);
  EXPECT_EQ(cli({}).code, moeids::cli::kExitConfig);
  EXPECT_EQ(cli({"evaluate", "--dataset", csv().string()}).code, moeids::cli::kExitConfig);
}

TEST_F(Cli, MissingDatasetIsRuntimeError) {
  const auto r = cli({"train", "--dataset", (dir_ / "nope.csv").string(), "--out", dir_.string()});
  EXPECT_EQ(r.code, moeids::cli::kExitRuntime);
}

TEST_F(Cli, TrainRecordsDefaultHyperparameters) {
  // Defaults everywhere except the epoch count.
  const std::vector<std::string> args = {"train", "--dataset", csv().string(), "--out", (dir_ / "runs").string(), "--epochs", "1"};
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto run = only_run_dir(dir_ / "runs");
  const auto cfg = read_json(run / "effective_config.json");
  EXPECT_EQ(cfg["train"]["n_experts"], 128);
  EXPECT_EQ(cfg["train"]["top_k"], 32);
  EXPECT_DOUBLE_EQ(cfg["train"]["alpha"].get<double>(), 0.1);
  EXPECT_EQ(cfg["train"]["batch_size"], 1024);
  EXPECT_EQ(cfg["train"]["optimizer"], "adam");
  EXPECT_DOUBLE_EQ(cfg["train"]["learning_rate"].get<double>(), 1e-3);
  EXPECT_EQ(cfg["pipeline"]["imputation"], "leak-free");
  for (const char* name : {"checkpoint.bin", "history.json", "report.json"}) {
    EXPECT_TRUE(fs::exists(run / name)) << name;
  }
  const auto parsed = cli({"train", "--dataset", csv().string(), "--out", (dir_ / "x").string(), "--epochs", "1",
                           "--experts", "4", "--top-k", "4"});
  EXPECT_EQ(parsed.code, 0) << parsed.err;
}

TEST_F(Cli, SameSeedGivesIdenticalArtifacts) {
  auto a = small_train("a");
  auto b = small_train("b");
  a.insert(a.end(), {"--seed", "7"});
  b.insert(b.end(), {"--seed", "7"});
  ASSERT_EQ(cli(a).code, 0);
  ASSERT_EQ(cli(b).code, 0);
  const auto ra = only_run_dir(dir_ / "a"), rb = only_run_dir(dir_ / "b");
  EXPECT_EQ(slurp(ra / "checkpoint.bin"), slurp(rb / "checkpoint.bin"));
  EXPECT_EQ(slurp(ra / "history.json"), slurp(rb / "history.json"));
  EXPECT_EQ(slurp(ra / "report.json"), slurp(rb / "report.json"));

  auto c = small_train("c");
  c.insert(c.end(), {"--seed", "8"});
  ASSERT_EQ(cli(c).code, 0);
  EXPECT_NE(slurp(ra / "checkpoint.bin"), slurp(only_run_dir(dir_ / "c") / "checkpoint.bin"));
}

TEST_F(Cli, AblateNoMoeHasZeroBalancingLosses) {
  auto args = small_train("runs");
  args.insert(args.end(), {"--ablate", "no_moe"});
  ASSERT_EQ(cli(args).code, 0);
  const auto history = read_json(only_run_dir(dir_ / "runs") / "history.json");
  for (const auto& e : history["epochs"]) {
    EXPECT_EQ(e["importance"].get<double>(), 0.0);
    EXPECT_EQ(e["load"].get<double>(), 0.0);
  }
}

TEST_F(Cli, EvaluateReportsClassesAndRoundTripsJson) {
  ASSERT_EQ(cli(small_train("runs")).code, 0);
  const auto ckpt = only_run_dir(dir_ / "runs") / "checkpoint.bin";

  auto r = cli({"evaluate", "--checkpoint", ckpt.string(), "--dataset", csv().string(), "--out",
                (dir_ / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto names = moeids::train::default_class_names();
  std::size_t last = 0;
  for (const auto& name : names) {
    const auto pos = r.out.find(name);
    ASSERT_NE(pos, std::string::npos) << name;
    EXPECT_GE(pos, last);
    last = pos;
  }
  EXPECT_EQ(names.front(), "Benign");

  r = cli({"evaluate", "--checkpoint", ckpt.string(), "--dataset", csv().string(), "--out", (dir_ / "eval2").string(),
           "--format", "json"});
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto report = moeids::train::EvalReport::from_json(j);
  EXPECT_EQ(report.to_json(), j);
  EXPECT_EQ(report.samples, 108u);  // 40% of 30 rows in each of 9 classes

  // The evaluation of the training run's own test split matches the stored report.
  const auto stored = read_json(only_run_dir(dir_ / "runs") / "report.json");
  EXPECT_EQ(stored, j);

  r = cli({"evaluate", "--checkpoint", ckpt.string(), "--dataset", csv().string(), "--out", (dir_ / "eval3").string(),
           "--split", "all", "--format", "json"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["samples"], 270);
}

TEST_F(Cli, EvaluateRejectsCorruptCheckpoint) {
  ASSERT_EQ(cli(small_train("runs")).code, 0);
  const auto ckpt = only_run_dir(dir_ / "runs") / "checkpoint.bin";
  std::string bytes = slurp(ckpt);
  bytes[bytes.size() / 2] ^= 0x5a;
  std::ofstream(dir_ / "bad.bin", std::ios::binary) << bytes;
  const auto r = cli({"evaluate", "--checkpoint", (dir_ / "bad.bin").string(), "--dataset", csv().string(), "--out",
                      (dir_ / "e").string()});
  EXPECT_EQ(r.code, moeids::cli::kExitRuntime);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, TrainFromCacheMatchesTrainFromCsv) {
  ASSERT_EQ(cli({"preprocess", "--dataset", csv().string(), "--out", (dir_ / "prep").string()}).code, 0);
  auto from_cache = small_train("cached");
  from_cache[2] = (dir_ / "prep" / "dataset.cache").string();
  ASSERT_EQ(cli(from_cache).code, 0);
  ASSERT_EQ(cli(small_train("plain")).code, 0);
  EXPECT_EQ(slurp(only_run_dir(dir_ / "cached") / "checkpoint.bin"),
            slurp(only_run_dir(dir_ / "plain") / "checkpoint.bin"));
}

TEST_F(Cli, GatingReportWritesPerExpertUsage) {
  ASSERT_EQ(cli(small_train("runs")).code, 0);
  const auto ckpt = only_run_dir(dir_ / "runs") / "checkpoint.bin";
  const auto r = cli({"gating-report", "--checkpoint", ckpt.string(), "--dataset", csv().string(), "--out",
                      (dir_ / "g").string(), "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["experts"].size(), 8u);
  std::size_t selected = 0;
  for (const auto& e : j["experts"]) selected += e["selections"].get<std::size_t>();
  EXPECT_EQ(selected, 2u * 108u);
  EXPECT_TRUE(fs::exists(only_run_dir(dir_ / "g") / "gating.json"));

  auto no_moe = small_train("plain");
  no_moe.insert(no_moe.end(), {"--ablate", "no_moe"});
  ASSERT_EQ(cli(no_moe).code, 0);
  const auto plain = only_run_dir(dir_ / "plain") / "checkpoint.bin";
  EXPECT_EQ(cli({"gating-report", "--checkpoint", plain.string(), "--dataset", csv().string(), "--out",
                 (dir_ / "g2").string()})
                .code,
            moeids::cli::kExitConfig);
}

TEST_F(Cli, AblateWritesOneResultPerVariant) {
  auto args = small_train("abl");
  args[0] = "ablate";
  args.insert(args.end(), {"--expert-grid", "4:1"});
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto results = read_json(only_run_dir(dir_ / "abl") / "ablation.json");
  ASSERT_EQ(results.size(), 2u);  // baseline plus the one grid pair
  EXPECT_EQ(results[0]["variant"], "baseline");
  EXPECT_EQ(results[1]["variant"], "expert_grid(4,1)");
  EXPECT_EQ(results[1]["changed"]["n_experts"], nlohmann::json::array({8, 4}));

  args = small_train("abl2");
  args[0] = "ablate";
  ASSERT_EQ(cli(args).code, 0);
  const auto defaults = read_json(only_run_dir(dir_ / "abl2") / "ablation.json");
  ASSERT_EQ(defaults.size(), 4u);
  EXPECT_EQ(defaults[3]["variant"], "no_cnn");
  EXPECT_EQ(defaults[3]["parameter_count"], 711);
}

TEST_F(Cli, ExpertGridTrainsEachPair) {
  auto args = small_train("grid");
  args.insert(args.end(), {"--expert-grid", "(8,2),(4,1)"});
  ASSERT_EQ(cli(args).code, 0);
  const auto run = only_run_dir(dir_ / "grid");
  EXPECT_TRUE(fs::exists(run / "grid-n8-k2" / "report.json"));
  EXPECT_TRUE(fs::exists(run / "grid-n4-k1" / "report.json"));
  EXPECT_EQ(read_json(run / "grid_summary.json").size(), 2u);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  std::ofstream(dir_ / "run.toml") << "epochs = 1\nexperts = 8\ntop-k = 2\nbatch-size = 16\nseed = 9\n";
  const auto r = cli({"train", "--config", (dir_ / "run.toml").string(), "--dataset", csv().string(), "--out",
                      (dir_ / "runs").string(), "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = read_json(only_run_dir(dir_ / "runs") / "effective_config.json");
  EXPECT_EQ(cfg["train"]["seed"], 7);
  EXPECT_EQ(cfg["train"]["n_experts"], 8);
  EXPECT_EQ(cfg["train"]["batch_size"], 16);
}
