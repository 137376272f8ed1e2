// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedlmd/errors.hpp"
#include "fedlmd/experiment.hpp"

using namespace fedlmd;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const char* leaf) {
  auto d = fs::temp_directory_path() / "fedlmd_experiment_test" / leaf;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig cfg;
  cfg.data_kind = "synth_image";
  cfg.image_classes = 4;
  cfg.image_train_per_class = 40;
  cfg.image_test_per_class = 10;
  cfg.clients = 4;
  cfg.clients_per_round = 2;
  cfg.rounds = 2;
  cfg.local_epochs = 1;
  cfg.batch_size = 16;
  cfg.alpha = 0.5;
  cfg.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("a one-round smoke run writes every output file") {
  RunConfig cfg = tiny_config(tmpdir("smoke"));
  cfg.rounds = 1;
  ExperimentResult res = run_experiment(cfg, true);
  CHECK(res.records.size() == 1);
  for (const char* name : {"rounds.csv", "pred_heatmap.csv", "sample_heatmap.csv",
                           "partition.json", "config_resolved.cfg", "summary.json"})
    CHECK(fs::exists(fs::path(res.run_dir) / name));
}

TEST_CASE("rerunning the same config reproduces rounds.csv byte for byte") {
  RunConfig cfg = tiny_config(tmpdir("rerun_a"));
  ExperimentResult a = run_experiment(cfg, true);
  cfg.output_dir = tmpdir("rerun_b").string();
  ExperimentResult b = run_experiment(cfg, true);
  const std::string ra = slurp(fs::path(a.run_dir) / "rounds.csv");
  CHECK(!ra.empty());
  CHECK(ra == slurp(fs::path(b.run_dir) / "rounds.csv"));
}

TEST_CASE("missing dataset path fails with a config error") {
  RunConfig cfg = tiny_config(tmpdir("missing"));
  cfg.data_kind = "idx";
  cfg.data_path = "";  // required for idx
  CHECK_THROWS_AS(run_experiment(cfg, false), ConfigError);
  cfg.data_path = "/nonexistent/dir";
  CHECK_THROWS_AS(run_experiment(cfg, false), DataError);
}

TEST_CASE("comparing a config against itself gives speedup 1.00") {
  RunConfig cfg = tiny_config(tmpdir("selfcmp"));
  std::vector<MethodSpec> methods{{"a", {}}, {"b", {}}};
  ComparisonResult res = run_comparison(cfg, methods, "a", {}, true);
  REQUIRE(res.summaries.size() == 2);
  for (const auto& s : res.summaries) {
    CHECK(!s.speedup.failed);
    CHECK(s.speedup.ratio == doctest::Approx(1.0));
  }
  CHECK(fs::exists(res.speedup_csv_path));
}

TEST_CASE("methods in a comparison share bitwise-identical partitions") {
  RunConfig cfg = tiny_config(tmpdir("shared"));
  std::vector<MethodSpec> methods{
      {"fedavg", {{"loss.kind", "ce"}}},
      {"fedlmd", {{"loss.kind", "lmd"}, {"loss.beta", "1.0"}}},
  };
  ComparisonResult res = run_comparison(cfg, methods, "fedavg", {}, true);
  REQUIRE(res.runs.size() == 2);
  const std::string pa = slurp(fs::path(res.runs[0].run_dir) / "partition.json");
  CHECK(!pa.empty());
  CHECK(pa == slurp(fs::path(res.runs[1].run_dir) / "partition.json"));
}

TEST_CASE("a beta sweep emits one run per value and one speedup table") {
  RunConfig cfg = tiny_config(tmpdir("sweep"));
  std::vector<MethodSpec> methods{{"fedlmd", {{"loss.kind", "lmd"}}}};
  std::map<std::string, std::vector<std::string>> sweeps{
      {"loss.beta", {"0.1", "0.3", "1.0"}}};
  ComparisonResult res = run_comparison(cfg, methods, "fedlmd", sweeps, true);
  CHECK(res.runs.size() == 3);
  CHECK(res.summaries.size() == 1);
  CHECK(fs::exists(res.speedup_csv_path));
}

TEST_CASE("overriding a partition-shaping key in a comparison is rejected") {
  RunConfig cfg = tiny_config(tmpdir("reject"));
  std::vector<MethodSpec> methods{{"a", {{"partition.alpha", "0.9"}}}};
  CHECK_THROWS_AS(run_comparison(cfg, methods, "a", {}, false), ConfigError);
}

TEST_CASE("relative idx paths resolve through FEDLMD_DATA_DIR") {
  const fs::path root = tmpdir("dataroot");
  fs::create_directories(root / "toy");
  IdxImages imgs;
  std::vector<uint8_t> labels;
  synth_image_raw(3, 12, 5, Split::Train, 0.2, 2, imgs, labels);
  write_idx_images((root / "toy" / "train-images-idx3-ubyte").string(), imgs);
  write_idx_labels((root / "toy" / "train-labels-idx1-ubyte").string(), labels);
  synth_image_raw(3, 4, 5, Split::Test, 0.2, 2, imgs, labels);
  write_idx_images((root / "toy" / "t10k-images-idx3-ubyte").string(), imgs);
  write_idx_labels((root / "toy" / "t10k-labels-idx1-ubyte").string(), labels);

  setenv("FEDLMD_DATA_DIR", root.string().c_str(), 1);
  RunConfig cfg = tiny_config(tmpdir("idxrun"));
  cfg.data_kind = "idx";
  cfg.data_path = "toy";
  cfg.clients = 2;
  cfg.clients_per_round = 1;
  ExperimentResult res = run_experiment(cfg, false);
  CHECK(res.records.size() == 2);
  unsetenv("FEDLMD_DATA_DIR");
}

TEST_CASE("gaussian synth data flows through the experiment layer") {
  RunConfig cfg = tiny_config(tmpdir("synth"));
  cfg.data_kind = "synth";
  cfg.synth_classes = 3;
  cfg.synth_per_class = 30;
  cfg.synth_dim = 8;
  ExperimentResult res = run_experiment(cfg, false);
  CHECK(res.records.size() == 2);
}
