// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedlmd/errors.hpp"
#include "fedlmd/metrics.hpp"
#include "fedlmd/rng.hpp"

using namespace fedlmd;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() / "fedlmd_metrics_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::vector<RoundRecord> records_from_acc(const std::vector<double>& accs) {
  std::vector<RoundRecord> out;
  for (size_t t = 0; t < accs.size(); ++t) {
    RoundRecord r;
    r.round = static_cast<int>(t);
    r.accuracy = accs[t];
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate: constant predictor on a balanced set") {
  Dataset test = synth_image_dataset(10, 10, 4, Split::Test);  // balanced, 100 examples
  ModelWeights m = init_model(Architecture::MLP, test.feature_shape, 10, 1);
  for_each_param(m, [](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0f); });
  // all-zero logits: the lowest class index wins every argmax
  EvalResult ev = evaluate(m, test);
  CHECK(ev.accuracy == doctest::Approx(0.1));
  CHECK(ev.pred_counts[0] == test.size());
  for (size_t c = 1; c < 10; ++c) CHECK(ev.pred_counts[c] == 0);
}

TEST_CASE("evaluate: handcrafted pass-through model reaches accuracy 1") {
  // two classes, feature = scaled one-hot, model wired to copy the features
  Dataset test;
  test.name = "toy";
  test.split = Split::Test;
  test.num_classes = 2;
  test.feature_shape = {2};
  Rng rng(5, "toy");
  for (int i = 0; i < 40; ++i) {
    const int cls = static_cast<int>(rng.below(2));
    const float mag = 0.5f + static_cast<float>(rng.uniform());
    test.features.push_back(cls == 0 ? mag : 0.0f);
    test.features.push_back(cls == 1 ? mag : 0.0f);
    test.labels.push_back(cls + 1);
  }
  ModelWeights m = init_model(Architecture::MLP, {2}, 2, 1);
  for_each_param(m, [](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0f); });
  // fc1 rows 0,1 copy the two features; fc2 passes them on; fc3 reads them out
  m.layers[0].weight.data[0] = 1.0f;  // row 0 <- x0
  m.layers[0].weight.data[3] = 1.0f;  // row 1 <- x1 (row stride 2)
  m.layers[1].weight.data[0] = 1.0f;  // row 0 <- h0
  m.layers[1].weight.data[201] = 1.0f;  // row 1 <- h1 (row stride 200)
  m.layers[2].weight.data[0] = 1.0f;  // logit 0 <- h0
  m.layers[2].weight.data[201] = 1.0f;  // logit 1 <- h1
  EvalResult ev = evaluate(m, test);
  CHECK(ev.accuracy == 1.0);
}

TEST_CASE("evaluate matches an independent argmax oracle") {
  Dataset test = synth_image_dataset(6, 20, 8, Split::Test);
  ModelWeights m = init_model(Architecture::MLP, test.feature_shape, 6, 21);
  EvalResult ev = evaluate(m, test, 32);

  int64_t correct = 0;
  std::vector<int64_t> counts(6, 0);
  for (int64_t i = 0; i < test.size(); ++i) {
    std::vector<int64_t> one{i};
    Tensor z = forward(m, test.gather(one));
    int arg = 0;
    for (int c = 1; c < 6; ++c)
      if (z.data[static_cast<size_t>(c)] > z.data[static_cast<size_t>(arg)]) arg = c;
    ++counts[static_cast<size_t>(arg)];
    if (arg + 1 == test.labels[static_cast<size_t>(i)]) ++correct;
  }
  CHECK(ev.correct == correct);
  CHECK(ev.pred_counts == counts);

  // worker count cannot change the result
  EvalResult par = evaluate(m, test, 32, 4);
  CHECK(par.correct == ev.correct);
  CHECK(par.pred_counts == ev.pred_counts);
}

TEST_CASE("speedup: identity, halving, failure") {
  auto base = records_from_acc({0.2, 0.5, 0.6, 0.7});
  SpeedupReport self = speedup(base, base);
  CHECK(!self.failed);
  CHECK(self.ratio == doctest::Approx(1.0));

  // method reaches the target at half the rounds
  auto fast = records_from_acc({0.5, 0.7, 0.7, 0.7});
  SpeedupReport two = speedup(base, fast);
  CHECK(two.ratio == doctest::Approx(2.0));

  // never reaching the target reports Failed
  auto never = records_from_acc({0.2, 0.3, 0.4, 0.5});
  SpeedupReport failed = speedup(base, never);
  CHECK(failed.failed);
  CHECK(failed.method_rounds == 0);
}

TEST_CASE("best accuracy tracking is a monotone envelope") {
  auto recs = records_from_acc({0.1, 0.5, 0.3, 0.6, 0.2});
  double best = 0.0;
  for (size_t t = 0; t < recs.size(); ++t) {
    best = std::max(best, recs[t].accuracy);
    std::span<const RoundRecord> prefix(recs.data(), t + 1);
    CHECK(best_accuracy(prefix) == doctest::Approx(best));
  }
  CHECK(best_round(recs) == 3);
}

TEST_CASE("heatmap export round trip") {
  const int C = 5;
  std::vector<RoundRecord> recs;
  Rng rng(3, "heat");
  for (int t = 0; t < 4; ++t) {
    RoundRecord r;
    r.round = t;
    r.loss_kind = "ce";
    for (int c = 0; c < C; ++c) {
      r.pred_counts.push_back(static_cast<int64_t>(rng.below(50)));
      r.sample_counts.push_back(static_cast<int64_t>(rng.below(200)));
    }
    recs.push_back(r);
  }
  const auto ppath = (tmpdir() / "pred.csv").string();
  const auto spath = (tmpdir() / "sample.csv").string();
  write_pred_heatmap_csv(ppath, recs, C);
  write_sample_heatmap_csv(spath, recs, C);
  auto pred = read_heatmap_csv(ppath);
  auto sample = read_heatmap_csv(spath);
  REQUIRE(pred.size() == recs.size());
  for (size_t t = 0; t < recs.size(); ++t) {
    CHECK(pred[t] == recs[t].pred_counts);
    CHECK(sample[t] == recs[t].sample_counts);
  }

  // empty record list gives header-only matrices
  write_pred_heatmap_csv(ppath, {}, C);
  CHECK(read_heatmap_csv(ppath).empty());
}

TEST_CASE("rounds csv format") {
  std::vector<RoundRecord> recs = records_from_acc({0.25, 0.75});
  recs[0].lr = 0.01;
  recs[0].loss_kind = "lmd_tf";
  recs[0].selected = {1, 4, 7};
  recs[1].lr = 0.0099;
  recs[1].loss_kind = "lmd";
  recs[1].selected = {0};
  const auto path = (tmpdir() / "rounds.csv").string();
  write_rounds_csv(path, recs);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "t,acc,lr,loss_kind,selected");
  std::getline(f, line);
  CHECK(line == "0,0.250000,0.01,lmd_tf,1;4;7");
  std::getline(f, line);
  CHECK(line == "1,0.750000,0.0099,lmd,0");
}

TEST_CASE("speedup csv marks unreached targets as Failed") {
  std::vector<MethodSummary> methods(2);
  methods[0].name = "fedavg";
  methods[0].best_acc = 0.7;
  methods[0].speedup.target = 0.7;
  methods[0].speedup.baseline_rounds = 10;
  methods[0].speedup.method_rounds = 10;
  methods[0].speedup.ratio = 1.0;
  methods[1].name = "fednova";
  methods[1].best_acc = 0.1271;
  methods[1].speedup.target = 0.7;
  methods[1].speedup.baseline_rounds = 10;
  methods[1].speedup.failed = true;
  const auto path = (tmpdir() / "speedup.csv").string();
  write_speedup_csv(path, methods);
  std::ifstream f(path);
  std::string header, l1, l2;
  std::getline(f, header);
  std::getline(f, l1);
  std::getline(f, l2);
  CHECK(header == "method,best_acc,target_acc,rounds_to_target,speedup");
  CHECK(l1 == "fedavg,0.700000,0.700000,10,1.00");
  CHECK(l2 == "fednova,0.127100,0.700000,,Failed");
}
