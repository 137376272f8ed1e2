// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedlmd/dataset.hpp"
#include "fedlmd/nn.hpp"

namespace fedlmd {

// One communication round's log line.
struct RoundRecord {
  int round{0};  // 0-based; lr at round t is lr0 * decay^t
  double accuracy{0.0};
  std::vector<int64_t> pred_counts;    // argmax histogram over the test set
  std::vector<int64_t> sample_counts;  // summed label counts of selected clients
  std::string loss_kind;               // effective kind used this round
  double lr{0.0};
  std::vector<int> selected;           // client ids, ascending
  double train_seconds{0.0};           // summed client training wall time
  double wall_seconds{0.0};
  uint64_t broadcast_hash{0};          // w_g hash at round start
  uint64_t global_hash{0};             // w_g hash after aggregation
};

struct EvalResult {
  double accuracy{0.0};
  int64_t correct{0};
  std::vector<int64_t> pred_counts;
};

// Top-1 accuracy; argmax ties break toward the lowest class index.
EvalResult evaluate(const ModelWeights& m, const Dataset& test, int batch_size = 512,
                    int workers = 1);

struct SpeedupReport {
  double target{0.0};      // baseline best accuracy
  int baseline_rounds{0};  // rounds needed by the baseline (1-based count)
  int method_rounds{0};    // 0 when the method never reaches the target
  bool failed{false};
  double ratio{0.0};       // baseline_rounds / method_rounds when reached
};

// Rounds needed to reach the baseline's best accuracy.
SpeedupReport speedup(std::span<const RoundRecord> baseline, std::span<const RoundRecord> method);

double best_accuracy(std::span<const RoundRecord> records);
int best_round(std::span<const RoundRecord> records);  // round of the best accuracy

// rounds.csv: t,acc,lr,loss_kind,selected  (selected = ';'-joined ids)
void write_rounds_csv(const std::string& path, std::span<const RoundRecord> records);

// Heatmap matrices, rows = rounds, columns = classes.
// header: t,class_1,...,class_C
void write_pred_heatmap_csv(const std::string& path, std::span<const RoundRecord> records, int C);
void write_sample_heatmap_csv(const std::string& path, std::span<const RoundRecord> records,
                              int C);
// Parses either heatmap back into per-round count rows (round-trip checks).
std::vector<std::vector<int64_t>> read_heatmap_csv(const std::string& path);

struct MethodSummary {
  std::string name;
  double best_acc{0.0};
  int best_round{0};
  SpeedupReport speedup;
};

// speedup.csv: method,best_acc,target_acc,rounds_to_target,speedup
void write_speedup_csv(const std::string& path, std::span<const MethodSummary> methods);

}  // namespace fedlmd
