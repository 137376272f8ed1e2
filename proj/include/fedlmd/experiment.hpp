// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedlmd/config.hpp"
#include "fedlmd/engine.hpp"
#include "fedlmd/metrics.hpp"

namespace fedlmd {

// Loads the dataset named by the config (honoring FEDLMD_DATA_DIR for
// relative idx/csv paths), partitions it, and classifies majority sets.
RunInputs build_inputs(const RunConfig& resolved);

struct ExperimentResult {
  RunConfig resolved;
  std::vector<RoundRecord> records;
  std::string run_dir;  // empty when outputs were not written
  double best_acc{0.0};
  int best_round{0};
  double wall_seconds{0.0};
};

// Executes one run. When write_outputs is set, creates
// <output_dir>/<config hash>/ with rounds.csv, pred_heatmap.csv,
// sample_heatmap.csv, partition.json, config_resolved.cfg, summary.json.
ExperimentResult run_experiment(const RunConfig& cfg, bool write_outputs = true);

struct MethodSpec {
  std::string name;
  std::map<std::string, std::string> overrides;
};

struct ComparisonResult {
  std::vector<MethodSummary> summaries;         // one per method (best sweep variant)
  std::vector<ExperimentResult> runs;           // every run, including sweep variants
  std::string speedup_csv_path;
};

// Runs every method (crossed with the sweep grid) on bitwise-identical
// partitions and reports rounds-to-target against the named baseline. Sweeps
// are maps key -> value list; each method's best variant (by best accuracy)
// enters the speedup table.
ComparisonResult run_comparison(const RunConfig& base, const std::vector<MethodSpec>& methods,
                                const std::string& baseline,
                                const std::map<std::string, std::vector<std::string>>& sweeps = {},
                                bool write_outputs = true);

}  // namespace fedlmd
