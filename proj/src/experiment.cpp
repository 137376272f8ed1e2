// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "fedlmd/errors.hpp"

namespace fedlmd {

namespace fs = std::filesystem;

namespace {

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("FEDLMD_DATA_DIR"); root && *root)
    return (fs::path(root) / path).string();
  return path;
}

Dataset load_split(const RunConfig& cfg, Split split) {
  const bool train = split == Split::Train;
  if (cfg.data_kind == "synth") {
    return synth_gaussian_dataset(cfg.synth_classes, cfg.synth_per_class, cfg.synth_dim,
                                  cfg.synth_seed, cfg.synth_spacing, split);
  }
  if (cfg.data_kind == "synth_image") {
    return synth_image_dataset(cfg.image_classes,
                               train ? cfg.image_train_per_class : cfg.image_test_per_class,
                               cfg.image_seed, split, cfg.normalize_mean, cfg.normalize_std,
                               cfg.image_noise, cfg.image_shift);
  }
  if (cfg.data_kind == "csv") {
    return load_csv_dataset(resolve_data_path(train ? cfg.data_path : cfg.data_test_path),
                            cfg.data_classes, split);
  }
  // idx: standard MNIST-style file names under the data directory
  const fs::path dir = resolve_data_path(cfg.data_path);
  const char* img = train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
  const char* lbl = train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
  return load_idx_dataset((dir / img).string(), (dir / lbl).string(), cfg.normalize_mean,
                          cfg.normalize_std, cfg.data_classes, split, "idx");
}

}  // namespace

RunInputs build_inputs(const RunConfig& resolved) {
  RunInputs in;
  in.train = load_split(resolved, Split::Train);
  in.test = load_split(resolved, Split::Test);
  if (resolved.train_per_class > 0) in.train = limit_per_class(in.train, resolved.train_per_class);
  if (resolved.test_per_class > 0) in.test = limit_per_class(in.test, resolved.test_per_class);
  if (in.train.num_classes != in.test.num_classes) {
    const int C = std::max(in.train.num_classes, in.test.num_classes);
    in.train.num_classes = C;
    in.test.num_classes = C;
  }
  PartitionPlan plan;
  plan.strategy = strategy_from_name(resolved.partition_strategy);
  plan.clients = resolved.clients;
  plan.shards_per_client = resolved.shards_per_client;
  plan.alpha = resolved.alpha;
  plan.seed = static_cast<uint64_t>(resolved.partition_seed);
  plan.require_nonempty = resolved.require_nonempty;
  plan.retries = resolved.partition_retries;
  in.partitions = make_partitions(in.train, plan);
  const MajorityRule rule = majority_rule_from_name(resolved.majority_rule);
  for (auto& p : in.partitions) classify_majority(p, rule);

  in.arch = arch_from_name(resolved.arch);
  in.loss.kind = loss_from_name(resolved.loss_kind);
  in.loss.beta = resolved.beta;
  in.loss.tau = resolved.tau;
  in.loss.smoothing = resolved.smoothing;
  in.loss.mu_prox = resolved.mu_prox;
  in.sched.rounds = resolved.rounds;
  in.sched.local_epochs = resolved.local_epochs;
  in.sched.clients_per_round = resolved.clients_per_round;
  in.sched.batch_size = resolved.batch_size;
  in.sched.lr0 = resolved.lr;
  in.sched.lr_decay = resolved.lr_decay;
  in.sched.momentum = resolved.momentum;
  in.sched.weight_decay = resolved.weight_decay;
  in.sched.switch_round = static_cast<int>(resolved.switch_round);
  in.sched.server_momentum = resolved.server_momentum;
  in.weighting = weighting_from_name(resolved.weighting);
  in.mask_mode = mask_set_from_name(resolved.mask_set);
  in.augment = resolved.augment;
  in.seed = resolved.seed;
  in.workers = resolved.workers;
  in.eval_batch = resolved.eval_batch;
  return in;
}

ExperimentResult run_experiment(const RunConfig& cfg, bool write_outputs) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.resolved = resolve_config(cfg);
  RunInputs in = build_inputs(res.resolved);
  RunResult rr = run(in);
  res.records = std::move(rr.records);
  res.best_acc = best_accuracy(res.records);
  res.best_round = best_round(res.records);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (write_outputs) {
    const fs::path dir = fs::path(res.resolved.output_dir) / config_hash(res.resolved);
    fs::create_directories(dir);
    res.run_dir = dir.string();
    write_rounds_csv((dir / "rounds.csv").string(), res.records);
    write_pred_heatmap_csv((dir / "pred_heatmap.csv").string(), res.records,
                           in.train.num_classes);
    write_sample_heatmap_csv((dir / "sample_heatmap.csv").string(), res.records,
                             in.train.num_classes);
    std::ofstream(dir / "partition.json") << partition_export_json(in.partitions);
    std::ofstream(dir / "config_resolved.cfg") << config_snapshot(res.resolved);
    nlohmann::ordered_json summary;
    summary["best_accuracy"] = res.best_acc;
    summary["best_round"] = res.best_round;
    summary["rounds"] = res.records.size();
    summary["wall_seconds"] = res.wall_seconds;
    summary["config_hash"] = config_hash(res.resolved);
    std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
  }
  return res;
}

namespace {

// Partition identity across a comparison: every key that can change the
// dataset, the partition, or the majority sets must agree.
const char* kSharedPrefixes[] = {"data.", "partition.", "majority.rule"};

bool is_shared_key(const std::string& key) {
  for (const char* p : kSharedPrefixes)
    if (key.rfind(p, 0) == 0) return true;
  return key == "run.seed";
}

}  // namespace

ComparisonResult run_comparison(const RunConfig& base, const std::vector<MethodSpec>& methods,
                                const std::string& baseline,
                                const std::map<std::string, std::vector<std::string>>& sweeps,
                                bool write_outputs) {
  if (methods.empty()) throw ConfigError("comparison needs at least one method");
  for (const auto& m : methods)
    for (const auto& [k, v] : m.overrides)
      if (is_shared_key(k))
        throw ConfigError("method '" + m.name + "' overrides shared key '" + k +
                          "'; all methods in a comparison must see identical partitions");
  for (const auto& [k, v] : sweeps)
    if (is_shared_key(k)) throw ConfigError("sweep over shared key '" + k + "' is not allowed");

  // cross product of sweep values
  std::vector<std::map<std::string, std::string>> grid{{}};
  for (const auto& [key, values] : sweeps) {
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& g : grid)
      for (const auto& v : values) {
        auto g2 = g;
        g2[key] = v;
        next.push_back(std::move(g2));
      }
    grid = std::move(next);
  }

  ComparisonResult out;
  std::map<std::string, const ExperimentResult*> best_of;
  std::vector<std::pair<std::string, size_t>> run_index;
  for (const auto& m : methods) {
    for (const auto& g : grid) {
      RunConfig cfg = base;
      apply_overrides(cfg, m.overrides);
      apply_overrides(cfg, g);
      std::string label = m.name;
      if (!g.empty()) {
        label += "@";
        bool first = true;
        for (const auto& [k, v] : g) {
          if (!first) label += ",";
          label += k + "=" + v;
          first = false;
        }
      }
      std::cerr << "[fedlmd] running " << label << "\n";
      out.runs.push_back(run_experiment(cfg, write_outputs));
      run_index.emplace_back(m.name, out.runs.size() - 1);
    }
  }
  // shared-partition guarantee: identical partition exports across runs
  if (write_outputs && out.runs.size() > 1) {
    auto read = [](const std::string& dir) {
      std::ifstream f(fs::path(dir) / "partition.json");
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    };
    const std::string first = read(out.runs[0].run_dir);
    for (size_t i = 1; i < out.runs.size(); ++i)
      if (read(out.runs[i].run_dir) != first)
        throw InternalError("comparison produced diverging partitions");
  }

  for (const auto& [name, idx] : run_index) {
    const ExperimentResult& r = out.runs[idx];
    auto it = best_of.find(name);
    if (it == best_of.end() || r.best_acc > it->second->best_acc) best_of[name] = &r;
  }
  const auto base_it = best_of.find(baseline);
  if (base_it == best_of.end())
    throw ConfigError("baseline method '" + baseline + "' is not part of the comparison");
  const auto& base_records = base_it->second->records;

  for (const auto& m : methods) {
    const ExperimentResult& r = *best_of.at(m.name);
    MethodSummary s;
    s.name = m.name;
    s.best_acc = r.best_acc;
    s.best_round = r.best_round;
    s.speedup = speedup(base_records, r.records);
    out.summaries.push_back(std::move(s));
  }

  if (write_outputs) {
    const fs::path dir = base.output_dir;
    fs::create_directories(dir);
    out.speedup_csv_path = (dir / "speedup.csv").string();
    write_speedup_csv(out.speedup_csv_path, out.summaries);
    nlohmann::ordered_json combined;
    for (size_t i = 0; i < out.summaries.size(); ++i) {
      const auto& s = out.summaries[i];
      nlohmann::ordered_json entry;
      entry["best_accuracy"] = s.best_acc;
      entry["best_round"] = s.best_round;
      entry["target_accuracy"] = s.speedup.target;
      if (s.speedup.failed) {
        entry["speedup"] = "Failed";
      } else {
        entry["speedup"] = s.speedup.ratio;
        entry["rounds_to_target"] = s.speedup.method_rounds;
      }
      combined[s.name] = entry;
    }
    std::ofstream(dir / "comparison_summary.json") << combined.dump(2) << "\n";
  }
  return out;
}

}  // namespace fedlmd
