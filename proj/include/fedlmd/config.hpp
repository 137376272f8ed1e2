// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedlmd/engine.hpp"

namespace fedlmd {

// Complete experiment description. Field defaults follow the reference
// protocol: lr 0.01, decay 0.99, weight decay 1e-5, momentum 0.9, batch 50,
// K=100, 10 clients per round, E=5, T=200.
struct RunConfig {
  // data
  std::string data_kind{"synth_image"};  // idx | csv | synth | synth_image
  std::string data_path;                 // idx directory / csv train file
  std::string data_test_path;            // csv test file
  int data_classes{0};                   // 0 = infer from files
  double normalize_mean{0.0};
  double normalize_std{1.0};
  int64_t train_per_class{0};            // 0 = all
  int64_t test_per_class{0};
  bool augment{false};
  int synth_classes{10};
  int synth_per_class{200};
  int synth_dim{32};
  double synth_spacing{3.0};
  uint64_t synth_seed{7};
  int image_classes{10};
  int image_train_per_class{600};
  int image_test_per_class{200};
  double image_noise{0.25};
  int image_shift{4};
  uint64_t image_seed{2024};

  // partition
  std::string partition_strategy{"lda"};
  int clients{100};  // K
  int shards_per_client{2};
  double alpha{0.1};
  int64_t partition_seed{-1};  // -1: derive from run.seed
  bool require_nonempty{false};
  int partition_retries{10};

  // model
  std::string arch{"mlp"};

  // loss
  std::string loss_kind{"ce"};
  double beta{1.0};
  double tau{1.0};
  double smoothing{0.1};
  double mu_prox{0.0};

  // majority
  std::string majority_rule{"mean"};
  std::string mask_set{"majority"};

  // schedule
  int rounds{200};
  int local_epochs{5};
  int clients_per_round{10};
  int batch_size{50};
  double lr{0.01};
  double lr_decay{0.99};
  double momentum{0.9};
  double weight_decay{1e-5};
  int64_t switch_round{-1};  // -1 auto: lmd -> 0, lmd_tf -> T
  double server_momentum{0.0};

  // aggregate
  std::string weighting{"simple"};

  // run
  uint64_t seed{1};
  std::string output_dir{"runs"};
  int workers{1};
  int eval_batch{512};

  bool operator==(const RunConfig&) const = default;
};

// Flat `section.key = value` grammar; '#' starts a comment. Unknown keys,
// type errors, and constraint violations throw ConfigError listing every
// offending field.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// key=value overrides applied on top of `cfg` (flag syntax `--loss.beta 0.3`).
void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& overrides);

// Collects every violated field; empty means valid.
std::vector<std::string> validate_config(const RunConfig& cfg);
void check_config(const RunConfig& cfg);  // throws ConfigError listing all violations

// Fills auto fields (partition_seed, switch_round) with concrete values.
RunConfig resolve_config(const RunConfig& cfg);

// Flat key-value snapshot; parse_config_text(snapshot(c)) == c for resolved c.
std::string config_snapshot(const RunConfig& cfg);

// Short stable id of the resolved config (hex).
std::string config_hash(const RunConfig& cfg);

// Key names this schema accepts, for CLI help.
std::vector<std::string> config_keys();

}  // namespace fedlmd
