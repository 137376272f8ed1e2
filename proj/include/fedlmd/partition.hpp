// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedlmd/dataset.hpp"

namespace fedlmd {

// One client's slice of the dataset plus its per-label statistics.
struct ClientPartition {
  int client_id{0};
  std::vector<int64_t> indices;
  std::vector<int64_t> label_counts;  // size C, slot i counts label i+1
  std::vector<int> majority_set;      // 1-based labels, ascending
  bool classified{false};

  int num_classes() const { return static_cast<int>(label_counts.size()); }
  int64_t total() const { return static_cast<int64_t>(indices.size()); }
  std::vector<int> minority_set() const;
};

enum class PartitionStrategy { Sharding, Lda };

struct PartitionPlan {
  PartitionStrategy strategy{PartitionStrategy::Lda};
  int clients{100};  // K
  int shards_per_client{2};
  double alpha{0.1};
  uint64_t seed{0};
  bool require_nonempty{false};
  int retries{10};
};

// Sort by label, cut into K*s near-equal contiguous shards (sizes differ by
// at most one), shuffle shards, deal s per client.
std::vector<ClientPartition> partition_sharding(const Dataset& ds, int K, int s, uint64_t seed);

// Per label y: draw p ~ Dirichlet(alpha * 1_K) and assign that label's
// examples to clients by independent categorical draws. Zero-example clients
// are allowed unless require_nonempty is set, in which case the whole
// partition is redrawn up to `retries` times.
std::vector<ClientPartition> partition_lda(const Dataset& ds, int K, double alpha, uint64_t seed,
                                           bool require_nonempty = false, int retries = 10);

std::vector<ClientPartition> make_partitions(const Dataset& ds, const PartitionPlan& plan);

enum class MajorityRule { MeanThreshold, SqrtThreshold };

// mean-threshold: y is majority iff n_{k,y} >= n_k / C.
// sqrt-threshold: y is majority iff n_{k,y} >= sqrt(n_k).
// Both evaluated in exact integer arithmetic.
void classify_majority(ClientPartition& p, MajorityRule rule);

// Which labels the teacher mask covers.
enum class MaskSet { Majority, Present };

// Bitmask over classes (slot i is label i+1): 1 = masked.
std::vector<uint8_t> active_mask(const ClientPartition& p, MaskSet mode);

// JSON object keyed by client id: {indices, label_counts, majority_set}.
std::string partition_export_json(std::span<const ClientPartition> parts);

const char* majority_rule_name(MajorityRule r);
MajorityRule majority_rule_from_name(const std::string& s);
const char* mask_set_name(MaskSet m);
MaskSet mask_set_from_name(const std::string& s);
const char* strategy_name(PartitionStrategy s);
PartitionStrategy strategy_from_name(const std::string& s);

}  // namespace fedlmd
