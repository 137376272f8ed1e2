// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/partition.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fedlmd/errors.hpp"
#include "fedlmd/rng.hpp"

namespace fedlmd {

std::vector<int> ClientPartition::minority_set() const {
  if (!classified) throw InternalError("partition not classified yet");
  std::vector<uint8_t> is_major(static_cast<size_t>(num_classes()) + 1, 0);
  for (int lbl : majority_set) is_major[static_cast<size_t>(lbl)] = 1;
  std::vector<int> out;
  for (int lbl = 1; lbl <= num_classes(); ++lbl)
    if (!is_major[static_cast<size_t>(lbl)]) out.push_back(lbl);
  return out;
}

namespace {

std::vector<ClientPartition> empty_partitions(int K, int C) {
  std::vector<ClientPartition> parts(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    parts[static_cast<size_t>(k)].client_id = k;
    parts[static_cast<size_t>(k)].label_counts.assign(static_cast<size_t>(C), 0);
  }
  return parts;
}

void finish(std::vector<ClientPartition>& parts, const Dataset& ds) {
  for (auto& p : parts) {
    std::sort(p.indices.begin(), p.indices.end());
    for (int64_t idx : p.indices)
      ++p.label_counts[static_cast<size_t>(ds.labels[static_cast<size_t>(idx)] - 1)];
  }
}

}  // namespace

std::vector<ClientPartition> partition_sharding(const Dataset& ds, int K, int s, uint64_t seed) {
  if (K < 1 || s < 1) throw ConfigError("sharding needs K >= 1 and s >= 1");
  const int64_t n = ds.size();
  const int64_t n_shards = static_cast<int64_t>(K) * s;
  if (n_shards > n)
    throw PartitionError("infeasible partition: " + std::to_string(n_shards) + " shards for " +
                         std::to_string(n) + " examples");
  // label-sorted order, stable within a label
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return ds.labels[static_cast<size_t>(a)] < ds.labels[static_cast<size_t>(b)];
  });
  // near-equal contiguous shards; the remainder goes to the trailing shards,
  // one extra example each, so sizes differ by at most one
  const int64_t base = n / n_shards;
  const int64_t rem = n % n_shards;
  std::vector<int64_t> shard_start(static_cast<size_t>(n_shards) + 1, 0);
  for (int64_t i = 0; i < n_shards; ++i) {
    const int64_t sz = base + (i >= n_shards - rem ? 1 : 0);
    shard_start[static_cast<size_t>(i) + 1] = shard_start[static_cast<size_t>(i)] + sz;
  }
  std::vector<int64_t> shard_ids(static_cast<size_t>(n_shards));
  std::iota(shard_ids.begin(), shard_ids.end(), 0);
  Rng rng(seed, "sharding", 0, 0);
  rng.shuffle(shard_ids);

  auto parts = empty_partitions(K, ds.num_classes);
  for (int k = 0; k < K; ++k) {
    auto& p = parts[static_cast<size_t>(k)];
    for (int j = 0; j < s; ++j) {
      const int64_t sid = shard_ids[static_cast<size_t>(k) * s + j];
      for (int64_t i = shard_start[static_cast<size_t>(sid)];
           i < shard_start[static_cast<size_t>(sid) + 1]; ++i)
        p.indices.push_back(order[static_cast<size_t>(i)]);
    }
  }
  finish(parts, ds);
  return parts;
}

std::vector<ClientPartition> partition_lda(const Dataset& ds, int K, double alpha, uint64_t seed,
                                           bool require_nonempty, int retries) {
  if (K < 1) throw ConfigError("LDA needs K >= 1");
  if (!(alpha > 0.0)) throw ConfigError("LDA needs alpha > 0");
  const int C = ds.num_classes;
  // indices grouped by label
  std::vector<std::vector<int64_t>> by_label(static_cast<size_t>(C));
  for (int64_t i = 0; i < ds.size(); ++i)
    by_label[static_cast<size_t>(ds.labels[static_cast<size_t>(i)] - 1)].push_back(i);

  for (int attempt = 0;; ++attempt) {
    auto parts = empty_partitions(K, C);
    for (int y = 1; y <= C; ++y) {
      const auto& idxs = by_label[static_cast<size_t>(y - 1)];
      if (idxs.empty()) continue;
      Rng rng(seed, "lda", static_cast<uint64_t>(y), static_cast<uint64_t>(attempt));
      std::vector<double> p = rng.dirichlet(alpha, K);
      std::vector<double> cdf(p.size());
      std::partial_sum(p.begin(), p.end(), cdf.begin());
      cdf.back() = 1.0;
      for (int64_t idx : idxs) {
        const double u = rng.uniform();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const int k = static_cast<int>(std::min<ptrdiff_t>(it - cdf.begin(), K - 1));
        parts[static_cast<size_t>(k)].indices.push_back(idx);
      }
    }
    const bool any_empty =
        std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.indices.empty(); });
    if (!require_nonempty || !any_empty) {
      finish(parts, ds);
      return parts;
    }
    if (attempt >= retries)
      throw PartitionError("LDA produced empty clients after " + std::to_string(retries + 1) +
                           " attempts (alpha=" + std::to_string(alpha) + ", K=" +
                           std::to_string(K) + ")");
  }
}

std::vector<ClientPartition> make_partitions(const Dataset& ds, const PartitionPlan& plan) {
  if (plan.strategy == PartitionStrategy::Sharding)
    return partition_sharding(ds, plan.clients, plan.shards_per_client, plan.seed);
  return partition_lda(ds, plan.clients, plan.alpha, plan.seed, plan.require_nonempty,
                       plan.retries);
}

void classify_majority(ClientPartition& p, MajorityRule rule) {
  const int C = p.num_classes();
  const int64_t n = p.total();
  p.majority_set.clear();
  for (int y = 1; y <= C; ++y) {
    const int64_t cnt = p.label_counts[static_cast<size_t>(y - 1)];
    bool majority;
    if (rule == MajorityRule::MeanThreshold) {
      majority = cnt * C >= n;  // cnt >= n/C, exact
    } else {
      majority = cnt * cnt >= n;  // cnt >= sqrt(n), exact
    }
    if (majority) p.majority_set.push_back(y);
  }
  p.classified = true;
}

std::vector<uint8_t> active_mask(const ClientPartition& p, MaskSet mode) {
  const int C = p.num_classes();
  std::vector<uint8_t> mask(static_cast<size_t>(C), 0);
  if (mode == MaskSet::Majority) {
    if (!p.classified) throw InternalError("majority mask requested before classification");
    for (int lbl : p.majority_set) mask[static_cast<size_t>(lbl - 1)] = 1;
  } else {
    for (int i = 0; i < C; ++i)
      if (p.label_counts[static_cast<size_t>(i)] > 0) mask[static_cast<size_t>(i)] = 1;
  }
  return mask;
}

std::string partition_export_json(std::span<const ClientPartition> parts) {
  nlohmann::ordered_json root;
  for (const auto& p : parts) {
    nlohmann::ordered_json entry;
    entry["indices"] = p.indices;
    nlohmann::ordered_json counts;
    for (int y = 1; y <= p.num_classes(); ++y)
      counts[std::to_string(y)] = p.label_counts[static_cast<size_t>(y - 1)];
    entry["label_counts"] = counts;
    entry["majority_set"] = p.classified ? p.majority_set : std::vector<int>{};
    root[std::to_string(p.client_id)] = entry;
  }
  return root.dump(2) + "\n";
}

const char* majority_rule_name(MajorityRule r) {
  return r == MajorityRule::MeanThreshold ? "mean" : "sqrt";
}

MajorityRule majority_rule_from_name(const std::string& s) {
  if (s == "mean") return MajorityRule::MeanThreshold;
  if (s == "sqrt") return MajorityRule::SqrtThreshold;
  throw ConfigError("unknown majority rule: " + s);
}

const char* mask_set_name(MaskSet m) { return m == MaskSet::Majority ? "majority" : "present"; }

MaskSet mask_set_from_name(const std::string& s) {
  if (s == "majority") return MaskSet::Majority;
  if (s == "present") return MaskSet::Present;
  throw ConfigError("unknown mask set: " + s);
}

const char* strategy_name(PartitionStrategy s) {
  return s == PartitionStrategy::Sharding ? "sharding" : "lda";
}

PartitionStrategy strategy_from_name(const std::string& s) {
  if (s == "sharding") return PartitionStrategy::Sharding;
  if (s == "lda") return PartitionStrategy::Lda;
  throw ConfigError("unknown partition strategy: " + s);
}

}  // namespace fedlmd
