// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedlmd/dataset.hpp"
#include "fedlmd/losses.hpp"
#include "fedlmd/metrics.hpp"
#include "fedlmd/nn.hpp"
#include "fedlmd/partition.hpp"

namespace fedlmd {

struct Schedule {
  int rounds{200};            // T
  int local_epochs{5};        // E
  int clients_per_round{10};  // |K|
  int batch_size{50};
  double lr0{0.01};
  double lr_decay{0.99};      // lr at round t is lr0 * decay^t
  double momentum{0.9};
  double weight_decay{1e-5};
  int switch_round{0};        // rounds t < switch_round run LMD-Tf, t >= run LMD
  double server_momentum{0.0};
};

enum class AggregationWeighting { Simple, BySamples };
const char* weighting_name(AggregationWeighting w);
AggregationWeighting weighting_from_name(const std::string& s);

// The per-round loss kind. The Tf->full switching schedule applies to the
// LMD family only; other kinds pass through unchanged.
LossKind effective_loss_kind(LossKind configured, int t, int switch_round);

// Uniform sample without replacement from `eligible`, deterministic in
// (seed, t); result ascending. Takes everything when m >= |eligible|.
std::vector<int> select_clients(uint64_t master_seed, int t, std::span<const int> eligible,
                                int m);

struct TrainResult {
  int client_id{0};
  ModelWeights weights;
  int64_t samples{0};
  double seconds{0.0};
  bool degenerate{false};     // trained CE-only because the minority set was empty
  uint64_t teacher_hash{0};   // hash of the w_g this client distilled from
};

// One client's local pass: w_k <- w_g, then E epochs of seeded mini-batch SGD
// with the given effective loss; the teacher is the frozen w_g broadcast.
// Epoch shuffles come from the ("shuffle", k, t) stream.
TrainResult local_train(const ModelWeights& w_g, const ClientPartition& part,
                        const Dataset& train, LossKind effective, const LossSpec& spec,
                        const Schedule& sched, MaskSet mask_mode, bool augment, double lr,
                        uint64_t master_seed, int t);

// Simple: unweighted mean. BySamples: mean weighted by each upload's n_k.
ModelWeights aggregate(std::span<const ModelWeights> uploads, AggregationWeighting weighting,
                       std::span<const int64_t> samples = {});

struct ServerState {
  int round{0};
  ModelWeights global;
  ModelWeights momentum_buffer;
};

// delta = w_g - aggregated; buffer <- m*buffer + delta; w_g <- w_g - buffer.
// m = 0 is a literal replacement by `aggregated`.
void server_momentum_step(ServerState& st, const ModelWeights& aggregated, double m);

struct RunInputs {
  Dataset train;
  Dataset test;
  std::vector<ClientPartition> partitions;  // classified
  Architecture arch{Architecture::MLP};
  LossSpec loss;
  Schedule sched;
  AggregationWeighting weighting{AggregationWeighting::Simple};
  MaskSet mask_mode{MaskSet::Majority};
  bool augment{false};
  uint64_t seed{1};
  int workers{1};
  int eval_batch{512};
};

struct RunResult {
  std::vector<RoundRecord> records;
  ModelWeights final_global;
};

// Algorithm: broadcast, select, (parallel) local training, aggregate,
// optional server momentum, evaluate. Deterministic in the seed and
// independent of the worker count.
RunResult run(const RunInputs& in);

}  // namespace fedlmd
