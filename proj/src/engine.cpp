// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

#include "fedlmd/errors.hpp"
#include "fedlmd/rng.hpp"

namespace fedlmd {

const char* weighting_name(AggregationWeighting w) {
  return w == AggregationWeighting::Simple ? "simple" : "by_samples";
}

AggregationWeighting weighting_from_name(const std::string& s) {
  if (s == "simple") return AggregationWeighting::Simple;
  if (s == "by_samples") return AggregationWeighting::BySamples;
  throw ConfigError("unknown aggregation weighting: " + s);
}

LossKind effective_loss_kind(LossKind configured, int t, int switch_round) {
  if (configured == LossKind::LMD || configured == LossKind::LMD_TF)
    return t < switch_round ? LossKind::LMD_TF : LossKind::LMD;
  return configured;
}

std::vector<int> select_clients(uint64_t master_seed, int t, std::span<const int> eligible,
                                int m) {
  if (m < 0) throw ConfigError("clients per round must be non-negative");
  std::vector<int> pool(eligible.begin(), eligible.end());
  if (m >= static_cast<int>(pool.size())) {
    std::sort(pool.begin(), pool.end());
    return pool;
  }
  Rng rng(master_seed, "select", 0, static_cast<uint64_t>(t));
  // partial Fisher-Yates: first m slots are the sample
  for (int i = 0; i < m; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(pool.size() - static_cast<size_t>(i)));
    std::swap(pool[static_cast<size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

// pad-4 random crop plus horizontal flip, in place. Image batches only.
void augment_batch(Tensor& batch, const std::vector<int64_t>& feature_shape, Rng& rng) {
  if (feature_shape.size() != 3) return;
  const int64_t H = feature_shape[0], W = feature_shape[1], C = feature_shape[2];
  const int64_t B = batch.dim(0);
  const int pad = 4;
  std::vector<float> src(static_cast<size_t>(H * W * C));
  for (int64_t b = 0; b < B; ++b) {
    float* img = batch.ptr() + b * H * W * C;
    std::copy(img, img + H * W * C, src.begin());
    const int dy = static_cast<int>(rng.below(2 * pad + 1)) - pad;
    const int dx = static_cast<int>(rng.below(2 * pad + 1)) - pad;
    const bool flip = rng.below(2) == 1;
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        const int64_t sx0 = flip ? W - 1 - x : x;
        const int64_t sy = y + dy, sx = sx0 + dx;
        for (int64_t c = 0; c < C; ++c) {
          float v = 0.0f;
          if (sy >= 0 && sy < H && sx >= 0 && sx < W)
            v = src[static_cast<size_t>((sy * W + sx) * C + c)];
          img[(y * W + x) * C + c] = v;
        }
      }
    }
  }
}

template <typename F>
void parallel_tasks(int workers, int n, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  const int nw = std::min(workers, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(nw));
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= n) return;
          f(i);
        }
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

TrainResult local_train(const ModelWeights& w_g, const ClientPartition& part,
                        const Dataset& train, LossKind effective, const LossSpec& spec,
                        const Schedule& sched, MaskSet mask_mode, bool augment, double lr,
                        uint64_t master_seed, int t) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult res;
  res.client_id = part.client_id;
  res.samples = part.total();
  res.teacher_hash = weights_hash(w_g);
  if (part.total() == 0) throw InternalError("local_train on an empty partition");

  ModelWeights w = w_g;
  OptimizerState opt =
      OptimizerState::for_model(w, lr, sched.momentum, sched.weight_decay);
  Rng shuffle_rng(master_seed, "shuffle", static_cast<uint64_t>(part.client_id),
                  static_cast<uint64_t>(t));
  Rng aug_rng(master_seed, "augment", static_cast<uint64_t>(part.client_id),
              static_cast<uint64_t>(t));
  const bool teacher_needed = needs_teacher_model(effective);
  const int B = std::max(1, sched.batch_size);

  std::vector<int64_t> order = part.indices;
  std::vector<int> targets;
  for (int e = 0; e < sched.local_epochs; ++e) {
    shuffle_rng.shuffle(order);
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(B)) {
      const size_t end = std::min(order.size(), at + static_cast<size_t>(B));
      std::span<const int64_t> idx(order.data() + at, end - at);
      Tensor X = train.gather(idx);
      if (augment) augment_batch(X, train.feature_shape, aug_rng);
      targets.resize(idx.size());
      for (size_t i = 0; i < idx.size(); ++i)
        targets[i] = train.labels[static_cast<size_t>(idx[i])];

      ForwardCachePtr cache;
      Tensor logits = forward(w, X, &cache);
      Tensor teacher_logits;
      if (teacher_needed) teacher_logits = forward(w_g, X);
      BatchLoss bl = client_loss(effective, logits, teacher_needed ? &teacher_logits : nullptr,
                                 targets, part, spec, mask_mode);
      if (!std::isfinite(bl.value)) throw NumericError("training loss diverged");
      res.degenerate = res.degenerate || bl.degenerate;

      ModelWeights grads = backward(w, X, bl.dlogits, cache);
      if (spec.mu_prox > 0.0) {
        ProxTerm prox = prox_term(w, w_g, spec.mu_prox);
        for (size_t li = 0; li < grads.layers.size(); ++li) {
          auto add = [](Tensor& dst, const Tensor& src) {
            for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
          };
          add(grads.layers[li].weight, prox.grads.layers[li].weight);
          add(grads.layers[li].bias, prox.grads.layers[li].bias);
        }
      }
      sgd_step(w, grads, opt);
    }
  }
  res.weights = std::move(w);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

ModelWeights aggregate(std::span<const ModelWeights> uploads, AggregationWeighting weighting,
                       std::span<const int64_t> samples) {
  if (uploads.empty()) throw ShapeError("aggregate needs at least one upload");
  for (size_t i = 1; i < uploads.size(); ++i) check_combinable(uploads[0], uploads[i]);
  std::vector<double> w(uploads.size(), 1.0);
  if (weighting == AggregationWeighting::BySamples) {
    if (samples.size() != uploads.size())
      throw ShapeError("by-samples aggregation needs one sample count per upload");
    double total = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
      if (samples[i] <= 0) throw ConfigError("by-samples aggregation needs positive counts");
      w[i] = static_cast<double>(samples[i]);
      total += w[i];
    }
    for (auto& x : w) x /= total;
  } else {
    for (auto& x : w) x /= static_cast<double>(uploads.size());
  }
  ModelWeights out = zeros_like(uploads[0]);
  for (size_t li = 0; li < out.layers.size(); ++li) {
    auto blend = [&](auto member) {
      Tensor& dst = out.layers[li].*member;
      for (size_t j = 0; j < dst.data.size(); ++j) {
        double acc = 0.0;
        for (size_t u = 0; u < uploads.size(); ++u)
          acc += w[u] * static_cast<double>((uploads[u].layers[li].*member).data[j]);
        dst.data[j] = static_cast<float>(acc);
      }
    };
    blend(&LayerWeights::weight);
    blend(&LayerWeights::bias);
  }
  for_each_param(out, [](Tensor& t) { check_finite(t, "aggregated weights"); });
  return out;
}

void server_momentum_step(ServerState& st, const ModelWeights& aggregated, double m) {
  check_combinable(st.global, aggregated);
  if (m == 0.0) {
    st.global = aggregated;
    return;
  }
  check_combinable(st.global, st.momentum_buffer);
  const float mf = static_cast<float>(m);
  for (size_t li = 0; li < st.global.layers.size(); ++li) {
    auto step = [&](auto member) {
      Tensor& g = st.global.layers[li].*member;
      Tensor& buf = st.momentum_buffer.layers[li].*member;
      const Tensor& agg = aggregated.layers[li].*member;
      for (size_t j = 0; j < g.data.size(); ++j) {
        const float delta = g.data[j] - agg.data[j];
        buf.data[j] = mf * buf.data[j] + delta;
        g.data[j] -= buf.data[j];
      }
    };
    step(&LayerWeights::weight);
    step(&LayerWeights::bias);
  }
}

RunResult run(const RunInputs& in) {
  if (in.train.num_classes != in.test.num_classes)
    throw ConfigError("train/test class counts differ");
  if (in.sched.rounds < 0 || in.sched.local_epochs < 0)
    throw ConfigError("negative round or epoch count");

  std::vector<int> eligible;
  for (size_t i = 0; i < in.partitions.size(); ++i) {
    const auto& p = in.partitions[i];
    if (p.client_id != static_cast<int>(i))
      throw InternalError("partitions must be ordered by client id");
    if (!p.classified) throw InternalError("run() needs classified partitions");
    if (p.total() > 0) {
      eligible.push_back(p.client_id);
    } else {
      std::cerr << "[fedlmd] warning: client " << p.client_id
                << " has no examples and is excluded from selection\n";
    }
  }
  if (eligible.empty()) throw PartitionError("no client has any training examples");

  ServerState st;
  st.global = init_model(in.arch, in.train.feature_shape, in.train.num_classes, in.seed);
  st.momentum_buffer = zeros_like(st.global);

  RunResult out;
  const int m = std::min<int>(in.sched.clients_per_round, static_cast<int>(eligible.size()));
  for (int t = 0; t < in.sched.rounds; ++t) {
    const auto round_start = std::chrono::steady_clock::now();
    st.round = t;
    const double lr = in.sched.lr0 * std::pow(in.sched.lr_decay, t);
    const LossKind kind = effective_loss_kind(in.loss.kind, t, in.sched.switch_round);
    const std::vector<int> sel = select_clients(in.seed, t, eligible, m);
    const uint64_t broadcast_hash = weights_hash(st.global);

    std::vector<TrainResult> results(sel.size());
    parallel_tasks(in.workers, static_cast<int>(sel.size()), [&](int i) {
      const auto& part = in.partitions[static_cast<size_t>(sel[static_cast<size_t>(i)])];
      results[static_cast<size_t>(i)] =
          local_train(st.global, part, in.train, kind, in.loss, in.sched, in.mask_mode,
                      in.augment, lr, in.seed, t);
    });

    double train_seconds = 0.0;
    std::vector<ModelWeights> uploads;
    std::vector<int64_t> samples;
    uploads.reserve(results.size());
    for (auto& r : results) {
      if (r.teacher_hash != broadcast_hash)
        throw InternalError("client distilled from a stale global model");
      if (r.degenerate)
        std::cerr << "[fedlmd] note: client " << r.client_id
                  << " has no minority labels; trained with CE only (round " << t << ")\n";
      train_seconds += r.seconds;
      uploads.push_back(std::move(r.weights));
      samples.push_back(r.samples);
    }
    ModelWeights agg = aggregate(uploads, in.weighting, samples);
    server_momentum_step(st, agg, in.sched.server_momentum);

    EvalResult ev = evaluate(st.global, in.test, in.eval_batch, in.workers);

    RoundRecord rec;
    rec.round = t;
    rec.accuracy = ev.accuracy;
    rec.pred_counts = std::move(ev.pred_counts);
    rec.sample_counts.assign(static_cast<size_t>(in.train.num_classes), 0);
    for (int k : sel) {
      const auto& counts = in.partitions[static_cast<size_t>(k)].label_counts;
      for (size_t c = 0; c < counts.size(); ++c) rec.sample_counts[c] += counts[c];
    }
    rec.loss_kind = loss_name(kind);
    rec.lr = lr;
    rec.selected = sel;
    rec.train_seconds = train_seconds;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - round_start).count();
    rec.broadcast_hash = broadcast_hash;
    rec.global_hash = weights_hash(st.global);
    out.records.push_back(std::move(rec));
  }
  out.final_global = std::move(st.global);
  return out;
}

}  // namespace fedlmd
