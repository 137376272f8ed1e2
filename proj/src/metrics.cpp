// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "fedlmd/errors.hpp"

namespace fedlmd {

namespace {

// Evaluates examples [lo, hi) in forward batches.
void eval_range(const ModelWeights& m, const Dataset& test, int batch_size, int64_t lo,
                int64_t hi, int64_t& correct, std::vector<int64_t>& pred_counts) {
  const int C = m.num_classes;
  std::vector<int64_t> idx;
  for (int64_t start = lo; start < hi; start += batch_size) {
    const int64_t end = std::min<int64_t>(start + batch_size, hi);
    idx.resize(static_cast<size_t>(end - start));
    for (int64_t i = start; i < end; ++i) idx[static_cast<size_t>(i - start)] = i;
    Tensor logits = forward(m, test.gather(idx));
    for (int64_t b = 0; b < end - start; ++b) {
      const float* z = logits.ptr() + b * C;
      int arg = 0;
      for (int c = 1; c < C; ++c)
        if (z[c] > z[arg]) arg = c;  // ties keep the lowest index
      ++pred_counts[static_cast<size_t>(arg)];
      if (arg + 1 == test.labels[static_cast<size_t>(start + b)]) ++correct;
    }
  }
}

}  // namespace

EvalResult evaluate(const ModelWeights& m, const Dataset& test, int batch_size, int workers) {
  if (test.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  if (test.num_classes != m.num_classes)
    throw ShapeError("test set class count does not match the model");
  if (batch_size < 1) batch_size = 1;
  const int64_t n = test.size();
  EvalResult out;
  out.pred_counts.assign(static_cast<size_t>(m.num_classes), 0);

  const int nw = std::max(1, std::min<int>(workers, static_cast<int>((n + batch_size - 1) / batch_size)));
  if (nw <= 1) {
    eval_range(m, test, batch_size, 0, n, out.correct, out.pred_counts);
  } else {
    // fixed chunking at batch granularity; integer merges keep the result
    // independent of the worker count
    std::vector<int64_t> corrects(static_cast<size_t>(nw), 0);
    std::vector<std::vector<int64_t>> counts(
        static_cast<size_t>(nw), std::vector<int64_t>(static_cast<size_t>(m.num_classes), 0));
    const int64_t batches = (n + batch_size - 1) / batch_size;
    const int64_t per = (batches + nw - 1) / nw;
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) {
      const int64_t lo = std::min<int64_t>(w * per * batch_size, n);
      const int64_t hi = std::min<int64_t>((w + 1) * per * batch_size, n);
      pool.emplace_back([&, w, lo, hi] {
        eval_range(m, test, batch_size, lo, hi, corrects[static_cast<size_t>(w)],
                   counts[static_cast<size_t>(w)]);
      });
    }
    for (auto& t : pool) t.join();
    for (int w = 0; w < nw; ++w) {
      out.correct += corrects[static_cast<size_t>(w)];
      for (size_t c = 0; c < out.pred_counts.size(); ++c)
        out.pred_counts[c] += counts[static_cast<size_t>(w)][c];
    }
  }
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(n);
  return out;
}

double best_accuracy(std::span<const RoundRecord> records) {
  double best = 0.0;
  for (const auto& r : records) best = std::max(best, r.accuracy);
  return best;
}

int best_round(std::span<const RoundRecord> records) {
  int arg = 0;
  double best = -1.0;
  for (const auto& r : records)
    if (r.accuracy > best) {
      best = r.accuracy;
      arg = r.round;
    }
  return arg;
}

SpeedupReport speedup(std::span<const RoundRecord> baseline, std::span<const RoundRecord> method) {
  if (baseline.empty()) throw ConfigError("speedup needs a non-empty baseline record stream");
  SpeedupReport rep;
  rep.target = best_accuracy(baseline);
  auto rounds_to = [&](std::span<const RoundRecord> rs) -> int {
    for (size_t i = 0; i < rs.size(); ++i)
      if (rs[i].accuracy >= rep.target) return static_cast<int>(i) + 1;
    return 0;
  };
  rep.baseline_rounds = rounds_to(baseline);
  rep.method_rounds = rounds_to(method);
  if (rep.method_rounds == 0) {
    rep.failed = true;
  } else {
    rep.ratio = static_cast<double>(rep.baseline_rounds) / static_cast<double>(rep.method_rounds);
  }
  return rep;
}

namespace {

std::string join_ids(std::span<const int> ids) {
  std::string s;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

void write_heatmap(const std::string& path, std::span<const RoundRecord> records, int C,
                   bool predictions) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write file: " + path);
  f << "t";
  for (int c = 1; c <= C; ++c) f << ",class_" << c;
  f << "\n";
  for (const auto& r : records) {
    const auto& counts = predictions ? r.pred_counts : r.sample_counts;
    if (static_cast<int>(counts.size()) != C)
      throw ShapeError("record count vector does not match class count");
    f << r.round;
    for (int c = 0; c < C; ++c) f << "," << counts[static_cast<size_t>(c)];
    f << "\n";
  }
}

}  // namespace

void write_rounds_csv(const std::string& path, std::span<const RoundRecord> records) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write file: " + path);
  f << "t,acc,lr,loss_kind,selected\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy);
    f << r.round << "," << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.10g", r.lr);
    f << buf << "," << r.loss_kind << "," << join_ids(r.selected) << "\n";
  }
}

void write_pred_heatmap_csv(const std::string& path, std::span<const RoundRecord> records,
                            int C) {
  write_heatmap(path, records, C, true);
}

void write_sample_heatmap_csv(const std::string& path, std::span<const RoundRecord> records,
                              int C) {
  write_heatmap(path, records, C, false);
}

std::vector<std::vector<int64_t>> read_heatmap_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty heatmap file: " + path);
  std::vector<std::vector<int64_t>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<int64_t> row;
    std::stringstream ss(line);
    std::string tok;
    bool first = true;
    while (std::getline(ss, tok, ',')) {
      if (first) {
        first = false;  // the round column
        continue;
      }
      row.push_back(std::stoll(tok));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_speedup_csv(const std::string& path, std::span<const MethodSummary> methods) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write file: " + path);
  f << "method,best_acc,target_acc,rounds_to_target,speedup\n";
  char buf[64];
  for (const auto& m : methods) {
    f << m.name << ",";
    std::snprintf(buf, sizeof(buf), "%.6f", m.best_acc);
    f << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.6f", m.speedup.target);
    f << buf << ",";
    if (m.speedup.failed) {
      f << ",Failed\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%.2f", m.speedup.ratio);
      f << m.speedup.method_rounds << "," << buf << "\n";
    }
  }
}

}  // namespace fedlmd
