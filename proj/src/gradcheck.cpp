// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "fedlmd/detail/net_core.hpp"
#include "fedlmd/losses.hpp"
#include "fedlmd/rng.hpp"

namespace fedlmd {

namespace {

constexpr double kStep = 1e-4;
constexpr double kRtol = 1e-3;
constexpr double kAtol = 1e-8;

struct Tally {
  GradCheckReport rep;
  void record(double fd, double grad) {
    ++rep.entries;
    const double diff = std::abs(fd - grad);
    const double scale = std::max(std::abs(fd), std::abs(grad));
    const double rel = diff / std::max(scale, kAtol / kRtol);
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    if (diff > kRtol * scale + kAtol) ++rep.failures;
  }
};

// Perturbs one float logit entry and measures the step actually taken so the
// quotient is exact even where 1e-4 is not representable around z.
double fd_logit(const std::function<double(const Tensor&)>& f, Tensor logits, int64_t i) {
  const float orig = logits.data[static_cast<size_t>(i)];
  const float up = static_cast<float>(static_cast<double>(orig) + kStep);
  const float dn = static_cast<float>(static_cast<double>(orig) - kStep);
  logits.data[static_cast<size_t>(i)] = up;
  const double lp = f(logits);
  logits.data[static_cast<size_t>(i)] = dn;
  const double lm = f(logits);
  logits.data[static_cast<size_t>(i)] = orig;
  return (lp - lm) / (static_cast<double>(up) - static_cast<double>(dn));
}

struct LossCase {
  Tensor student;
  Tensor teacher;
  std::vector<int> targets;
  ClientPartition part;
  LossSpec spec;
};

LossCase random_case(Rng& rng, LossKind kind) {
  LossCase c;
  const int C = 3 + static_cast<int>(rng.below(8));   // 3..10
  const int64_t B = 1 + static_cast<int64_t>(rng.below(6));  // 1..6
  auto rand_logits = [&] {
    Tensor t = Tensor::zeros({B, C});
    for (auto& v : t.data) v = static_cast<float>(rng.normal() * 2.0);
    return t;
  };
  c.student = rand_logits();
  c.teacher = rand_logits();
  c.targets.resize(static_cast<size_t>(B));
  for (auto& y : c.targets) y = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(C)));
  c.spec.kind = kind;
  const double taus[] = {0.5, 1.0, 2.0, 4.0};
  const double betas[] = {0.3, 1.0, 3.0};
  c.spec.tau = taus[rng.below(4)];
  c.spec.beta = betas[rng.below(3)];
  c.spec.smoothing = 0.05 + 0.3 * rng.uniform();
  // random label counts -> a non-trivial majority/minority split
  c.part.client_id = 0;
  c.part.label_counts.assign(static_cast<size_t>(C), 0);
  for (int i = 0; i < C; ++i)
    c.part.label_counts[static_cast<size_t>(i)] =
        rng.below(3) == 0 ? 0 : static_cast<int64_t>(rng.below(50));
  classify_majority(c.part, MajorityRule::MeanThreshold);
  if (c.part.majority_set.size() == static_cast<size_t>(C)) {
    // force at least one minority label so the distillation path is exercised
    c.part.label_counts[0] = 0;
    c.part.label_counts[static_cast<size_t>(C - 1)] = 100;
    classify_majority(c.part, MajorityRule::MeanThreshold);
  }
  return c;
}

}  // namespace

std::vector<GradCheckReport> run_loss_gradchecks(int samples, uint64_t seed) {
  const LossKind kinds[] = {LossKind::CE,     LossKind::CE_KD,  LossKind::NTD,
                            LossKind::LMD,    LossKind::LMD_TF, LossKind::NTD_TF,
                            LossKind::CE_LS};
  std::vector<GradCheckReport> out;
  uint64_t case_id = 0;
  for (LossKind kind : kinds) {
    Tally tally;
    tally.rep.name = loss_name(kind);
    for (int s = 0; s < samples; ++s) {
      Rng rng(seed, "gradcheck-loss", static_cast<uint64_t>(kind), case_id++);
      LossCase c = random_case(rng, kind);
      const bool teacher = needs_teacher_model(kind);
      auto eval = [&](const Tensor& z) {
        return client_loss(kind, z, teacher ? &c.teacher : nullptr, c.targets, c.part, c.spec,
                           MaskSet::Majority)
            .value;
      };
      BatchLoss bl = client_loss(kind, c.student, teacher ? &c.teacher : nullptr, c.targets,
                                 c.part, c.spec, MaskSet::Majority);
      for (int64_t i = 0; i < c.student.numel(); ++i)
        tally.record(fd_logit(eval, c.student, i), bl.dlogits.data[static_cast<size_t>(i)]);
      ++tally.rep.instances;
    }
    out.push_back(tally.rep);
  }

  // prox term: finite differences over the local weights
  {
    Tally tally;
    tally.rep.name = "prox";
    for (int s = 0; s < samples; ++s) {
      Rng rng(seed, "gradcheck-prox", 0, static_cast<uint64_t>(s));
      ModelWeights local = init_model(Architecture::MLP, {6}, 4, rng.next_u64());
      ModelWeights global = init_model(Architecture::MLP, {6}, 4, rng.next_u64());
      const double mu = 0.1 + rng.uniform();
      ProxTerm pt = prox_term(local, global, mu);
      // a handful of random parameter entries per sample
      for (int probe = 0; probe < 10; ++probe) {
        const size_t li = rng.below(local.layers.size());
        Tensor& w = rng.below(2) ? local.layers[li].weight : local.layers[li].bias;
        Tensor& g = (&w == &local.layers[li].weight) ? pt.grads.layers[li].weight
                                                     : pt.grads.layers[li].bias;
        const size_t i = rng.below(w.data.size());
        const float orig = w.data[i];
        const float up = static_cast<float>(static_cast<double>(orig) + kStep);
        const float dn = static_cast<float>(static_cast<double>(orig) - kStep);
        w.data[i] = up;
        const double lp = prox_term(local, global, mu).value;
        w.data[i] = dn;
        const double lm = prox_term(local, global, mu).value;
        w.data[i] = orig;
        const double fd = (lp - lm) / (static_cast<double>(up) - static_cast<double>(dn));
        tally.record(fd, g.data[i]);
      }
      ++tally.rep.instances;
    }
    out.push_back(tally.rep);
  }
  return out;
}

namespace {

using detail::Mat;

// Signature of the piecewise-linear region the forward pass landed in (ReLU
// sign pattern plus pool argmax choices). Central differences are only valid
// against the analytic gradient when both evaluations stay in one region.
uint64_t region_signature(const detail::NetCache<double>& c) {
  uint64_t h = 0xCBF29CE484222325ull;
  auto feed_signs = [&h](const Mat<double>& m) {
    for (int64_t i = 0; i < m.size(); ++i) {
      h ^= (m.data()[i] > 0.0) ? 0x9Eu : 0x31u;
      h *= 0x100000001B3ull;
    }
  };
  feed_signs(c.h1);
  feed_signs(c.h2);
  feed_signs(c.a1);
  feed_signs(c.a2);
  feed_signs(c.hfc);
  for (int32_t v : c.arg1) {
    h ^= static_cast<uint64_t>(v);
    h *= 0x100000001B3ull;
  }
  for (int32_t v : c.arg2) {
    h ^= static_cast<uint64_t>(v);
    h *= 0x100000001B3ull;
  }
  return h;
}

// CE + beta * masked KL against a fixed teacher distribution, double precision.
double head_loss(const Mat<double>& logits, const std::vector<int>& targets,
                 const std::vector<std::vector<double>>& q_rows, double tau, double beta,
                 Mat<double>* dlogits) {
  const int64_t B = logits.rows();
  const int C = static_cast<int>(logits.cols());
  if (dlogits) dlogits->setZero(B, C);
  std::vector<double> z(static_cast<size_t>(C)), dz(static_cast<size_t>(C));
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    for (int i = 0; i < C; ++i) z[static_cast<size_t>(i)] = logits(b, i);
    const int y0 = targets[static_cast<size_t>(b)] - 1;
    total += rowloss::ce(z.data(), C, y0, dz.data());
    if (dlogits)
      for (int i = 0; i < C; ++i) (*dlogits)(b, i) += dz[static_cast<size_t>(i)] / B;
    if (!q_rows.empty()) {
      total += beta * rowloss::masked_kl(z.data(), q_rows[static_cast<size_t>(b)].data(), C, y0,
                                         tau, dz.data());
      if (dlogits)
        for (int i = 0; i < C; ++i) (*dlogits)(b, i) += beta * dz[static_cast<size_t>(i)] / B;
    }
  }
  return total / static_cast<double>(B);
}

}  // namespace

std::vector<GradCheckReport> run_network_gradchecks(int samples, uint64_t seed) {
  std::vector<GradCheckReport> out;
  const Architecture archs[] = {Architecture::MLP, Architecture::CNN2};
  for (Architecture arch : archs) {
    for (bool distill : {false, true}) {
      Tally tally;
      tally.rep.name = std::string(arch_name(arch)) + (distill ? "+lmd" : "+ce");
      for (int s = 0; s < samples; ++s) {
        Rng rng(seed, "gradcheck-net", static_cast<uint64_t>(arch) * 2 + distill,
                static_cast<uint64_t>(s));
        const int C = 3 + static_cast<int>(rng.below(4));
        std::vector<int64_t> input_shape =
            arch == Architecture::MLP
                ? std::vector<int64_t>{static_cast<int64_t>(4 + rng.below(8))}
                : std::vector<int64_t>{8, 8, 1};
        const int64_t B = 1 + static_cast<int64_t>(rng.below(3));
        ModelWeights m = init_model(arch, input_shape, C, rng.next_u64());
        auto params = detail::to_params<double>(m);
        const int64_t D = detail::flat_dim(input_shape);
        Mat<double> X(B, D);
        for (int64_t i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
        std::vector<int> targets(static_cast<size_t>(B));
        for (auto& y : targets) y = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(C)));
        std::vector<std::vector<double>> q_rows;
        double tau = 1.0, beta = 1.0;
        if (distill) {
          tau = 0.5 + 2.0 * rng.uniform();
          beta = 0.3 + rng.uniform();
          // random teacher distribution supported off the target
          for (int64_t b = 0; b < B; ++b) {
            std::vector<double> q(static_cast<size_t>(C), 0.0);
            double sum = 0.0;
            for (int i = 0; i < C; ++i) {
              if (i == targets[static_cast<size_t>(b)] - 1) continue;
              if (rng.below(3) == 0) continue;  // sparse support
              q[static_cast<size_t>(i)] = rng.uniform_pos();
              sum += q[static_cast<size_t>(i)];
            }
            if (sum == 0.0) {
              const int i = targets[static_cast<size_t>(b)] % C;  // any non-target slot
              q[static_cast<size_t>(i)] = 1.0;
              sum = 1.0;
            }
            for (auto& x : q) x /= sum;
            q_rows.push_back(std::move(q));
          }
        }
        auto loss_at = [&](const detail::NetParams<double>& p, uint64_t* region) {
          detail::NetCache<double> c;
          Mat<double> logits = detail::net_forward<double>(p, X, &c);
          if (region) *region = region_signature(c);
          return head_loss(logits, targets, q_rows, tau, beta, nullptr);
        };
        detail::NetCache<double> cache;
        Mat<double> logits = detail::net_forward<double>(params, X, &cache);
        Mat<double> dlogits;
        head_loss(logits, targets, q_rows, tau, beta, &dlogits);
        auto grads = detail::net_backward<double>(params, X, dlogits, cache);

        // probe a random subset of parameter entries, biases included
        for (int probe = 0; probe < 25; ++probe) {
          const size_t li = rng.below(params.W.size());
          const bool bias = rng.below(4) == 0;
          double* buf = bias ? params.b[li].data() : params.W[li].data();
          double* gbuf = bias ? grads.b[li].data() : grads.W[li].data();
          const int64_t n = bias ? params.b[li].size() : params.W[li].size();
          const int64_t i = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
          const double orig = buf[i];
          uint64_t rp = 0, rm = 0;
          buf[i] = orig + kStep;
          const double lp = loss_at(params, &rp);
          buf[i] = orig - kStep;
          const double lm = loss_at(params, &rm);
          buf[i] = orig;
          if (rp != rm) continue;  // probe crossed a ReLU/pool boundary
          tally.record((lp - lm) / (2.0 * kStep), gbuf[i]);
        }
        ++tally.rep.instances;
      }
      out.push_back(tally.rep);
    }
  }
  return out;
}

bool all_passed(std::span<const GradCheckReport> reports) {
  for (const auto& r : reports)
    if (r.failures > 0) return false;
  return true;
}

std::string format_report(const GradCheckReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s instances=%-4d entries=%-7lld failures=%-4lld max_rel_err=%.3g",
                r.name.c_str(), r.instances, static_cast<long long>(r.entries),
                static_cast<long long>(r.failures), r.max_rel_err);
  return buf;
}

}  // namespace fedlmd
