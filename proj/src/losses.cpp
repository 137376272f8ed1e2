// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fedlmd/errors.hpp"

namespace fedlmd {

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::CE: return "ce";
    case LossKind::CE_KD: return "ce_kd";
    case LossKind::NTD: return "ntd";
    case LossKind::LMD: return "lmd";
    case LossKind::LMD_TF: return "lmd_tf";
    case LossKind::NTD_TF: return "ntd_tf";
    case LossKind::CE_LS: return "ce_ls";
  }
  throw InternalError("bad loss kind");
}

LossKind loss_from_name(const std::string& s) {
  if (s == "ce") return LossKind::CE;
  if (s == "ce_kd") return LossKind::CE_KD;
  if (s == "ntd") return LossKind::NTD;
  if (s == "lmd") return LossKind::LMD;
  if (s == "lmd_tf") return LossKind::LMD_TF;
  if (s == "ntd_tf") return LossKind::NTD_TF;
  if (s == "ce_ls") return LossKind::CE_LS;
  throw ConfigError("unknown loss kind: " + s);
}

bool needs_teacher_model(LossKind k) {
  return k == LossKind::CE_KD || k == LossKind::NTD || k == LossKind::LMD;
}

namespace rowloss {

void softmax(const double* z, int C, double tau, const uint8_t* mask, double* out) {
  double zmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < C; ++i)
    if (!mask || !mask[i]) zmax = std::max(zmax, z[i]);
  if (!std::isfinite(zmax)) throw MaskError("mask covers all labels");
  double sum = 0.0;
  for (int i = 0; i < C; ++i) {
    if (mask && mask[i]) {
      out[i] = 0.0;
    } else {
      out[i] = std::exp((z[i] - zmax) / tau);
      sum += out[i];
    }
  }
  for (int i = 0; i < C; ++i) out[i] /= sum;
}

double ce(const double* z, int C, int y0, double* dz) {
  double zmax = z[0];
  for (int i = 1; i < C; ++i) zmax = std::max(zmax, z[i]);
  double sum = 0.0;
  for (int i = 0; i < C; ++i) sum += std::exp(z[i] - zmax);
  const double lse = zmax + std::log(sum);
  if (dz)
    for (int i = 0; i < C; ++i) dz[i] = std::exp(z[i] - lse) - (i == y0 ? 1.0 : 0.0);
  return lse - z[y0];
}

double ls_ce(const double* z, int C, int y0, double mu, double* dz) {
  double zmax = z[0];
  for (int i = 1; i < C; ++i) zmax = std::max(zmax, z[i]);
  double sum = 0.0;
  for (int i = 0; i < C; ++i) sum += std::exp(z[i] - zmax);
  const double lse = zmax + std::log(sum);
  const double uni = mu / C;
  double loss = 0.0;
  for (int i = 0; i < C; ++i) {
    const double t = uni + (i == y0 ? 1.0 - mu : 0.0);
    loss += t * (lse - z[i]);
    if (dz) dz[i] = std::exp(z[i] - lse) - t;
  }
  return loss;
}

double kd_kl(const double* zs, const double* zt, int C, double tau, double* dz) {
  // log-probs via log-sum-exp on both sides
  double ms = zs[0], mt = zt[0];
  for (int i = 1; i < C; ++i) {
    ms = std::max(ms, zs[i]);
    mt = std::max(mt, zt[i]);
  }
  double ss = 0.0, st = 0.0;
  for (int i = 0; i < C; ++i) {
    ss += std::exp((zs[i] - ms) / tau);
    st += std::exp((zt[i] - mt) / tau);
  }
  const double lss = std::log(ss), lst = std::log(st);
  double kl = 0.0;
  for (int i = 0; i < C; ++i) {
    const double logq = (zt[i] - mt) / tau - lst;
    const double logp = (zs[i] - ms) / tau - lss;
    const double q = std::exp(logq);
    kl += q * (logq - logp);
    if (dz) dz[i] = (std::exp(logp) - q) / tau;
  }
  return kl;
}

double masked_kl(const double* z, const double* q, int C, int y0, double tau, double* dz) {
  if (q[y0] != 0.0) throw InternalError("teacher support includes the masked target");
  double zmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < C; ++i)
    if (i != y0) zmax = std::max(zmax, z[i]);
  double sum = 0.0;
  for (int i = 0; i < C; ++i)
    if (i != y0) sum += std::exp((z[i] - zmax) / tau);
  const double lsum = std::log(sum);
  double kl = 0.0;
  for (int i = 0; i < C; ++i) {
    const double logp = (z[i] - zmax) / tau - lsum;
    if (q[i] > 0.0) kl += q[i] * (std::log(q[i]) - logp);  // 0*log0 := 0
    if (dz) dz[i] = i == y0 ? 0.0 : (std::exp(logp) - q[i]) / tau;
  }
  return kl;
}

}  // namespace rowloss

namespace {

void check_logits(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must have shape {B, C}");
  if (t.dim(1) < 2) throw ShapeError(std::string(what) + " needs at least 2 classes");
}

void check_targets(std::span<const int> targets, int64_t B, int C) {
  if (static_cast<int64_t>(targets.size()) != B)
    throw ShapeError("target count does not match batch size");
  for (int y : targets)
    if (y < 1 || y > C) throw ConfigError("label out of range: " + std::to_string(y));
}

// Copies a float logits row to double.
void row_to_double(const float* src, int C, std::vector<double>& dst) {
  dst.resize(static_cast<size_t>(C));
  for (int i = 0; i < C; ++i) dst[static_cast<size_t>(i)] = static_cast<double>(src[i]);
}

}  // namespace

BatchLoss cross_entropy(const Tensor& logits, std::span<const int> labels) {
  check_logits(logits, "logits");
  const int64_t B = logits.dim(0);
  const int C = static_cast<int>(logits.dim(1));
  check_targets(labels, B, C);
  BatchLoss out;
  out.dlogits = Tensor::zeros({B, C});
  std::vector<double> z, dz(static_cast<size_t>(C));
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    row_to_double(logits.ptr() + b * C, C, z);
    total += rowloss::ce(z.data(), C, labels[static_cast<size_t>(b)] - 1, dz.data());
    float* g = out.dlogits.ptr() + b * C;
    for (int i = 0; i < C; ++i) g[i] = static_cast<float>(dz[static_cast<size_t>(i)] / B);
  }
  out.value = total / static_cast<double>(B);
  return out;
}

BatchLoss kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, double tau) {
  check_logits(student_logits, "student logits");
  if (!student_logits.same_shape(teacher_logits))
    throw ShapeError("student/teacher logits shapes differ");
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  const int64_t B = student_logits.dim(0);
  const int C = static_cast<int>(student_logits.dim(1));
  BatchLoss out;
  out.dlogits = Tensor::zeros({B, C});
  std::vector<double> zs, zt, dz(static_cast<size_t>(C));
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    row_to_double(student_logits.ptr() + b * C, C, zs);
    row_to_double(teacher_logits.ptr() + b * C, C, zt);
    total += rowloss::kd_kl(zs.data(), zt.data(), C, tau, dz.data());
    float* g = out.dlogits.ptr() + b * C;
    for (int i = 0; i < C; ++i) g[i] = static_cast<float>(dz[static_cast<size_t>(i)] / B);
  }
  out.value = total / static_cast<double>(B);
  return out;
}

Tensor masked_teacher_dist(const Tensor& teacher_logits, const std::vector<int>& mask,
                           double tau) {
  return softmax_with_temperature(teacher_logits, tau,
                                  mask.empty() ? std::nullopt
                                               : std::optional<std::vector<int>>(mask));
}

Tensor masked_student_dist(const Tensor& student_logits, std::span<const int> targets,
                           double tau) {
  check_logits(student_logits, "student logits");
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  const int64_t B = student_logits.dim(0);
  const int C = static_cast<int>(student_logits.dim(1));
  check_targets(targets, B, C);
  Tensor out = Tensor::zeros({B, C});
  std::vector<double> z, p(static_cast<size_t>(C));
  std::vector<uint8_t> mask(static_cast<size_t>(C), 0);
  for (int64_t b = 0; b < B; ++b) {
    row_to_double(student_logits.ptr() + b * C, C, z);
    std::fill(mask.begin(), mask.end(), uint8_t(0));
    mask[static_cast<size_t>(targets[static_cast<size_t>(b)] - 1)] = 1;
    rowloss::softmax(z.data(), C, tau, mask.data(), p.data());
    float* o = out.ptr() + b * C;
    for (int i = 0; i < C; ++i) o[i] = static_cast<float>(p[static_cast<size_t>(i)]);
  }
  return out;
}

namespace {

// Shared CE + beta*KL core. `client_mask` marks the labels the teacher never
// distills (majority or locally-present set); the per-row teacher mask is
// client_mask plus the row's target. Teacher reference comes either from
// logits (temperature softmax over the unmasked set) or from a fixed vector
// (renormalized over the unmasked set). Rows whose teacher mask covers every
// class contribute CE only.
BatchLoss masked_distill(const Tensor& student, const Tensor* teacher_logits, const Tensor* mu,
                         const std::vector<uint8_t>& client_mask, std::span<const int> targets,
                         double tau, double beta) {
  check_logits(student, "student logits");
  const int64_t B = student.dim(0);
  const int C = static_cast<int>(student.dim(1));
  check_targets(targets, B, C);
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (static_cast<int>(client_mask.size()) != C)
    throw ShapeError("client mask size does not match class count");
  if (teacher_logits) {
    if (!student.same_shape(*teacher_logits))
      throw ShapeError("student/teacher logits shapes differ");
  } else if (!mu || mu->numel() != C) {
    throw ShapeError("fixed teacher vector must have length C");
  }

  BatchLoss out;
  out.dlogits = Tensor::zeros({B, C});
  double total = 0.0;
  std::vector<double> zs, zt, q(static_cast<size_t>(C)), dz(static_cast<size_t>(C));
  std::vector<uint8_t> tmask(static_cast<size_t>(C));
  for (int64_t b = 0; b < B; ++b) {
    const int y0 = targets[static_cast<size_t>(b)] - 1;
    row_to_double(student.ptr() + b * C, C, zs);
    double v = rowloss::ce(zs.data(), C, y0, dz.data());
    float* g = out.dlogits.ptr() + b * C;
    for (int i = 0; i < C; ++i) g[i] = static_cast<float>(dz[static_cast<size_t>(i)] / B);

    tmask.assign(client_mask.begin(), client_mask.end());
    tmask[static_cast<size_t>(y0)] = 1;
    bool have_teacher = std::count(tmask.begin(), tmask.end(), uint8_t(1)) < C;
    if (have_teacher) {
      if (teacher_logits) {
        row_to_double(teacher_logits->ptr() + b * C, C, zt);
        rowloss::softmax(zt.data(), C, tau, tmask.data(), q.data());
      } else {
        double sum = 0.0;
        for (int i = 0; i < C; ++i) {
          q[static_cast<size_t>(i)] = tmask[static_cast<size_t>(i)]
                                          ? 0.0
                                          : static_cast<double>(mu->data[static_cast<size_t>(i)]);
          sum += q[static_cast<size_t>(i)];
        }
        // target was a minority label with all its weight: nothing left to distill
        if (sum <= 0.0) have_teacher = false;
        else
          for (auto& x : q) x /= sum;
      }
    }
    if (have_teacher) {
      const double kl = rowloss::masked_kl(zs.data(), q.data(), C, y0, tau, dz.data());
      v += beta * kl;
      for (int i = 0; i < C; ++i)
        g[i] += static_cast<float>(beta * dz[static_cast<size_t>(i)] / B);
    }
    total += v;
  }
  out.value = total / static_cast<double>(B);
  return out;
}

}  // namespace

BatchLoss lmd_loss(const Tensor& student_logits, const TeacherContext& teacher,
                   std::span<const int> targets, const ClientPartition& part,
                   const LossSpec& spec, MaskSet mask_mode) {
  check_logits(student_logits, "student logits");
  const int C = static_cast<int>(student_logits.dim(1));
  if (part.num_classes() != C) throw ShapeError("partition class count does not match logits");
  if (spec.beta == 0.0) return cross_entropy(student_logits, targets);

  const std::vector<uint8_t> mask = active_mask(part, mask_mode);
  const int masked = static_cast<int>(std::count(mask.begin(), mask.end(), uint8_t(1)));
  if (masked == C) {
    // no minority labels: nothing to distill, train with CE alone
    BatchLoss out = cross_entropy(student_logits, targets);
    out.degenerate = true;
    return out;
  }

  if (teacher.mode == TeacherMode::GlobalModel) {
    if (!teacher.teacher_logits) throw InternalError("global-model teacher without logits");
    return masked_distill(student_logits, teacher.teacher_logits, nullptr, mask, targets,
                          spec.tau, spec.beta);
  }
  if (teacher.mode == TeacherMode::FixedVector) {
    Tensor mu = teacher.mu.numel() == C ? teacher.mu : fixed_vector_from_mask(mask);
    return masked_distill(student_logits, nullptr, &mu, mask, targets, spec.tau, spec.beta);
  }
  throw InternalError("LMD requires a teacher context");
}

BatchLoss ntd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   std::span<const int> targets, double tau, double beta) {
  check_logits(student_logits, "student logits");
  const int C = static_cast<int>(student_logits.dim(1));
  if (beta == 0.0) return cross_entropy(student_logits, targets);
  const std::vector<uint8_t> no_mask(static_cast<size_t>(C), 0);
  return masked_distill(student_logits, &teacher_logits, nullptr, no_mask, targets, tau, beta);
}

BatchLoss label_smoothing_loss(const Tensor& logits, std::span<const int> targets, double mu) {
  check_logits(logits, "logits");
  if (mu < 0.0 || mu >= 1.0) throw ConfigError("label smoothing mu must be in [0, 1)");
  const int64_t B = logits.dim(0);
  const int C = static_cast<int>(logits.dim(1));
  check_targets(targets, B, C);
  BatchLoss out;
  out.dlogits = Tensor::zeros({B, C});
  std::vector<double> z, dz(static_cast<size_t>(C));
  double total = 0.0;
  for (int64_t b = 0; b < B; ++b) {
    row_to_double(logits.ptr() + b * C, C, z);
    total += rowloss::ls_ce(z.data(), C, targets[static_cast<size_t>(b)] - 1, mu, dz.data());
    float* g = out.dlogits.ptr() + b * C;
    for (int i = 0; i < C; ++i) g[i] = static_cast<float>(dz[static_cast<size_t>(i)] / B);
  }
  out.value = total / static_cast<double>(B);
  return out;
}

Tensor fixed_vector_from_mask(const std::vector<uint8_t>& mask) {
  const int C = static_cast<int>(mask.size());
  const int excluded = static_cast<int>(std::count(mask.begin(), mask.end(), uint8_t(1)));
  if (excluded == C) throw DegenerateClientError("no minority labels for fixed teacher vector");
  Tensor mu = Tensor::zeros({C});
  const float v = 1.0f / static_cast<float>(C - excluded);
  for (int i = 0; i < C; ++i)
    if (!mask[static_cast<size_t>(i)]) mu.data[static_cast<size_t>(i)] = v;
  return mu;
}

Tensor fixed_minority_vector(const ClientPartition& part) {
  return fixed_vector_from_mask(active_mask(part, MaskSet::Majority));
}

ProxTerm prox_term(const ModelWeights& local, const ModelWeights& global, double mu_prox) {
  check_combinable(local, global);
  if (mu_prox < 0.0) throw ConfigError("mu_prox must be non-negative");
  ProxTerm out;
  out.grads = zeros_like(local);
  double sq = 0.0;
  for (size_t li = 0; li < local.layers.size(); ++li) {
    auto apply = [&](const Tensor& w, const Tensor& g, Tensor& grad) {
      for (size_t i = 0; i < w.data.size(); ++i) {
        const double d = static_cast<double>(w.data[i]) - static_cast<double>(g.data[i]);
        sq += d * d;
        grad.data[i] = static_cast<float>(mu_prox * d);
      }
    };
    apply(local.layers[li].weight, global.layers[li].weight, out.grads.layers[li].weight);
    apply(local.layers[li].bias, global.layers[li].bias, out.grads.layers[li].bias);
  }
  out.value = 0.5 * mu_prox * sq;
  return out;
}

BatchLoss client_loss(LossKind effective, const Tensor& student_logits,
                      const Tensor* teacher_logits, std::span<const int> targets,
                      const ClientPartition& part, const LossSpec& spec, MaskSet mask_mode) {
  switch (effective) {
    case LossKind::CE:
      return cross_entropy(student_logits, targets);
    case LossKind::CE_LS:
      return label_smoothing_loss(student_logits, targets, spec.smoothing);
    case LossKind::CE_KD: {
      if (!teacher_logits) throw InternalError("CE+KD needs teacher logits");
      BatchLoss ce = cross_entropy(student_logits, targets);
      if (spec.beta == 0.0) return ce;
      BatchLoss kd = kd_loss(student_logits, *teacher_logits, spec.tau);
      ce.value += spec.beta * kd.value;
      for (size_t i = 0; i < ce.dlogits.data.size(); ++i)
        ce.dlogits.data[i] += static_cast<float>(spec.beta) * kd.dlogits.data[i];
      return ce;
    }
    case LossKind::NTD: {
      if (!teacher_logits) throw InternalError("NTD needs teacher logits");
      return ntd_loss(student_logits, *teacher_logits, targets, spec.tau, spec.beta);
    }
    case LossKind::LMD: {
      TeacherContext ctx;
      ctx.mode = TeacherMode::GlobalModel;
      ctx.teacher_logits = teacher_logits;
      return lmd_loss(student_logits, ctx, targets, part, spec, mask_mode);
    }
    case LossKind::LMD_TF: {
      TeacherContext ctx;
      ctx.mode = TeacherMode::FixedVector;
      return lmd_loss(student_logits, ctx, targets, part, spec, mask_mode);
    }
    case LossKind::NTD_TF: {
      const int C = static_cast<int>(student_logits.dim(1));
      if (spec.beta == 0.0) return cross_entropy(student_logits, targets);
      const std::vector<uint8_t> no_mask(static_cast<size_t>(C), 0);
      Tensor mu = fixed_vector_from_mask(no_mask);  // uniform 1/C, renormalized per row
      return masked_distill(student_logits, nullptr, &mu, no_mask, targets, spec.tau, spec.beta);
    }
  }
  throw InternalError("bad loss kind");
}

}  // namespace fedlmd
