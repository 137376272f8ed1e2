// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedlmd/nn.hpp"
#include "fedlmd/partition.hpp"
#include "fedlmd/tensor.hpp"

namespace fedlmd {

enum class LossKind { CE, CE_KD, NTD, LMD, LMD_TF, NTD_TF, CE_LS };

const char* loss_name(LossKind k);
LossKind loss_from_name(const std::string& s);

struct LossSpec {
  LossKind kind{LossKind::CE};
  double beta{1.0};       // distillation weight
  double tau{1.0};        // temperature
  double smoothing{0.1};  // label-smoothing mu
  double mu_prox{0.0};    // FedProx coefficient, 0 disables
};

enum class TeacherMode { GlobalModel, FixedVector, None };

// How the distillation reference is supplied. In global-model mode the caller
// provides the frozen global model's logits for the batch; in fixed-vector
// mode `mu` is the client's fixed minority distribution and any logits are
// ignored.
struct TeacherContext {
  TeacherMode mode{TeacherMode::None};
  const Tensor* teacher_logits{nullptr};
  Tensor mu;
};

struct BatchLoss {
  double value{0.0};
  Tensor dlogits;          // {B, C}, gradient of the mean loss
  bool degenerate{false};  // empty minority set forced a CE-only fallback
};

// Mean over batch of -log softmax(z)[y]. Labels are 1-based.
BatchLoss cross_entropy(const Tensor& logits, std::span<const int> labels);

// KL(softmax(z_g/tau) || softmax(z_k/tau)) averaged over the batch; the KD
// term of CE+KD, without the CE part.
BatchLoss kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, double tau);

// Temperature softmax zeroed on `mask` (1-based labels) and renormalized over
// the complement.
Tensor masked_teacher_dist(const Tensor& teacher_logits, const std::vector<int>& mask,
                           double tau);

// Temperature softmax with the per-row target zeroed out (one target per row).
Tensor masked_student_dist(const Tensor& student_logits, std::span<const int> targets,
                           double tau);

// CE(p_k, y) + beta * KL(p'_g || p'_k). The teacher mask is the client's
// active label set plus the target (support safety); in fixed-vector mode the
// teacher distribution is mu renormalized under the same mask. Falls back to
// plain CE when the client has no minority labels.
BatchLoss lmd_loss(const Tensor& student_logits, const TeacherContext& teacher,
                   std::span<const int> targets, const ClientPartition& part,
                   const LossSpec& spec, MaskSet mask_mode = MaskSet::Majority);

// CE + beta * KL with both sides masked only at the target.
BatchLoss ntd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                   std::span<const int> targets, double tau, double beta);

// CE against (1-mu)*onehot + mu/C.
BatchLoss label_smoothing_loss(const Tensor& logits, std::span<const int> targets, double mu);

// 1/(C - C_k) on minority labels, 0 on the majority set.
Tensor fixed_minority_vector(const ClientPartition& part);
// Same, from an explicit mask bitmask (1 = excluded label).
Tensor fixed_vector_from_mask(const std::vector<uint8_t>& mask);

struct ProxTerm {
  double value{0.0};
  ModelWeights grads;
};

// (mu/2) * ||w_local - w_global||^2 and its gradient mu * (w_local - w_global).
ProxTerm prox_term(const ModelWeights& local, const ModelWeights& global, double mu_prox);

// Engine-facing dispatch on the effective per-round loss kind. The teacher
// logits pointer may be null for kinds that do not need a teacher model.
BatchLoss client_loss(LossKind effective, const Tensor& student_logits,
                      const Tensor* teacher_logits, std::span<const int> targets,
                      const ClientPartition& part, const LossSpec& spec, MaskSet mask_mode);

// True if the kind requires forward passes through the global model.
bool needs_teacher_model(LossKind k);

namespace rowloss {
// Single-example double-precision kernels shared by the batch wrappers, the
// gradcheck suite, and the brute-force test oracles. Class indices 0-based.
// Gradient buffers are written (not accumulated) when non-null.
double ce(const double* z, int C, int y0, double* dz);
double ls_ce(const double* z, int C, int y0, double mu, double* dz);
double kd_kl(const double* zs, const double* zt, int C, double tau, double* dz);
// q: teacher distribution, zero outside its support, q[y0] must be 0.
double masked_kl(const double* z, const double* q, int C, int y0, double tau, double* dz);
// Temperature softmax over unmasked slots (mask may be null).
void softmax(const double* z, int C, double tau, const uint8_t* mask, double* out);
}  // namespace rowloss

}  // namespace fedlmd
