// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedlmd/rng.hpp"
#include "fedlmd/tensor.hpp"

namespace fedlmd {

enum class Architecture { MLP, CNN2 };

const char* arch_name(Architecture a);
Architecture arch_from_name(const std::string& s);

struct LayerWeights {
  std::string name;
  Tensor weight;
  Tensor bias;
};

// Parameters of one client or global model. The unit that is broadcast,
// trained, uploaded, and averaged.
struct ModelWeights {
  Architecture arch{Architecture::MLP};
  std::vector<int64_t> input_shape;  // per-example feature shape, e.g. {28,28,1}
  int num_classes{0};
  std::vector<LayerWeights> layers;

  int64_t param_count() const;
};

// True iff the two models can be averaged: same architecture and all shapes match.
bool combinable(const ModelWeights& a, const ModelWeights& b);
void check_combinable(const ModelWeights& a, const ModelWeights& b);

// Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases, drawn
// from the ("init", 0, 0) stream of `master`.
ModelWeights init_model(Architecture arch, const std::vector<int64_t>& input_shape,
                        int num_classes, uint64_t master_seed);

ModelWeights zeros_like(const ModelWeights& m);

// FNV-1a over the architecture header and all parameter bytes.
uint64_t weights_hash(const ModelWeights& m);

// Visit every parameter tensor (weight then bias per layer, in layer order).
template <typename M, typename F>
void for_each_param(M& m, F&& f) {
  for (auto& l : m.layers) {
    f(l.weight);
    f(l.bias);
  }
}

// Opaque forward-pass cache so training can reuse activations in backward.
struct ForwardCache;
using ForwardCachePtr = std::shared_ptr<ForwardCache>;

// Raw logits, shape {B, C}. No softmax. `batch` has shape {B, ...input_shape}.
Tensor forward(const ModelWeights& m, const Tensor& batch, ForwardCachePtr* cache = nullptr);

// dL/dw for every parameter given dL/dlogits. Activations are recomputed
// unless the cache from the matching forward() call is supplied.
ModelWeights backward(const ModelWeights& m, const Tensor& batch, const Tensor& upstream_grad,
                      const ForwardCachePtr& cache = nullptr);

struct OptimizerState {
  std::vector<LayerWeights> buffers;  // momentum buffers, shapes match the model
  double lr{0.01};
  double momentum{0.9};
  double weight_decay{1e-5};

  static OptimizerState for_model(const ModelWeights& m, double lr, double momentum,
                                  double weight_decay);
};

// Momentum SGD with L2 weight decay added to the gradient before the
// momentum update:  v = mu*v + (g + wd*w);  w -= lr*v.
void sgd_step(ModelWeights& m, const ModelWeights& grads, OptimizerState& st);

// exp(z_i/tau) normalized over unmasked labels; masked entries exactly 0.
// Stabilized by max-subtraction over the unmasked set. `mask` holds 1-based
// labels; it must not cover all classes. Accepts shape {C} or {B, C}.
Tensor softmax_with_temperature(const Tensor& logits, double tau,
                                const std::optional<std::vector<int>>& mask = std::nullopt);

}  // namespace fedlmd
