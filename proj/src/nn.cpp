// SPDX-License-Identifier: Apache-2.0
#include "fedlmd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "fedlmd/detail/net_core.hpp"
#include "fedlmd/errors.hpp"

namespace fedlmd {

Tensor Tensor::zeros(std::vector<int64_t> s) {
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(static_cast<size_t>(shape_numel(t.shape)), 0.0f);
  return t;
}

Tensor Tensor::from(std::vector<int64_t> s, std::vector<float> d) {
  if (shape_numel(s) != static_cast<int64_t>(d.size()))
    throw ShapeError("tensor data length does not match shape");
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(d);
  return t;
}

int64_t shape_numel(const std::vector<int64_t>& s) {
  if (s.empty()) return 0;
  int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= d;
  }
  return n;
}

void check_finite(const Tensor& t, const char* what) {
  for (float v : t.data)
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

const char* arch_name(Architecture a) { return a == Architecture::MLP ? "mlp" : "cnn2"; }

Architecture arch_from_name(const std::string& s) {
  if (s == "mlp") return Architecture::MLP;
  if (s == "cnn2") return Architecture::CNN2;
  throw ConfigError("unknown architecture: " + s);
}

namespace detail {

std::vector<LayerSpec> arch_layers(Architecture arch, const std::vector<int64_t>& input_shape,
                                   int num_classes) {
  if (num_classes < 2) throw ShapeError("model needs at least 2 classes");
  if (arch == Architecture::MLP) {
    const int64_t d = flat_dim(input_shape);
    if (d < 1) throw ShapeError("MLP needs a non-empty input shape");
    return {
        {"fc1", {kMlpHidden, d}, kMlpHidden},
        {"fc2", {kMlpHidden, kMlpHidden}, kMlpHidden},
        {"fc3", {num_classes, kMlpHidden}, num_classes},
    };
  }
  if (input_shape.size() != 3)
    throw ShapeError("CNN2 input shape must be {H, W, C}");
  const int64_t H = input_shape[0], W = input_shape[1], Cin = input_shape[2];
  if (H < 4 || W < 4 || Cin < 1) throw ShapeError("CNN2 input too small");
  const int64_t flat = (H / 4) * (W / 4) * kConv2Filters;
  return {
      {"conv1", {kConv1Filters, kKernel, kKernel, Cin}, kConv1Filters},
      {"conv2", {kConv2Filters, kKernel, kKernel, kConv1Filters}, kConv2Filters},
      {"fc1", {kCnnFcHidden, flat}, kCnnFcHidden},
      {"fc2", {num_classes, kCnnFcHidden}, num_classes},
  };
}

}  // namespace detail

int64_t ModelWeights::param_count() const {
  int64_t n = 0;
  for (const auto& l : layers) n += l.weight.numel() + l.bias.numel();
  return n;
}

bool combinable(const ModelWeights& a, const ModelWeights& b) {
  if (a.arch != b.arch || a.num_classes != b.num_classes || a.input_shape != b.input_shape)
    return false;
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    if (!a.layers[i].weight.same_shape(b.layers[i].weight)) return false;
    if (!a.layers[i].bias.same_shape(b.layers[i].bias)) return false;
  }
  return true;
}

void check_combinable(const ModelWeights& a, const ModelWeights& b) {
  if (!combinable(a, b)) throw ShapeError("models are not shape-compatible");
}

ModelWeights init_model(Architecture arch, const std::vector<int64_t>& input_shape,
                        int num_classes, uint64_t master_seed) {
  ModelWeights m;
  m.arch = arch;
  m.input_shape = input_shape;
  m.num_classes = num_classes;
  Rng rng(master_seed, "init", 0, 0);
  for (const auto& spec : detail::arch_layers(arch, input_shape, num_classes)) {
    LayerWeights l;
    l.name = spec.name;
    l.weight = Tensor::zeros(spec.weight_shape);
    l.bias = Tensor::zeros({spec.bias_size});
    int64_t fan_in, fan_out;
    if (spec.weight_shape.size() == 4) {
      const int64_t k2 = spec.weight_shape[1] * spec.weight_shape[2];
      fan_in = k2 * spec.weight_shape[3];
      fan_out = k2 * spec.weight_shape[0];
    } else {
      fan_in = spec.weight_shape[1];
      fan_out = spec.weight_shape[0];
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& w : l.weight.data) w = static_cast<float>(rng.uniform(-a, a));
    m.layers.push_back(std::move(l));
  }
  return m;
}

ModelWeights zeros_like(const ModelWeights& m) {
  ModelWeights z = m;
  for_each_param(z, [](Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0f); });
  return z;
}

uint64_t weights_hash(const ModelWeights& m) {
  uint64_t h = 0xCBF29CE484222325ull;
  auto feed = [&h](const void* p, size_t n) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001B3ull;
    }
  };
  int32_t arch = static_cast<int32_t>(m.arch);
  feed(&arch, sizeof(arch));
  feed(&m.num_classes, sizeof(m.num_classes));
  for (auto d : m.input_shape) feed(&d, sizeof(d));
  for (const auto& l : m.layers) {
    feed(l.weight.data.data(), l.weight.data.size() * sizeof(float));
    feed(l.bias.data.data(), l.bias.data.size() * sizeof(float));
  }
  return h;
}

namespace {

void check_batch(const ModelWeights& m, const Tensor& batch) {
  if (batch.rank() != m.input_shape.size() + 1)
    throw ShapeError("batch rank does not match architecture input");
  for (size_t i = 0; i < m.input_shape.size(); ++i)
    if (batch.shape[i + 1] != m.input_shape[i])
      throw ShapeError("batch dims do not match architecture input");
  if (batch.dim(0) < 1) throw ShapeError("empty batch");
}

}  // namespace

struct ForwardCache {
  detail::NetCache<float> c;
};

Tensor forward(const ModelWeights& m, const Tensor& batch, ForwardCachePtr* cache) {
  check_batch(m, batch);
  const int64_t B = batch.dim(0);
  const int64_t D = batch.numel() / B;
  auto params = detail::to_params<float>(m);
  Eigen::Map<const detail::Mat<float>> X(batch.ptr(), B, D);
  detail::NetCache<float>* cptr = nullptr;
  ForwardCachePtr holder;
  if (cache) {
    holder = std::make_shared<ForwardCache>();
    cptr = &holder->c;
  }
  detail::Mat<float> logits = detail::net_forward(params, detail::Mat<float>(X), cptr);
  if (cache) *cache = holder;
  Tensor out = Tensor::zeros({B, m.num_classes});
  std::memcpy(out.ptr(), logits.data(), sizeof(float) * static_cast<size_t>(out.numel()));
  return out;
}

ModelWeights backward(const ModelWeights& m, const Tensor& batch, const Tensor& upstream_grad,
                      const ForwardCachePtr& cache) {
  check_batch(m, batch);
  const int64_t B = batch.dim(0);
  if (upstream_grad.rank() != 2 || upstream_grad.dim(0) != B ||
      upstream_grad.dim(1) != m.num_classes)
    throw ShapeError("upstream gradient shape must be {B, C}");
  const int64_t D = batch.numel() / B;
  auto params = detail::to_params<float>(m);
  Eigen::Map<const detail::Mat<float>> Xm(batch.ptr(), B, D);
  detail::Mat<float> X(Xm);
  detail::NetCache<float> local;
  const detail::NetCache<float>* cptr;
  if (cache) {
    cptr = &cache->c;
  } else {
    detail::net_forward(params, X, &local);
    cptr = &local;
  }
  Eigen::Map<const detail::Mat<float>> dY(upstream_grad.ptr(), B, m.num_classes);
  auto grads = detail::net_backward(params, X, detail::Mat<float>(dY), *cptr);
  ModelWeights out = zeros_like(m);
  detail::params_to_model(grads, out);
  return out;
}

OptimizerState OptimizerState::for_model(const ModelWeights& m, double lr, double momentum,
                                         double weight_decay) {
  OptimizerState st;
  st.lr = lr;
  st.momentum = momentum;
  st.weight_decay = weight_decay;
  for (const auto& l : m.layers) {
    LayerWeights b;
    b.name = l.name;
    b.weight = Tensor::zeros(l.weight.shape);
    b.bias = Tensor::zeros(l.bias.shape);
    st.buffers.push_back(std::move(b));
  }
  return st;
}

void sgd_step(ModelWeights& m, const ModelWeights& grads, OptimizerState& st) {
  check_combinable(m, grads);
  if (st.buffers.size() != m.layers.size())
    throw ShapeError("optimizer state does not match model");
  const float lr = static_cast<float>(st.lr);
  const float mu = static_cast<float>(st.momentum);
  const float wd = static_cast<float>(st.weight_decay);
  auto step = [&](Tensor& p, const Tensor& g, Tensor& v) {
    const size_t n = p.data.size();
    float* pp = p.data.data();
    const float* gp = g.data.data();
    float* vp = v.data.data();
    for (size_t i = 0; i < n; ++i) {
      const float gi = gp[i] + wd * pp[i];
      vp[i] = mu * vp[i] + gi;
      pp[i] -= lr * vp[i];
    }
  };
  for (size_t i = 0; i < m.layers.size(); ++i) {
    step(m.layers[i].weight, grads.layers[i].weight, st.buffers[i].weight);
    step(m.layers[i].bias, grads.layers[i].bias, st.buffers[i].bias);
  }
}

Tensor softmax_with_temperature(const Tensor& logits, double tau,
                                const std::optional<std::vector<int>>& mask) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (logits.rank() != 1 && logits.rank() != 2)
    throw ShapeError("softmax expects shape {C} or {B, C}");
  const int64_t C = logits.shape.back();
  const int64_t B = logits.rank() == 2 ? logits.dim(0) : 1;
  std::vector<uint8_t> masked(static_cast<size_t>(C), 0);
  if (mask) {
    for (int lbl : *mask) {
      if (lbl < 1 || lbl > C) throw MaskError("mask label out of range");
      masked[static_cast<size_t>(lbl - 1)] = 1;
    }
    if (std::count(masked.begin(), masked.end(), uint8_t(1)) == C)
      throw MaskError("mask covers all labels");
  }
  Tensor out = Tensor::zeros(logits.shape);
  for (int64_t b = 0; b < B; ++b) {
    const float* z = logits.ptr() + b * C;
    float* o = out.ptr() + b * C;
    double zmax = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < C; ++i)
      if (!masked[static_cast<size_t>(i)]) zmax = std::max(zmax, static_cast<double>(z[i]));
    double sum = 0.0;
    std::vector<double> e(static_cast<size_t>(C), 0.0);
    for (int64_t i = 0; i < C; ++i) {
      if (masked[static_cast<size_t>(i)]) continue;
      e[static_cast<size_t>(i)] = std::exp((static_cast<double>(z[i]) - zmax) / tau);
      sum += e[static_cast<size_t>(i)];
    }
    for (int64_t i = 0; i < C; ++i)
      o[i] = static_cast<float>(e[static_cast<size_t>(i)] / sum);
  }
  check_finite(out, "softmax_with_temperature");
  return out;
}

}  // namespace fedlmd
