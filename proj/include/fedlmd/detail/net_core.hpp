// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "fedlmd/errors.hpp"
#include "fedlmd/nn.hpp"

// Scalar-templated forward/backward so the finite-difference oracle can run
// the same math in double while production stays float.
namespace fedlmd::detail {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr int kMlpHidden = 200;
constexpr int kConv1Filters = 32;
constexpr int kConv2Filters = 64;
constexpr int kKernel = 5;
constexpr int kPad = 2;
constexpr int kCnnFcHidden = 512;

struct LayerSpec {
  std::string name;
  std::vector<int64_t> weight_shape;
  int64_t bias_size;
};

std::vector<LayerSpec> arch_layers(Architecture arch, const std::vector<int64_t>& input_shape,
                                   int num_classes);

inline int64_t flat_dim(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

template <typename S>
struct NetParams {
  Architecture arch{Architecture::MLP};
  std::vector<int64_t> input_shape;
  int num_classes{0};
  std::vector<Mat<S>> W;  // dense: [out, in]; conv: [Cout, k*k*Cin]
  std::vector<Vec<S>> b;
};

template <typename S>
NetParams<S> to_params(const ModelWeights& m) {
  NetParams<S> p;
  p.arch = m.arch;
  p.input_shape = m.input_shape;
  p.num_classes = m.num_classes;
  p.W.reserve(m.layers.size());
  p.b.reserve(m.layers.size());
  for (const auto& l : m.layers) {
    int64_t rows = l.weight.dim(0);
    int64_t cols = l.weight.numel() / rows;
    Mat<S> w(rows, cols);
    for (int64_t i = 0; i < l.weight.numel(); ++i)
      w.data()[i] = static_cast<S>(l.weight.data[static_cast<size_t>(i)]);
    Vec<S> b(l.bias.numel());
    for (int64_t i = 0; i < l.bias.numel(); ++i)
      b[i] = static_cast<S>(l.bias.data[static_cast<size_t>(i)]);
    p.W.push_back(std::move(w));
    p.b.push_back(std::move(b));
  }
  return p;
}

template <typename S>
void params_to_model(const NetParams<S>& p, ModelWeights& out) {
  for (size_t li = 0; li < out.layers.size(); ++li) {
    auto& l = out.layers[li];
    for (int64_t i = 0; i < l.weight.numel(); ++i)
      l.weight.data[static_cast<size_t>(i)] = static_cast<float>(p.W[li].data()[i]);
    for (int64_t i = 0; i < l.bias.numel(); ++i)
      l.bias.data[static_cast<size_t>(i)] = static_cast<float>(p.b[li][i]);
  }
}

template <typename S>
struct NetCache {
  // MLP activations
  Mat<S> h1, h2;
  // CNN2 intermediates
  Mat<S> p1, a1, pool1, p2, a2, pool2, hfc;
  std::vector<int32_t> arg1, arg2;
};

// --- image helpers (NHWC rows: one row per pixel, channels in columns) ---

template <typename S>
Mat<S> im2col(const Mat<S>& img, int64_t B, int64_t H, int64_t W, int64_t C) {
  const int64_t patch = kKernel * kKernel * C;
  Mat<S> out(B * H * W, patch);
  for (int64_t bi = 0; bi < B; ++bi) {
    const int64_t in_base = bi * H * W;
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t ox = 0; ox < W; ++ox) {
        S* row = out.data() + (in_base + oy * W + ox) * patch;
        int64_t col = 0;
        for (int64_t ky = 0; ky < kKernel; ++ky) {
          const int64_t iy = oy + ky - kPad;
          for (int64_t kx = 0; kx < kKernel; ++kx) {
            const int64_t ix = ox + kx - kPad;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
              const S* src = img.data() + (in_base + iy * W + ix) * C;
              for (int64_t c = 0; c < C; ++c) row[col++] = src[c];
            } else {
              for (int64_t c = 0; c < C; ++c) row[col++] = S(0);
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename S>
Mat<S> col2im(const Mat<S>& cols, int64_t B, int64_t H, int64_t W, int64_t C) {
  Mat<S> img = Mat<S>::Zero(B * H * W, C);
  const int64_t patch = kKernel * kKernel * C;
  for (int64_t bi = 0; bi < B; ++bi) {
    const int64_t in_base = bi * H * W;
    for (int64_t oy = 0; oy < H; ++oy) {
      for (int64_t ox = 0; ox < W; ++ox) {
        const S* row = cols.data() + (in_base + oy * W + ox) * patch;
        int64_t col = 0;
        for (int64_t ky = 0; ky < kKernel; ++ky) {
          const int64_t iy = oy + ky - kPad;
          for (int64_t kx = 0; kx < kKernel; ++kx) {
            const int64_t ix = ox + kx - kPad;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W) {
              S* dst = img.data() + (in_base + iy * W + ix) * C;
              for (int64_t c = 0; c < C; ++c) dst[c] += row[col++];
            } else {
              col += C;
            }
          }
        }
      }
    }
  }
  return img;
}

// 2x2 max pool, stride 2, floor semantics. argmax stores the winning pixel
// index within the image so backward can route gradients.
template <typename S>
Mat<S> maxpool2(const Mat<S>& in, int64_t B, int64_t H, int64_t W, int64_t C,
                std::vector<int32_t>& argmax) {
  const int64_t OH = H / 2, OW = W / 2;
  Mat<S> out(B * OH * OW, C);
  argmax.assign(static_cast<size_t>(B * OH * OW * C), 0);
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t oy = 0; oy < OH; ++oy) {
      for (int64_t ox = 0; ox < OW; ++ox) {
        const int64_t orow = bi * OH * OW + oy * OW + ox;
        for (int64_t c = 0; c < C; ++c) {
          S best{};
          int32_t best_idx = -1;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int64_t iy = oy * 2 + dy, ix = ox * 2 + dx;
              const int64_t pix = iy * W + ix;
              S v = in(bi * H * W + pix, c);
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = static_cast<int32_t>(pix);
              }
            }
          }
          out(orow, c) = best;
          argmax[static_cast<size_t>(orow * C + c)] = best_idx;
        }
      }
    }
  }
  return out;
}

template <typename S>
Mat<S> maxpool2_backward(const Mat<S>& dout, int64_t B, int64_t H, int64_t W, int64_t C,
                         const std::vector<int32_t>& argmax) {
  const int64_t OH = H / 2, OW = W / 2;
  Mat<S> din = Mat<S>::Zero(B * H * W, C);
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t o = 0; o < OH * OW; ++o) {
      const int64_t orow = bi * OH * OW + o;
      for (int64_t c = 0; c < C; ++c) {
        const int32_t pix = argmax[static_cast<size_t>(orow * C + c)];
        din(bi * H * W + pix, c) += dout(orow, c);
      }
    }
  }
  return din;
}

template <typename S>
Mat<S> relu(const Mat<S>& m) {
  return m.cwiseMax(S(0));
}

template <typename S>
Mat<S> dense(const Mat<S>& x, const Mat<S>& W, const Vec<S>& b) {
  Mat<S> y = x * W.transpose();
  y.rowwise() += b.transpose();
  return y;
}

template <typename S>
Mat<S> net_forward(const NetParams<S>& p, const Mat<S>& X, NetCache<S>* cache) {
  NetCache<S> local;
  NetCache<S>& c = cache ? *cache : local;
  if (p.arch == Architecture::MLP) {
    c.h1 = relu(dense(X, p.W[0], p.b[0]));
    c.h2 = relu(dense(c.h1, p.W[1], p.b[1]));
    return dense(c.h2, p.W[2], p.b[2]);
  }
  // CNN2
  const int64_t B = X.rows();
  const int64_t H = p.input_shape[0], W = p.input_shape[1], Cin = p.input_shape[2];
  Eigen::Map<const Mat<S>> img(X.data(), B * H * W, Cin);
  c.p1 = im2col(Mat<S>(img), B, H, W, Cin);
  c.a1 = relu(dense(c.p1, p.W[0], p.b[0]));
  c.pool1 = maxpool2(c.a1, B, H, W, static_cast<int64_t>(kConv1Filters), c.arg1);
  const int64_t H2 = H / 2, W2 = W / 2;
  c.p2 = im2col(c.pool1, B, H2, W2, static_cast<int64_t>(kConv1Filters));
  c.a2 = relu(dense(c.p2, p.W[1], p.b[1]));
  c.pool2 = maxpool2(c.a2, B, H2, W2, static_cast<int64_t>(kConv2Filters), c.arg2);
  const int64_t H4 = H2 / 2, W4 = W2 / 2;
  const int64_t F = H4 * W4 * kConv2Filters;
  // pool2 memory is already per-image contiguous NHWC, so the flatten is a view
  Eigen::Map<const Mat<S>> flat(c.pool2.data(), B, F);
  c.hfc = relu(dense(Mat<S>(flat), p.W[2], p.b[2]));
  return dense(c.hfc, p.W[3], p.b[3]);
}

template <typename S>
NetParams<S> net_backward(const NetParams<S>& p, const Mat<S>& X, const Mat<S>& dlogits,
                          const NetCache<S>& c) {
  NetParams<S> g;
  g.arch = p.arch;
  g.input_shape = p.input_shape;
  g.num_classes = p.num_classes;
  g.W.resize(p.W.size());
  g.b.resize(p.b.size());
  if (p.arch == Architecture::MLP) {
    g.W[2] = dlogits.transpose() * c.h2;
    g.b[2] = dlogits.colwise().sum();
    Mat<S> dh2 = (dlogits * p.W[2]).cwiseProduct((c.h2.array() > S(0)).template cast<S>().matrix());
    g.W[1] = dh2.transpose() * c.h1;
    g.b[1] = dh2.colwise().sum();
    Mat<S> dh1 = (dh2 * p.W[1]).cwiseProduct((c.h1.array() > S(0)).template cast<S>().matrix());
    g.W[0] = dh1.transpose() * X;
    g.b[0] = dh1.colwise().sum();
    return g;
  }
  const int64_t B = X.rows();
  const int64_t H = p.input_shape[0], W = p.input_shape[1];
  const int64_t H2 = H / 2, W2 = W / 2;
  const int64_t H4 = H2 / 2, W4 = W2 / 2;
  const int64_t F = H4 * W4 * kConv2Filters;

  g.W[3] = dlogits.transpose() * c.hfc;
  g.b[3] = dlogits.colwise().sum();
  Mat<S> dhfc =
      (dlogits * p.W[3]).cwiseProduct((c.hfc.array() > S(0)).template cast<S>().matrix());
  Eigen::Map<const Mat<S>> flat(c.pool2.data(), B, F);
  g.W[2] = dhfc.transpose() * flat;
  g.b[2] = dhfc.colwise().sum();
  Mat<S> dflat = dhfc * p.W[2];
  Eigen::Map<const Mat<S>> dpool2(dflat.data(), B * H4 * W4, kConv2Filters);
  Mat<S> da2 = maxpool2_backward(Mat<S>(dpool2), B, H2, W2,
                                 static_cast<int64_t>(kConv2Filters), c.arg2);
  da2 = da2.cwiseProduct((c.a2.array() > S(0)).template cast<S>().matrix());
  g.W[1] = da2.transpose() * c.p2;
  g.b[1] = da2.colwise().sum();
  Mat<S> dp2 = da2 * p.W[1];
  Mat<S> dpool1 = col2im(dp2, B, H2, W2, static_cast<int64_t>(kConv1Filters));
  Mat<S> da1 =
      maxpool2_backward(dpool1, B, H, W, static_cast<int64_t>(kConv1Filters), c.arg1);
  da1 = da1.cwiseProduct((c.a1.array() > S(0)).template cast<S>().matrix());
  g.W[0] = da1.transpose() * c.p1;
  g.b[0] = da1.colwise().sum();
  return g;
}

}  // namespace fedlmd::detail
