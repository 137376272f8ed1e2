// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fedlmd {

// Dense row-major float tensor. Deliberately minimal: the simulator only
// needs shape bookkeeping and raw storage; the math lives in the nn layer.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> s);
  static Tensor from(std::vector<int64_t> s, std::vector<float> d);

  int64_t numel() const {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
  int64_t dim(size_t i) const { return shape.at(i); }
  size_t rank() const { return shape.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }
};

int64_t shape_numel(const std::vector<int64_t>& s);

// Throws NumericError if any entry is NaN or Inf.
void check_finite(const Tensor& t, const char* what);

}  // namespace fedlmd
