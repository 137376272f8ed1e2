// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace fedlmd {

uint64_t fnv1a64(std::string_view s);

// Deterministic counter-derived generator. Every stochastic stream in the
// simulator is keyed by (master seed, purpose tag, k, t), so results never
// depend on scheduling, worker count, or the platform's <random> library.
//
// Streams used by the engine:
//   ("init", 0, 0)      weight initialization
//   ("select", 0, t)    client selection at round t
//   ("shuffle", k, t)   client k's epoch shuffles at round t
//   ("augment", k, t)   client k's data augmentation at round t
//   ("sharding", 0, a)  shard shuffle, attempt a
//   ("lda", y, a)       Dirichlet draws for label y, attempt a
class Rng {
 public:
  Rng(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

  uint64_t next_u64();
  // Uniform in [0,1), 53-bit resolution.
  double uniform();
  // Uniform in (0,1], safe as a log() argument.
  double uniform_pos();
  double uniform(double lo, double hi);
  // Unbiased draw from [0, n), n >= 1.
  uint64_t below(uint64_t n);
  // Standard normal (Box-Muller, pair cached).
  double normal();
  // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape);
  // Dirichlet(alpha * 1_n).
  std::vector<double> dirichlet(double alpha, int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedlmd
