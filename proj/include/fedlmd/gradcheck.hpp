// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedlmd {

struct GradCheckReport {
  std::string name;
  int instances{0};
  int64_t entries{0};
  int64_t failures{0};
  double max_rel_err{0.0};
};

// Central finite differences (step 1e-4) against the analytic gradients of
// every loss in the family, on `samples` random instances each. An entry
// passes when |fd - grad| <= 1e-3 * max(|fd|, |grad|) + 1e-8.
std::vector<GradCheckReport> run_loss_gradchecks(int samples, uint64_t seed);

// Same check against backward() through both architectures, composed with CE
// and masked-distillation heads, run at double precision on random
// (model, batch) samples with a random subset of parameter entries each.
std::vector<GradCheckReport> run_network_gradchecks(int samples, uint64_t seed);

bool all_passed(std::span<const GradCheckReport> reports);
std::string format_report(const GradCheckReport& r);

}  // namespace fedlmd
