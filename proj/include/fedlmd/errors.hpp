// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fedlmd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad shapes, mismatched architectures, invalid batch layout.
struct ShapeError : Error {
  using Error::Error;
};

// Config file / flag problems; message carries the field path.
struct ConfigError : Error {
  using Error::Error;
};

// Dataset files: bad magic, truncation, count mismatch.
struct DataError : Error {
  using Error::Error;
};

// A softmax mask covering every class.
struct MaskError : Error {
  using Error::Error;
};

// Infeasible partition requests (K*s > n, retry exhaustion, ...).
struct PartitionError : Error {
  using Error::Error;
};

// A client whose minority set is empty while the loss requires one.
struct DegenerateClientError : Error {
  using Error::Error;
};

// NaN/Inf where finite values are guaranteed.
struct NumericError : Error {
  using Error::Error;
};

// Broken internal invariant; indicates a bug, not bad input.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace fedlmd
