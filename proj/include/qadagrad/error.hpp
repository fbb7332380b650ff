// Copyright 2026 The qadagrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace qadagrad {

/// Raised on every contract violation in the library. The message is the
/// stable, user-facing part ("non-finite gradient", "corrupt code", ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void check(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

inline void check_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw Error(std::string("dimension mismatch in ") + where + ": " +
                std::to_string(a) + " vs " + std::to_string(b));
  }
}

inline void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error("non-finite gradient");
  }
}

// sign(0) == 0
inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail
}  // namespace qadagrad
