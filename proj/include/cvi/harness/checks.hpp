// Copyright 2026 The cvi Authors
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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cvi {

struct CheckResult {
  std::string name;
  /// Largest relative error seen (z-score for Monte Carlo comparisons).
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

struct GradientCheckOptions {
  /// Flips the sign of the logit likelihood's second derivative.
  bool inject_sign_flip = false;
  int mc_samples = 1000;
  int replicates = 100;
  std::uint64_t seed = 0;
};

/// Finite-difference checks of every likelihood derivative, exactness of the
/// estimators on linear-in-statistics integrands, and agreement of the
/// Monte Carlo estimators with a quadrature oracle.
CheckReport check_gradients(const GradientCheckOptions& opts = {});

/// Quick property battery over the whole library.
CheckReport selftest(std::uint64_t seed = 0);

void write_report(std::ostream& out, const CheckReport& report);

}  // namespace cvi
