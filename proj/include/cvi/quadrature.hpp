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

// Deterministic one-dimensional expectations under the scalar families.

#pragma once

#include <functional>
#include <vector>

namespace cvi::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Hermite rule for the weight exp(-x^2). Cached per n.
const Rule& gauss_hermite(int n);

/// E[f(z)] for z ~ N(m, v). Uses a 64-point Gauss-Hermite rule for moderate
/// standard deviations and a dense trapezoid in the standardized variable
/// once sqrt(v) exceeds 10, where the rule's node spacing is too coarse for
/// integrands with unit-scale features.
double normal_expectation(const std::function<double(double)>& f, double m, double v);

/// Several integrands sharing the same draws, returned in order.
std::vector<double> normal_expectations(
    const std::function<void(double z, double* out)>& f, int count, double m, double v);

/// E[f(z)] for z ~ Gamma(shape, rate), by a self-normalized trapezoid in
/// u = log z. Accurate to roughly machine precision for smooth f.
double gamma_expectation(const std::function<double(double)>& f, double shape, double rate);

std::vector<double> gamma_expectations(
    const std::function<void(double z, double* out)>& f, int count, double shape, double rate);

}  // namespace cvi::quad
