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

#include "cvi/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvi/errors.hpp"
#include "cvi/quadrature.hpp"

namespace cvi {

double log_loss(double p, double y) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return -(y * std::log2(q) + (1.0 - y) * std::log2(1.0 - q));
}

double mean_log_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& y) {
  if (p.size() != y.size()) throw ShapeError("mean_log_loss: size mismatch");
  if (p.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i) s += log_loss(p[i], y[i]);
  return s / static_cast<double>(p.size());
}

double predictive_prob(Likelihood kind, double mean, double var, int S, Rng* rng) {
  if (kind != Likelihood::kBernoulliLogit && kind != Likelihood::kBernoulliProbit) {
    throw ConfigError("predictive_prob: " + to_string(kind) + " is not a binary likelihood");
  }
  if (!(var >= 0.0) || !std::isfinite(mean)) throw DomainError("predictive_prob: invalid marginal");
  if (S > 0) {
    if (rng == nullptr) throw ConfigError("predictive_prob: sampling needs a random stream");
    const double sd = std::sqrt(var);
    double acc = 0.0;
    for (int s = 0; s < S; ++s) acc += success_prob(kind, mean + sd * rng->normal());
    return acc / S;
  }
  if (kind == Likelihood::kBernoulliProbit) return 0.5 * std::erfc(-mean / std::sqrt(2.0 * (1.0 + var)));
  if (var == 0.0) return success_prob(kind, mean);
  return quad::normal_expectation([kind](double z) { return success_prob(kind, z); }, mean, var);
}

Eigen::VectorXd predictive_probs(Likelihood kind, const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
  if (mean.size() != var.size()) throw ShapeError("predictive_probs: size mismatch");
  Eigen::VectorXd p(mean.size());
  for (int i = 0; i < mean.size(); ++i) p[i] = predictive_prob(kind, mean[i], var[i]);
  return p;
}

}  // namespace cvi
