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

#include <Eigen/Dense>

#include "cvi/models.hpp"
#include "cvi/random.hpp"

namespace cvi {

/// Base-2 log loss; p is clamped to [1e-12, 1 - 1e-12].
double log_loss(double p, double y);
double mean_log_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& y);

/// E[p(y = 1 | z)] for z ~ N(mean, var). With S = 0 the probit case uses
/// Phi(m / sqrt(1 + v)) and the logit case Gauss-Hermite quadrature; S > 0
/// draws S samples from `rng`.
double predictive_prob(Likelihood kind, double mean, double var, int S = 0, Rng* rng = nullptr);
Eigen::VectorXd predictive_probs(Likelihood kind, const Eigen::VectorXd& mean, const Eigen::VectorXd& var);

}  // namespace cvi
