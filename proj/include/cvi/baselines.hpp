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

// Gradient-ascent baselines on an unconstrained variational parameterization.
// Gaussian q = N(m, L L') with the diagonal of L passed through softplus;
// Gamma q = Ga(softplus(a'), softplus(b')). These see only the prior and the
// likelihood factors, never the conjugate backends.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>

#include "cvi/cvi.hpp"
#include "cvi/models.hpp"

namespace cvi {

struct FlatParams {
  bool gamma = false;
  /// Latent dimension; 1 for Gamma.
  int dim = 0;
  /// Gaussian: (m, packed lower triangle of L, raw diagonal). Gamma: (a', b').
  Eigen::VectorXd values;
};

double softplus(double x);
double softplus_inverse(double y);

FlatParams flat_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
FlatParams flat_gamma(double shape, double rate);

struct ElboGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// ELBO of a model as a function of FlatParams. The prior factorization is
/// computed once at construction.
class VariationalObjective {
 public:
  explicit VariationalObjective(const Model& model);

  bool gamma() const { return gamma_; }
  int dim() const { return dim_; }

  /// q equal to the prior.
  FlatParams prior_params() const;

  /// Reparameterization estimate over S draws (score function for Gamma);
  /// S = 0 evaluates every expectation by quadrature.
  ElboGrad elbo_and_grad(const FlatParams& params, int S, Rng& rng) const;
  /// Quadrature value only.
  double elbo(const FlatParams& params) const;

  /// Mean and covariance of a Gaussian q.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_moments(const FlatParams& params) const;
  NatParams gamma_q(const FlatParams& params) const;
  /// Mean and variance of each site's target under q (Gaussian models).
  Marginals site_marginals(const FlatParams& params) const;

 private:
  void check(const FlatParams& params) const;
  Eigen::MatrixXd cholesky_factor(const FlatParams& params) const;

  std::vector<NonConjugateFactor> factors_;
  bool gamma_ = false;
  int dim_ = 0;
  // Gaussian models.
  Eigen::MatrixXd projection_;  // rows map z to site targets
  Eigen::MatrixXd prior_cov_;
  Eigen::MatrixXd prior_prec_;
  double prior_log_det_ = 0.0;
  // Gamma model.
  double a_ = 1.0, b_ = 1.0;
};

/// Convenience wrapper constructing the objective on every call.
ElboGrad elbo_and_grad(const Model& model, const FlatParams& params, int S, Rng& rng);

/// Ascent step params + rho g.
FlatParams sgd_step(const FlatParams& params, const Eigen::VectorXd& g, double rho);

struct AdamHyper {
  double w0 = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;
};

FlatParams adam_step(const FlatParams& params, const Eigen::VectorXd& g, AdamState& state, const AdamHyper& hyper);

enum class Optimizer { kSgd, kAdam };

struct BaselineConfig {
  Optimizer optimizer = Optimizer::kAdam;
  /// rho for SGD, w0 for ADAM.
  double step = 0.01;
  /// Zero selects quadrature-exact gradients.
  int mc_samples = 10;
  int max_iters = 100;
  std::uint64_t seed = 0;
};

struct BaselineHooks {
  bool compute_elbo = true;
  std::function<void(int iter, const VariationalObjective& objective, const FlatParams& params, TraceRow& row)>
      on_iteration;
};

struct BaselineResult {
  FlatParams params;
  RunTrace trace;
};

BaselineResult run_baseline(const Model& model, const BaselineConfig& cfg, const BaselineHooks& hooks = {});

}  // namespace cvi
