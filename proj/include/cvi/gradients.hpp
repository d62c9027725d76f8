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

// Gradients of E_q[f] with respect to the mean parameters of q.

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include "cvi/expfam.hpp"
#include "cvi/random.hpp"

namespace cvi {

/// Closed-form Gaussian expectation: E_q f and its derivatives in (m, v).
struct GaussianExpectation {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

struct ScalarFunction {
  std::function<double(double)> f;
  std::function<double(double)> d1;
  /// Optional; a central difference of d1 with step 1e-5 is used when absent.
  std::function<double(double)> d2;
  /// Optional closed form under a scalar Gaussian q = N(m, v).
  std::function<GaussianExpectation(double m, double v)> gaussian_exact;

  double second(double z) const;
};

enum class EstimatorTag { kExact, kOpperArchambeauMc, kFisherSolveMc, kFiniteDiff };

std::string to_string(EstimatorTag tag);

struct GradEstimate {
  Eigen::VectorXd g;
  /// Per-coordinate Monte Carlo standard error; zero for exact estimates.
  Eigen::VectorXd se;
  int n_samples = 0;
  EstimatorTag tag = EstimatorTag::kExact;
};

/// Reparameterized estimate of grad_mu E_q[f] for scalar Gaussian q using
/// dE/dm = E f'(z) and dE/dv = E f''(z) / 2, mapped through
/// d/dmu1 = d/dm - 2 m d/dv and d/dmu2 = d/dv. The first coordinate carries the
/// zero-mean control variate c (z - m), c a leave-one-out mean of f'', which
/// leaves it unbiased and makes quadratic f exact at every S.
GradEstimate gauss_grad_mean(const ScalarFunction& f, const NatParams& q, int S, Rng& rng);

/// Same gradient evaluated by quadrature (or the closed form when supplied).
GradEstimate gauss_grad_exact(const ScalarFunction& f, const NatParams& q);

/// Solves C_lambda g = dE_q[h]/dlambda with the exact Fisher matrix. The
/// lambda-gradient is a reparameterization estimate for Gaussians and a score
/// estimate for Gamma. With S >= 4 a control variate linear in phi is fitted
/// by least squares, leaving out the draw it is applied to; h linear in the
/// sufficient statistics is then recovered exactly and the estimate stays
/// unbiased.
GradEstimate fisher_solve_grad(const ScalarFunction& h, const NatParams& q, int S, Rng& rng);

/// Fisher-solve gradient with dE/dlambda evaluated by quadrature.
GradEstimate fisher_solve_grad_exact(const ScalarFunction& h, const NatParams& q);

/// Exact gradient through whichever route suits the family.
GradEstimate exact_mean_grad(const ScalarFunction& f, const NatParams& q);

/// Central differences of `expectation` in mean coordinates. A perturbed point
/// outside the mean domain shrinks the step tenfold once, then fails.
Eigen::VectorXd finite_diff_mean_grad(const std::function<double(const MeanParams&)>& expectation,
                                      const MeanParams& mu, double h);

enum class GradientMode { kMonteCarlo, kExact };

/// grad_mu E_q[f] for scalar q: gauss_grad_mean / gauss_grad_exact for
/// Gaussians, the Fisher-solve routes for Gamma. Throws NumericError on a
/// non-finite result.
GradEstimate mean_gradient(const ScalarFunction& f, const NatParams& q, GradientMode mode, int S, Rng& rng);

/// Monte Carlo mean of f over S draws from scalar q.
double mc_expectation(const ScalarFunction& f, const NatParams& q, int S, Rng& rng);

/// E_q f by quadrature for scalar q (Gaussian or Gamma).
double quad_expectation(const ScalarFunction& f, const NatParams& q);

}  // namespace cvi
