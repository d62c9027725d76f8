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

// Exact inference in the conjugate models CVI reduces to. Sites are stored as
// a 2 x N matrix, one column (lambda1, lambda2) per site.

#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "cvi/expfam.hpp"

namespace cvi {

using Sites = Eigen::Matrix2Xd;

/// Bayesian linear regression prior N(z | 0, delta I); site n couples to the
/// projection x_n' z, where x_n is row n of the design (bias column included).
struct LinRegSpec {
  Eigen::MatrixXd design;
  double delta = 1.0;
};

/// Zero-mean Gaussian process; site n attaches to z_n.
struct GpSpec {
  Eigen::MatrixXd kernel;
};

/// Random walk z_0 ~ N(0, 1), z_k | z_{k-1} ~ N(z_{k-1}, sigma2), k = 1..T.
/// Site n attaches to z_{n+1}.
struct KalmanSpec {
  int horizon = 1;
  double sigma2 = 1.0;
};

/// Scalar Gamma prior Ga(a, b), rate b; a single site.
struct GammaPriorSpec {
  double a = 1.0;
  double b = 1.0;
};

using ConjugateModelSpec = std::variant<LinRegSpec, GpSpec, KalmanSpec, GammaPriorSpec>;

/// Number of sites the model carries.
int site_count(const ConjugateModelSpec& spec);
/// Family of the per-site marginal q_n.
FamilyKind site_family(const ConjugateModelSpec& spec);
void validate(const ConjugateModelSpec& spec);

/// Posterior summary used by the CVI loop.
struct Posterior {
  FamilyKind site_family;
  /// Gaussian backends: mean and variance of each site's target.
  Eigen::VectorXd site_mean;
  Eigen::VectorXd site_var;
  /// Gamma backend: the posterior itself.
  NatParams gamma;
  /// Posterior mean of the latent vector (dimension D+1, N, T+1 or 1).
  Eigen::VectorXd latent_mean;
  /// KL(q || prior).
  double kl_to_prior = 0.0;
  /// LinReg: whether the matrix-inversion-lemma path ran.
  bool dual_path = false;

  /// Scalar marginal q_n in natural coordinates.
  NatParams site_marginal(int n) const;
};

/// Dispatches on the model variant. Throws DomainError when the combined
/// parameter lambda~ + eta leaves the natural domain.
Posterior conjugate_posterior(const ConjugateModelSpec& spec, const Sites& sites);

/// Full posterior N(m, V) over the regression weights. Cheap: the precision
/// is formed directly.
NatParams linreg_posterior(const LinRegSpec& spec, const Sites& sites);

/// Primal/dual summaries. `force_primal` disables the dual path.
Posterior linreg_summary(const LinRegSpec& spec, const Sites& sites, bool force_primal = false);

struct Marginals {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// GP posterior marginals at `query` (all indices when empty).
Marginals gp_marginals(const GpSpec& spec, const Sites& sites, const std::vector<int>& query = {});
Posterior gp_summary(const GpSpec& spec, const Sites& sites);

/// Smoothed marginals of z_0..z_T.
/// Predictive marginals of x'z for query rows `Xq` (same columns as the design).
Marginals linreg_predict(const LinRegSpec& spec, const Sites& sites, const Eigen::MatrixXd& Xq);

/// Predictive marginals of f at new inputs given k(x*, X) (M x N) and k(x*, x*).
Marginals gp_predict(const GpSpec& spec, const Sites& sites, const Eigen::MatrixXd& cross,
                     const Eigen::VectorXd& self_var);

Marginals kalman_marginals(const KalmanSpec& spec, const Sites& sites);
Posterior kalman_summary(const KalmanSpec& spec, const Sites& sites);

/// Gamma(a + lambda2, b - lambda1).
NatParams gamma_posterior(const GammaPriorSpec& spec, const Eigen::Vector2d& site);

/// Covariance of the random-walk chain, K[i][j] = 1 + sigma2 * min(i, j).
Eigen::MatrixXd chain_covariance(int horizon, double sigma2);

}  // namespace cvi
