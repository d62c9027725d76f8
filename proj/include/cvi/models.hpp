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

// Non-conjugate models: a conjugate backend plus per-site likelihood terms.

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cvi/conjugate_models.hpp"
#include "cvi/gradients.hpp"

namespace cvi {

enum class Likelihood {
  kBernoulliLogit,
  kBernoulliProbit,
  kGammaShape,
  /// N(y | z, noise_var). Conjugate; used to test exact recovery.
  kGaussian,
};

std::string to_string(Likelihood kind);

struct NonConjugateFactor {
  int target = 0;  // site index in the conjugate backend
  Likelihood kind = Likelihood::kBernoulliLogit;
  double y = 0.0;
  double noise_var = 1.0;  // kGaussian only
};

struct LogLik {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

LogLik loglik_eval(const NonConjugateFactor& factor, double z);

/// Integrand view of a factor for the gradient estimators. Gaussian factors
/// carry their closed-form expectation.
ScalarFunction as_scalar_function(const NonConjugateFactor& factor);

/// P(y = 1 | z) for the Bernoulli likelihoods.
double success_prob(Likelihood kind, double z);

struct Model {
  ConjugateModelSpec spec;
  std::vector<NonConjugateFactor> factors;
};

/// {-1, +1} and {0, 1} labels map to {0, 1}; anything else is a DataError.
double normalize_label(double y);

/// Logistic regression with prior N(0, delta I); a bias column is prepended.
Model build_blr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double delta,
                Likelihood kind = Likelihood::kBernoulliLogit);

/// Squared-exponential kernel sigma_f^2 exp(-|x - x'|^2 / (2 l^2)).
struct KernelSpec {
  double log_sigma_f = 0.0;
  double log_l = 0.0;

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

/// Gram matrix over the rows of X.
Eigen::MatrixXd kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& X);
/// Cross-covariance between the rows of A and the rows of B.
Eigen::MatrixXd kernel_cross(const KernelSpec& kernel, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

Model build_gpc(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& kernel,
                Likelihood kind = Likelihood::kBernoulliLogit);

/// Random-walk chain with a Bernoulli-logit observation at each time 1..T.
Model build_kalman_glm(const Eigen::VectorXd& y, double sigma2);

/// Scalar z ~ Ga(a, b) with observation y ~ Ga(z, 1) (shape z, unit rate).
Model build_gamma_shape(double y, double a, double b);

}  // namespace cvi
