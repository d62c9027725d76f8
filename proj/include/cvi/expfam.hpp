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

// Exponential-family kernels: full and scalar Gaussians, Gamma.
//
// Coordinates. GaussianScalar uses phi(z) = (z, z^2), lambda = (m/v, -1/(2v)).
// GaussianFull(d) uses phi(z) = (z, z_i z_j for i >= j), packed row-major over
// the lower triangle. The matching natural vector is (P m, packed Lambda) with
// Lambda_ii = -P_ii / 2 on the diagonal and Lambda_ij = -P_ij below it, so that
// <lambda, phi(z)> = (Pm)'z - z'Pz/2 and d = 1 coincides with GaussianScalar.
// Gamma(alpha, beta) with rate beta uses phi(z) = (z, log z) and
// lambda = (-beta, alpha - 1).

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

#include "cvi/random.hpp"

namespace cvi {

enum class Family { kGaussianScalar, kGaussianFull, kGamma };

struct FamilyKind {
  Family tag = Family::kGaussianScalar;
  int d = 1;  // latent dimension; 1 unless GaussianFull

  static FamilyKind gaussian_scalar() { return {Family::kGaussianScalar, 1}; }
  static FamilyKind gaussian_full(int d);
  static FamilyKind gamma() { return {Family::kGamma, 1}; }

  /// Length of the natural / mean parameter vectors.
  int param_dim() const;
  bool is_gaussian() const { return tag != Family::kGamma; }
  std::string name() const;

  friend bool operator==(const FamilyKind& a, const FamilyKind& b) {
    return a.tag == b.tag && a.d == b.d;
  }
};

struct NatParams {
  FamilyKind family;
  Eigen::VectorXd values;
};

struct MeanParams {
  FamilyKind family;
  Eigen::VectorXd values;
};

// Constructors from the usual parameterizations.
NatParams gaussian_scalar(double mean, double var);
NatParams gaussian_full(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
/// Gaussian from precision-times-mean h and precision P.
NatParams gaussian_full_from_precision(const Eigen::VectorXd& h, const Eigen::MatrixXd& precision);
NatParams gamma_dist(double shape, double rate);

/// (mean, variance) of a scalar Gaussian.
std::pair<double, double> scalar_moments(const NatParams& q);
/// (shape, rate) of a Gamma.
std::pair<double, double> gamma_shape_rate(const NatParams& q);
/// Precision matrix and h = P m of a GaussianFull (or scalar) parameter.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> precision_form(const NatParams& q);
/// Mean and covariance of a GaussianFull (or scalar) parameter.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> moment_form(const NatParams& q);

/// Sufficient statistics phi(z) of a single draw.
Eigen::VectorXd sufficient_stats(const FamilyKind& family, const Eigen::VectorXd& z);

bool in_domain(const NatParams& q);
bool in_domain(const MeanParams& mu);

MeanParams nat_to_mean(const NatParams& q);
NatParams mean_to_nat(const MeanParams& mu);
double log_partition(const NatParams& q);
/// Convex conjugate A*(mu) = <mu, lambda(mu)> - A(lambda(mu)).
double dual_log_partition(const MeanParams& mu);
double kl(const NatParams& q1, const NatParams& q2);
/// Bregman divergence of A* between mean parameters; equals kl of the duals.
double bregman_dual(const MeanParams& mu1, const MeanParams& mu2);
/// d mu / d lambda, the covariance of the sufficient statistics.
Eigen::MatrixXd fisher_info(const NatParams& q);
/// n draws as rows of an n x d matrix.
Eigen::MatrixXd sample(const NatParams& q, int n, Rng& rng);
/// Scalar Gaussian marginal of coordinate i.
NatParams marginal(const NatParams& q, int i);

/// A distribution held in both coordinate systems. The dual is computed once
/// at construction so the value stays immutable and shareable.
class ExpFamParams {
 public:
  static ExpFamParams from_nat(NatParams nat);
  static ExpFamParams from_mean(MeanParams mean);

  const NatParams& nat() const { return nat_; }
  const MeanParams& mean() const { return mean_; }
  const FamilyKind& family() const { return nat_.family; }

 private:
  ExpFamParams(NatParams n, MeanParams m) : nat_(std::move(n)), mean_(std::move(m)) {}
  NatParams nat_;
  MeanParams mean_;
};

}  // namespace cvi
