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

#include "cvi/models.hpp"

#include <cmath>

#include "cvi/errors.hpp"
#include "cvi/special.hpp"

namespace cvi {

namespace {

void check_binary(const Eigen::VectorXd& y) {
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DataError("Bernoulli labels must be 0 or 1");
  }
}

}  // namespace

std::string to_string(Likelihood kind) {
  switch (kind) {
    case Likelihood::kBernoulliLogit:
      return "bernoulli-logit";
    case Likelihood::kBernoulliProbit:
      return "bernoulli-probit";
    case Likelihood::kGammaShape:
      return "gamma-shape";
    case Likelihood::kGaussian:
      return "gaussian";
  }
  return "?";
}

LogLik loglik_eval(const NonConjugateFactor& factor, double z) {
  const double y = factor.y;
  switch (factor.kind) {
    case Likelihood::kBernoulliLogit: {
      const double s = special::sigmoid(z);
      // y log sig(z) + (1 - y) log sig(-z), exact in both tails.
      const double value = y * special::log_sigmoid(z) + (1.0 - y) * special::log_sigmoid(-z);
      return {value, y - s, -s * (1.0 - s)};
    }
    case Likelihood::kBernoulliProbit: {
      const double t = 2.0 * y - 1.0;
      const double x = t * z;
      const double r = special::inverse_mills_ratio(x);
      return {special::log_normal_cdf(x), t * r, -r * (x + r)};
    }
    case Likelihood::kGammaShape: {
      if (!(z > 0.0)) throw DomainError("gamma-shape likelihood needs z > 0");
      const double ly = std::log(y);
      return {(z - 1.0) * ly - y - std::lgamma(z), ly - special::digamma(z), -special::trigamma(z)};
    }
    case Likelihood::kGaussian: {
      const double s = factor.noise_var;
      const double r = y - z;
      return {-0.5 * (special::kLog2Pi + std::log(s)) - 0.5 * r * r / s, r / s, -1.0 / s};
    }
  }
  return {};
}

ScalarFunction as_scalar_function(const NonConjugateFactor& factor) {
  ScalarFunction f;
  f.f = [factor](double z) { return loglik_eval(factor, z).value; };
  f.d1 = [factor](double z) { return loglik_eval(factor, z).d1; };
  f.d2 = [factor](double z) { return loglik_eval(factor, z).d2; };
  if (factor.kind == Likelihood::kGaussian) {
    f.gaussian_exact = [y = factor.y, s = factor.noise_var](double m, double v) {
      GaussianExpectation e;
      e.value = -0.5 * (special::kLog2Pi + std::log(s)) - 0.5 * ((y - m) * (y - m) + v) / s;
      e.d_mean = (y - m) / s;
      e.d_var = -0.5 / s;
      return e;
    };
  }
  return f;
}

double success_prob(Likelihood kind, double z) {
  switch (kind) {
    case Likelihood::kBernoulliLogit:
      return special::sigmoid(z);
    case Likelihood::kBernoulliProbit:
      return special::normal_cdf(z);
    default:
      throw ShapeError("success_prob needs a Bernoulli likelihood");
  }
}

double normalize_label(double y) {
  if (y == 1.0) return 1.0;
  if (y == 0.0 || y == -1.0) return 0.0;
  throw DataError("labels must be in {-1, +1} or {0, 1}; got " + std::to_string(y));
}

Model build_blr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double delta, Likelihood kind) {
  if (X.rows() != y.size()) throw ShapeError("build_blr: X and y row counts differ");
  Eigen::VectorXd labels = y.unaryExpr([](double v) { return normalize_label(v); });
  LinRegSpec spec;
  spec.delta = delta;
  spec.design.resize(X.rows(), X.cols() + 1);
  spec.design.col(0).setOnes();
  spec.design.rightCols(X.cols()) = X;
  Model model{spec, {}};
  validate(model.spec);
  for (int n = 0; n < X.rows(); ++n) model.factors.push_back({n, kind, labels[n]});
  return model;
}

double KernelSpec::operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const double l = std::exp(log_l);
  return std::exp(2.0 * log_sigma_f - 0.5 * (a - b).squaredNorm() / (l * l));
}

Eigen::MatrixXd kernel_cross(const KernelSpec& kernel, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw ShapeError("kernel_cross: input dimensions differ");
  const double l2 = std::exp(2.0 * kernel.log_l);
  const double sf2 = std::exp(2.0 * kernel.log_sigma_f);
  const Eigen::VectorXd an = A.rowwise().squaredNorm();
  const Eigen::VectorXd bn = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * A * B.transpose();
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (sf2 * (-0.5 * d2.cwiseMax(0.0) / l2).array().exp()).matrix();
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = kernel_cross(kernel, X, X);
  K = (0.5 * (K + K.transpose())).eval();
  K.diagonal().setConstant(std::exp(2.0 * kernel.log_sigma_f));
  return K;
}

Model build_gpc(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelSpec& kernel, Likelihood kind) {
  if (X.rows() < 1) throw ShapeError("build_gpc: need at least one point");
  if (X.rows() != y.size()) throw ShapeError("build_gpc: X and y row counts differ");
  Eigen::VectorXd labels = y.unaryExpr([](double v) { return normalize_label(v); });
  Model model{GpSpec{kernel_matrix(kernel, X)}, {}};
  for (int n = 0; n < X.rows(); ++n) model.factors.push_back({n, kind, labels[n]});
  return model;
}

Model build_kalman_glm(const Eigen::VectorXd& y, double sigma2) {
  if (y.size() < 1) throw ShapeError("build_kalman_glm: T must be >= 1");
  check_binary(y);
  Model model{KalmanSpec{static_cast<int>(y.size()), sigma2}, {}};
  validate(model.spec);
  for (int k = 0; k < y.size(); ++k) model.factors.push_back({k, Likelihood::kBernoulliLogit, y[k]});
  return model;
}

Model build_gamma_shape(double y, double a, double b) {
  if (!(y > 0.0)) throw DomainError("build_gamma_shape: y must be > 0");
  Model model{GammaPriorSpec{a, b}, {{0, Likelihood::kGammaShape, y}}};
  validate(model.spec);
  return model;
}

}  // namespace cvi
