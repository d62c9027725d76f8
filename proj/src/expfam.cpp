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

#include "cvi/expfam.hpp"

#include <cmath>
#include <limits>

#include "cvi/errors.hpp"
#include "cvi/linalg.hpp"
#include "cvi/special.hpp"

namespace cvi {

namespace {

using linalg::packed_index;
using linalg::packed_size;

constexpr int kGammaMaxIter = 50;
constexpr double kGammaTol = 1e-10;

void check_shape(const FamilyKind& family, const Eigen::VectorXd& values) {
  if (values.size() != family.param_dim()) {
    throw ShapeError(family.name() + ": expected " + std::to_string(family.param_dim()) +
                     " parameters, got " + std::to_string(values.size()));
  }
}

void check_same(const FamilyKind& a, const FamilyKind& b) {
  if (!(a == b)) throw ShapeError("family mismatch: " + a.name() + " vs " + b.name());
}

// Scalar Gaussian (m, v) with domain checks.
std::pair<double, double> scalar_mv(const Eigen::VectorXd& lam) {
  if (!std::isfinite(lam[0]) || !std::isfinite(lam[1]) || !(lam[1] < 0.0)) {
    throw DomainError("gaussian natural parameter needs lambda2 < 0");
  }
  const double v = -0.5 / lam[1];
  return {lam[0] * v, v};
}

std::pair<double, double> gamma_ab(const Eigen::VectorXd& lam) {
  if (!std::isfinite(lam[0]) || !std::isfinite(lam[1]) || !(lam[0] < 0.0) || !(lam[1] > -1.0)) {
    throw DomainError("gamma natural parameter needs lambda1 < 0 and lambda2 > -1");
  }
  return {lam[1] + 1.0, -lam[0]};
}

struct FullGaussian {
  Eigen::VectorXd m;
  Eigen::MatrixXd V;
  Eigen::LLT<Eigen::MatrixXd> prec_llt;
};

FullGaussian full_from_nat(const NatParams& q) {
  auto [h, P] = precision_form(q);
  FullGaussian g;
  g.prec_llt = linalg::cholesky(P, linalg::Jitter::kNone, "gaussian precision");
  g.m = g.prec_llt.solve(h);
  g.V = linalg::inverse(g.prec_llt);
  return g;
}

// Mean and covariance from the (m, second-moment) mean vector.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> full_moments_from_mean(const MeanParams& mu) {
  const int d = mu.family.d;
  Eigen::VectorXd m = mu.values.head(d);
  Eigen::MatrixXd V(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      V(i, j) = mu.values[d + packed_index(i, j)] - m[i] * m[j];
      V(j, i) = V(i, j);
    }
  }
  return {m, V};
}

Eigen::VectorXd full_mean_vector(const Eigen::VectorXd& m, const Eigen::MatrixXd& V) {
  const int d = static_cast<int>(m.size());
  Eigen::VectorXd out(d + packed_size(d));
  out.head(d) = m;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) out[d + packed_index(i, j)] = V(i, j) + m[i] * m[j];
  }
  return out;
}

// Solves log(alpha) - psi(alpha) = s for alpha, s > 0. The left side is
// strictly decreasing, so Newton steps are kept inside a bracket.
double invert_gamma_shape(double s) {
  auto g = [s](double a) { return special::log_minus_digamma(a) - s; };
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double a = 0.5 / s;
  for (int it = 0; it < kGammaMaxIter; ++it) {
    const double ga = g(a);
    if (ga == 0.0) return a;
    if (ga > 0.0) {
      lo = a;
    } else {
      hi = a;
    }
    const double slope = 1.0 / a - special::trigamma(a);
    double next = a - ga / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) {
      if (!std::isfinite(hi)) {
        next = 2.0 * a;
      } else if (lo == 0.0) {
        next = 0.5 * a;
      } else {
        next = std::sqrt(lo * hi);
      }
    }
    const double step = std::abs(next - a);
    a = next;
    if (step <= kGammaTol * a) {
      // One polishing step; quadratic convergence makes it nearly exact.
      const double polished = a - g(a) / (1.0 / a - special::trigamma(a));
      if (polished > 0.0 && std::isfinite(polished)) a = polished;
      return a;
    }
  }
  throw NonConvergenceError("gamma mean-to-natural inversion exceeded iteration cap");
}

}  // namespace

FamilyKind FamilyKind::gaussian_full(int d) {
  if (d < 1) throw ShapeError("GaussianFull needs d >= 1");
  return {Family::kGaussianFull, d};
}

int FamilyKind::param_dim() const {
  switch (tag) {
    case Family::kGaussianScalar:
    case Family::kGamma:
      return 2;
    case Family::kGaussianFull:
      return d + packed_size(d);
  }
  return 0;
}

std::string FamilyKind::name() const {
  switch (tag) {
    case Family::kGaussianScalar:
      return "GaussianScalar";
    case Family::kGaussianFull:
      return "GaussianFull(" + std::to_string(d) + ")";
    case Family::kGamma:
      return "Gamma";
  }
  return "?";
}

NatParams gaussian_scalar(double mean, double var) {
  if (!(var > 0.0) || !std::isfinite(var) || !std::isfinite(mean)) {
    throw DomainError("gaussian needs finite mean and positive variance");
  }
  return {FamilyKind::gaussian_scalar(), Eigen::Vector2d(mean / var, -0.5 / var)};
}

NatParams gaussian_full(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ShapeError("gaussian_full: mean/covariance size mismatch");
  }
  auto llt = linalg::cholesky(cov, linalg::Jitter::kNone, "gaussian covariance");
  Eigen::MatrixXd P = linalg::inverse(llt);
  P = 0.5 * (P + P.transpose());
  return gaussian_full_from_precision(P * mean, P);
}

NatParams gaussian_full_from_precision(const Eigen::VectorXd& h, const Eigen::MatrixXd& precision) {
  const int d = static_cast<int>(h.size());
  if (precision.rows() != d || precision.cols() != d) {
    throw ShapeError("gaussian_full_from_precision: size mismatch");
  }
  NatParams q{FamilyKind::gaussian_full(d), Eigen::VectorXd(d + packed_size(d))};
  q.values.head(d) = h;
  for (int i = 0; i < d; ++i) {
    q.values[d + packed_index(i, i)] = -0.5 * precision(i, i);
    for (int j = 0; j < i; ++j) q.values[d + packed_index(i, j)] = -precision(i, j);
  }
  return q;
}

NatParams gamma_dist(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw DomainError("gamma needs positive shape and rate");
  }
  return {FamilyKind::gamma(), Eigen::Vector2d(-rate, shape - 1.0)};
}

std::pair<double, double> scalar_moments(const NatParams& q) {
  if (q.family.tag == Family::kGaussianFull && q.family.d == 1) return scalar_mv(q.values);
  if (q.family.tag != Family::kGaussianScalar) throw ShapeError("scalar_moments: not a scalar Gaussian");
  check_shape(q.family, q.values);
  return scalar_mv(q.values);
}

std::pair<double, double> gamma_shape_rate(const NatParams& q) {
  if (q.family.tag != Family::kGamma) throw ShapeError("gamma_shape_rate: not a Gamma");
  check_shape(q.family, q.values);
  return gamma_ab(q.values);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> precision_form(const NatParams& q) {
  if (!q.family.is_gaussian()) throw ShapeError("precision_form: not a Gaussian");
  check_shape(q.family, q.values);
  const int d = q.family.d;
  Eigen::VectorXd h = q.values.head(d);
  Eigen::MatrixXd P(d, d);
  for (int i = 0; i < d; ++i) {
    P(i, i) = -2.0 * q.values[d + packed_index(i, i)];
    for (int j = 0; j < i; ++j) {
      P(i, j) = -q.values[d + packed_index(i, j)];
      P(j, i) = P(i, j);
    }
  }
  return {h, P};
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moment_form(const NatParams& q) {
  auto g = full_from_nat(q);
  return {g.m, g.V};
}

Eigen::VectorXd sufficient_stats(const FamilyKind& family, const Eigen::VectorXd& z) {
  switch (family.tag) {
    case Family::kGaussianScalar:
      return Eigen::Vector2d(z[0], z[0] * z[0]);
    case Family::kGamma:
      if (!(z[0] > 0.0)) throw DomainError("gamma sufficient statistics need z > 0");
      return Eigen::Vector2d(z[0], std::log(z[0]));
    case Family::kGaussianFull: {
      const int d = family.d;
      Eigen::VectorXd out(family.param_dim());
      out.head(d) = z;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) out[d + packed_index(i, j)] = z[i] * z[j];
      }
      return out;
    }
  }
  return {};
}

bool in_domain(const NatParams& q) {
  if (q.values.size() != q.family.param_dim() || !q.values.allFinite()) return false;
  switch (q.family.tag) {
    case Family::kGaussianScalar:
      return q.values[1] < 0.0;
    case Family::kGamma:
      return q.values[0] < 0.0 && q.values[1] > -1.0;
    case Family::kGaussianFull:
      return linalg::is_positive_definite(precision_form(q).second);
  }
  return false;
}

bool in_domain(const MeanParams& mu) {
  if (mu.values.size() != mu.family.param_dim() || !mu.values.allFinite()) return false;
  switch (mu.family.tag) {
    case Family::kGaussianScalar:
      return mu.values[1] - mu.values[0] * mu.values[0] > 0.0;
    case Family::kGamma:
      return mu.values[0] > 0.0 && std::log(mu.values[0]) - mu.values[1] > 0.0;
    case Family::kGaussianFull:
      return linalg::is_positive_definite(full_moments_from_mean(mu).second);
  }
  return false;
}

MeanParams nat_to_mean(const NatParams& q) {
  check_shape(q.family, q.values);
  switch (q.family.tag) {
    case Family::kGaussianScalar: {
      auto [m, v] = scalar_mv(q.values);
      return {q.family, Eigen::Vector2d(m, v + m * m)};
    }
    case Family::kGamma: {
      auto [a, b] = gamma_ab(q.values);
      return {q.family, Eigen::Vector2d(a / b, special::digamma(a) - std::log(b))};
    }
    case Family::kGaussianFull: {
      auto g = full_from_nat(q);
      return {q.family, full_mean_vector(g.m, g.V)};
    }
  }
  return {};
}

NatParams mean_to_nat(const MeanParams& mu) {
  check_shape(mu.family, mu.values);
  if (!in_domain(mu)) throw DomainError(mu.family.name() + ": mean parameter outside the domain");
  switch (mu.family.tag) {
    case Family::kGaussianScalar: {
      const double m = mu.values[0];
      const double v = mu.values[1] - m * m;
      return {mu.family, Eigen::Vector2d(m / v, -0.5 / v)};
    }
    case Family::kGamma: {
      const double s = std::log(mu.values[0]) - mu.values[1];
      const double a = invert_gamma_shape(s);
      const double b = a / mu.values[0];
      return {mu.family, Eigen::Vector2d(-b, a - 1.0)};
    }
    case Family::kGaussianFull: {
      auto [m, V] = full_moments_from_mean(mu);
      return gaussian_full(m, V);
    }
  }
  return {};
}

double log_partition(const NatParams& q) {
  check_shape(q.family, q.values);
  switch (q.family.tag) {
    case Family::kGaussianScalar: {
      scalar_mv(q.values);
      const double l1 = q.values[0];
      const double l2 = q.values[1];
      return -l1 * l1 / (4.0 * l2) - 0.5 * std::log(-2.0 * l2) + 0.5 * special::kLog2Pi;
    }
    case Family::kGamma: {
      auto [a, b] = gamma_ab(q.values);
      return std::lgamma(a) - a * std::log(b);
    }
    case Family::kGaussianFull: {
      auto [h, P] = precision_form(q);
      auto llt = linalg::cholesky(P, linalg::Jitter::kNone, "gaussian precision");
      const int d = q.family.d;
      return 0.5 * h.dot(llt.solve(h)) - 0.5 * linalg::log_det(llt) + 0.5 * d * special::kLog2Pi;
    }
  }
  return 0.0;
}

double dual_log_partition(const MeanParams& mu) {
  check_shape(mu.family, mu.values);
  if (!in_domain(mu)) throw DomainError(mu.family.name() + ": mean parameter outside the domain");
  switch (mu.family.tag) {
    case Family::kGaussianScalar: {
      const double v = mu.values[1] - mu.values[0] * mu.values[0];
      return -0.5 * std::log(v) - 0.5 * (1.0 + special::kLog2Pi);
    }
    case Family::kGaussianFull: {
      auto [m, V] = full_moments_from_mean(mu);
      auto llt = linalg::cholesky(V, linalg::Jitter::kNone, "gaussian covariance");
      return -0.5 * linalg::log_det(llt) - 0.5 * mu.family.d * (1.0 + special::kLog2Pi);
    }
    case Family::kGamma: {
      const NatParams q = mean_to_nat(mu);
      auto [a, b] = gamma_ab(q.values);
      return -a + (a - 1.0) * special::digamma(a) - std::lgamma(a) + std::log(b);
    }
  }
  return 0.0;
}

double kl(const NatParams& q1, const NatParams& q2) {
  check_same(q1.family, q2.family);
  check_shape(q1.family, q1.values);
  check_shape(q2.family, q2.values);
  switch (q1.family.tag) {
    case Family::kGaussianScalar: {
      auto [m1, v1] = scalar_mv(q1.values);
      auto [m2, v2] = scalar_mv(q2.values);
      const double dm = m2 - m1;
      return 0.5 * (v1 / v2 + dm * dm / v2 - 1.0 + std::log(v2 / v1));
    }
    case Family::kGamma: {
      const MeanParams mu1 = nat_to_mean(q1);
      return log_partition(q2) - log_partition(q1) - (q2.values - q1.values).dot(mu1.values);
    }
    case Family::kGaussianFull: {
      auto g1 = full_from_nat(q1);
      auto [h2, P2] = precision_form(q2);
      auto llt2 = linalg::cholesky(P2, linalg::Jitter::kNone, "gaussian precision");
      const Eigen::VectorXd m2 = llt2.solve(h2);
      const Eigen::VectorXd dm = m2 - g1.m;
      const double tr = (P2.cwiseProduct(g1.V)).sum();
      const int d = q1.family.d;
      return 0.5 * (tr + dm.dot(P2 * dm) - d + linalg::log_det(g1.prec_llt) - linalg::log_det(llt2));
    }
  }
  return 0.0;
}

double bregman_dual(const MeanParams& mu1, const MeanParams& mu2) {
  check_same(mu1.family, mu2.family);
  const NatParams lam2 = mean_to_nat(mu2);
  return dual_log_partition(mu1) - dual_log_partition(mu2) -
         lam2.values.dot(mu1.values - mu2.values);
}

Eigen::MatrixXd fisher_info(const NatParams& q) {
  check_shape(q.family, q.values);
  switch (q.family.tag) {
    case Family::kGaussianScalar: {
      auto [m, v] = scalar_mv(q.values);
      Eigen::Matrix2d c;
      c << v, 2.0 * m * v, 2.0 * m * v, 2.0 * v * v + 4.0 * m * m * v;
      return c;
    }
    case Family::kGamma: {
      auto [a, b] = gamma_ab(q.values);
      Eigen::Matrix2d c;
      c << a / (b * b), 1.0 / b, 1.0 / b, special::trigamma(a);
      return c;
    }
    case Family::kGaussianFull: {
      auto g = full_from_nat(q);
      const int d = q.family.d;
      const auto& m = g.m;
      const auto& V = g.V;
      const int n = q.family.param_dim();
      Eigen::MatrixXd c(n, n);
      c.topLeftCorner(d, d) = V;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
          const int p = d + packed_index(i, j);
          for (int k = 0; k < d; ++k) {
            c(k, p) = m[i] * V(k, j) + m[j] * V(k, i);
            c(p, k) = c(k, p);
          }
          for (int k = 0; k < d; ++k) {
            for (int l = 0; l <= k; ++l) {
              const int r = d + packed_index(k, l);
              c(p, r) = V(i, k) * V(j, l) + V(i, l) * V(j, k) + m[i] * m[k] * V(j, l) +
                        m[i] * m[l] * V(j, k) + m[j] * m[k] * V(i, l) + m[j] * m[l] * V(i, k);
            }
          }
        }
      }
      return c;
    }
  }
  return {};
}

Eigen::MatrixXd sample(const NatParams& q, int n, Rng& rng) {
  if (n < 1) throw ShapeError("sample: n must be >= 1");
  check_shape(q.family, q.values);
  switch (q.family.tag) {
    case Family::kGaussianScalar: {
      auto [m, v] = scalar_mv(q.values);
      const double sd = std::sqrt(v);
      Eigen::MatrixXd out(n, 1);
      for (int s = 0; s < n; ++s) out(s, 0) = m + sd * rng.normal();
      return out;
    }
    case Family::kGamma: {
      auto [a, b] = gamma_ab(q.values);
      Eigen::MatrixXd out(n, 1);
      for (int s = 0; s < n; ++s) out(s, 0) = rng.gamma(a, b);
      return out;
    }
    case Family::kGaussianFull: {
      auto g = full_from_nat(q);
      const int d = q.family.d;
      Eigen::MatrixXd eps(d, n);
      for (int s = 0; s < n; ++s) {
        for (int i = 0; i < d; ++i) eps(i, s) = rng.normal();
      }
      // z = m + L^{-T} eps has covariance P^{-1} when P = L L^T.
      Eigen::MatrixXd dz = g.prec_llt.matrixU().solve(eps);
      dz.colwise() += g.m;
      return dz.transpose();
    }
  }
  return {};
}

NatParams marginal(const NatParams& q, int i) {
  if (!q.family.is_gaussian()) throw ShapeError("marginal: not a Gaussian");
  if (i < 0 || i >= q.family.d) throw ShapeError("marginal: index out of range");
  if (q.family.tag == Family::kGaussianScalar) return q;
  auto [h, P] = precision_form(q);
  auto llt = linalg::cholesky(P, linalg::Jitter::kNone, "gaussian precision");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(q.family.d);
  e[i] = 1.0;
  const Eigen::VectorXd col = llt.solve(e);
  const double m = col.dot(h);
  return gaussian_scalar(m, col[i]);
}

ExpFamParams ExpFamParams::from_nat(NatParams nat) {
  MeanParams mu = nat_to_mean(nat);
  return ExpFamParams(std::move(nat), std::move(mu));
}

ExpFamParams ExpFamParams::from_mean(MeanParams mean) {
  NatParams nat = mean_to_nat(mean);
  return ExpFamParams(std::move(nat), std::move(mean));
}

}  // namespace cvi
