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

#include "cvi/gradients.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "cvi/errors.hpp"
#include "cvi/quadrature.hpp"

namespace cvi {

namespace {

constexpr double kSecondDiffStep = 1e-5;
constexpr int kMinLeaveOneOut = 4;

double checked(double value, double z, const char* what) {
  if (!std::isfinite(value)) throw EstimationError(std::string("non-finite ") + what, z);
  return value;
}

void require_scalar(const NatParams& q, const char* op) {
  if (q.family.tag == Family::kGaussianFull) {
    throw ShapeError(std::string(op) + " needs a scalar family");
  }
}

// Mean and standard error of the columns of a sample matrix (S x k).
void summarize(const Eigen::MatrixXd& u, GradEstimate& out) {
  const int S = static_cast<int>(u.rows());
  out.g = u.colwise().mean().transpose();
  out.se.resize(u.cols());
  for (int c = 0; c < u.cols(); ++c) {
    if (S < 2) {
      out.se[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double var = (u.col(c).array() - out.g[c]).square().sum() / (S - 1);
    out.se[c] = std::sqrt(var / S);
  }
}

Eigen::LLT<Eigen::Matrix2d> fisher_factor(const NatParams& q) {
  const Eigen::Matrix2d C = fisher_info(q);
  Eigen::LLT<Eigen::Matrix2d> llt(C);
  const double diag_ratio = C.diagonal().minCoeff() / C.diagonal().maxCoeff();
  if (llt.info() != Eigen::Success || !(diag_ratio > 1e-14)) {
    throw SingularSystemError("Fisher information is numerically singular; q is near the boundary");
  }
  const double d0 = llt.matrixL()(0, 0), d1 = llt.matrixL()(1, 1);
  if (!(d1 * d1 > 1e-14 * d0 * d0)) {
    throw SingularSystemError("Fisher information is numerically singular; q is near the boundary");
  }
  return llt;
}

}  // namespace

double ScalarFunction::second(double z) const {
  if (d2) return d2(z);
  return (d1(z + kSecondDiffStep) - d1(z - kSecondDiffStep)) / (2.0 * kSecondDiffStep);
}

std::string to_string(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::kExact:
      return "exact";
    case EstimatorTag::kOpperArchambeauMc:
      return "opper-archambeau-mc";
    case EstimatorTag::kFisherSolveMc:
      return "fisher-solve-mc";
    case EstimatorTag::kFiniteDiff:
      return "finite-diff";
  }
  return "?";
}

GradEstimate gauss_grad_mean(const ScalarFunction& f, const NatParams& q, int S, Rng& rng) {
  if (S < 1) throw ShapeError("gauss_grad_mean: S must be >= 1");
  auto [m, v] = scalar_moments(q);
  const double sd = std::sqrt(v);
  std::vector<double> z(S), d1(S), d2(S);
  double sum2 = 0.0;
  for (int s = 0; s < S; ++s) {
    z[s] = m + sd * rng.normal();
    d1[s] = checked(f.d1(z[s]), z[s], "first derivative");
    d2[s] = checked(f.second(z[s]), z[s], "second derivative");
    sum2 += d2[s];
  }
  Eigen::MatrixXd u(S, 2);
  for (int s = 0; s < S; ++s) {
    const double c = S > 1 ? (sum2 - d2[s]) / (S - 1) : d2[s];
    u(s, 0) = d1[s] - c * (z[s] - m) - m * d2[s];
    u(s, 1) = 0.5 * d2[s];
  }
  GradEstimate out;
  summarize(u, out);
  out.n_samples = S;
  out.tag = EstimatorTag::kOpperArchambeauMc;
  return out;
}

GradEstimate gauss_grad_exact(const ScalarFunction& f, const NatParams& q) {
  auto [m, v] = scalar_moments(q);
  double dm = 0.0, dv = 0.0;
  if (f.gaussian_exact) {
    const GaussianExpectation e = f.gaussian_exact(m, v);
    dm = e.d_mean;
    dv = e.d_var;
  } else {
    auto e = quad::normal_expectations(
        [&f](double z, double* out) {
          out[0] = f.d1(z);
          out[1] = f.second(z);
        },
        2, m, v);
    dm = e[0];
    dv = 0.5 * e[1];
  }
  GradEstimate out;
  out.g = Eigen::Vector2d(dm - 2.0 * m * dv, dv);
  out.se = Eigen::Vector2d::Zero();
  out.tag = EstimatorTag::kExact;
  return out;
}

GradEstimate fisher_solve_grad(const ScalarFunction& h, const NatParams& q, int S, Rng& rng) {
  require_scalar(q, "fisher_solve_grad");
  if (S < 2) throw ShapeError("fisher_solve_grad: S must be >= 2");
  const auto llt = fisher_factor(q);
  const MeanParams mu = nat_to_mean(q);
  const bool gaussian = q.family.tag == Family::kGaussianScalar;

  std::vector<double> z(S), eps(S), val(S), der(S);
  std::vector<Eigen::Vector2d> phi(S);
  double m = 0.0, sd = 0.0;
  Eigen::Matrix2d J = Eigen::Matrix2d::Zero();
  if (gaussian) {
    auto mv = scalar_moments(q);
    m = mv.first;
    sd = std::sqrt(mv.second);
    // d(m, v)/d(lambda) transposed: dE/dlambda = J (dE/dm, dE/dv).
    J << mv.second, 0.0, 2.0 * m * mv.second, 2.0 * mv.second * mv.second;
  }
  const auto [shape, rate] = gaussian ? std::pair{0.0, 0.0} : gamma_shape_rate(q);
  for (int s = 0; s < S; ++s) {
    if (gaussian) {
      eps[s] = rng.normal();
      z[s] = m + sd * eps[s];
      phi[s] = Eigen::Vector2d(z[s], z[s] * z[s]);
      der[s] = checked(h.d1(z[s]), z[s], "derivative");
    } else {
      z[s] = rng.gamma(shape, rate);
      phi[s] = Eigen::Vector2d(z[s], std::log(z[s]));
    }
    val[s] = checked(h.f(z[s]), z[s], "value");
  }

  // Standardized regression features spanning (1, phi): residuals of h on
  // them form the control variate. Coefficients for draw s come from all
  // other draws, so each per-draw term stays unbiased.
  const Eigen::Matrix2d C = fisher_info(q);
  const Eigen::Vector2d scale(std::sqrt(C(0, 0)), std::sqrt(C(1, 1)));
  auto features = [&](int s) -> Eigen::Vector3d {
    if (gaussian) return Eigen::Vector3d(1.0, eps[s], eps[s] * eps[s]);
    return Eigen::Vector3d(1.0, (phi[s][0] - mu.values[0]) / scale[0],
                           (phi[s][1] - mu.values[1]) / scale[1]);
  };
  // Coefficients on phi implied by feature coefficients a.
  auto phi_coef = [&](const Eigen::Vector3d& a) -> Eigen::Vector2d {
    if (gaussian) {
      const double v = sd * sd;
      return Eigen::Vector2d(a[1] / sd - 2.0 * m * a[2] / v, a[2] / v);
    }
    return Eigen::Vector2d(a[1] / scale[0], a[2] / scale[1]);
  };
  // Lambda-gradient of E[r] from draw s, r = h - a.features.
  auto residual_grad = [&](int s, const Eigen::Vector3d& a, double baseline) -> Eigen::Vector2d {
    if (gaussian) {
      const Eigen::Vector2d c = phi_coef(a);
      const double rd = der[s] - c[0] - 2.0 * c[1] * z[s];
      return J * Eigen::Vector2d(rd, rd * eps[s] / (2.0 * sd));
    }
    const double r = val[s] - a.dot(features(s)) - baseline;
    return r * (phi[s] - mu.values);
  };

  Eigen::MatrixXd u(S, 2);
  bool fitted = S >= kMinLeaveOneOut;
  if (fitted) {
    // Full-sample QR fit, then exact leave-one-out coefficients by the
    // rank-one downdate beta_s = beta - (X'X)^{-1} x_s e_s / (1 - h_s).
    Eigen::MatrixXd X(S, 3);
    Eigen::VectorXd y(S);
    for (int s = 0; s < S; ++s) {
      X.row(s) = features(s).transpose();
      y[s] = val[s];
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::Matrix3d R = qr.matrixQR().topLeftCorner<3, 3>().triangularView<Eigen::Upper>();
    const Eigen::Vector3d rdiag = R.diagonal().cwiseAbs();
    fitted = rdiag.minCoeff() > 1e-10 * rdiag.maxCoeff();
    if (fitted) {
      const Eigen::Vector3d beta = qr.solve(y);
      for (int s = 0; s < S && fitted; ++s) {
        const Eigen::Vector3d x = X.row(s).transpose();
        const Eigen::Vector3d t = R.transpose().triangularView<Eigen::Lower>().solve(x);
        const Eigen::Vector3d w = R.triangularView<Eigen::Upper>().solve(t);
        const double lev = x.dot(w);
        if (!(1.0 - lev > 1e-10)) {
          fitted = false;
          break;
        }
        const double e = y[s] - x.dot(beta);
        const Eigen::Vector3d coef = beta - w * (e / (1.0 - lev));
        u.row(s) = (phi_coef(coef) + llt.solve(residual_grad(s, coef, 0.0))).transpose();
      }
    }
  }
  if (!fitted) {
    double total = 0.0;
    for (double x : val) total += x;
    const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
    for (int s = 0; s < S; ++s) {
      const double loo = (total - val[s]) / (S - 1);
      u.row(s) = llt.solve(residual_grad(s, zero, loo)).transpose();
    }
  }
  GradEstimate out;
  summarize(u, out);
  if (!out.g.allFinite()) throw SingularSystemError("Fisher solve produced a non-finite gradient");
  out.n_samples = S;
  out.tag = EstimatorTag::kFisherSolveMc;
  return out;
}

GradEstimate fisher_solve_grad_exact(const ScalarFunction& h, const NatParams& q) {
  require_scalar(q, "fisher_solve_grad_exact");
  const auto llt = fisher_factor(q);
  Eigen::Vector2d dlam;
  if (q.family.tag == Family::kGaussianScalar) {
    auto [m, v] = scalar_moments(q);
    auto e = quad::normal_expectations(
        [&h](double z, double* out) {
          out[0] = h.d1(z);
          out[1] = h.second(z);
        },
        2, m, v);
    Eigen::Matrix2d J;
    J << v, 0.0, 2.0 * m * v, 2.0 * v * v;
    dlam = J * Eigen::Vector2d(e[0], 0.5 * e[1]);
  } else {
    auto [a, b] = gamma_shape_rate(q);
    const MeanParams mu = nat_to_mean(q);
    const double eh = quad::gamma_expectation(h.f, a, b);
    auto c = quad::gamma_expectations(
        [&](double z, double* out) {
          const double r = h.f(z) - eh;
          out[0] = r * (z - mu.values[0]);
          out[1] = r * (std::log(z) - mu.values[1]);
        },
        2, a, b);
    dlam = Eigen::Vector2d(c[0], c[1]);
  }
  GradEstimate out;
  out.g = llt.solve(dlam);
  out.se = Eigen::Vector2d::Zero();
  out.tag = EstimatorTag::kExact;
  return out;
}

GradEstimate exact_mean_grad(const ScalarFunction& f, const NatParams& q) {
  if (q.family.tag == Family::kGaussianScalar) return gauss_grad_exact(f, q);
  return fisher_solve_grad_exact(f, q);
}

Eigen::VectorXd finite_diff_mean_grad(const std::function<double(const MeanParams&)>& expectation,
                                      const MeanParams& mu, double h) {
  if (!(h > 0.0)) throw ShapeError("finite_diff_mean_grad: step must be positive");
  if (!in_domain(mu)) throw DomainError("finite_diff_mean_grad: point outside the mean domain");
  Eigen::VectorXd g(mu.values.size());
  for (int i = 0; i < mu.values.size(); ++i) {
    double step = h;
    for (int attempt = 0;; ++attempt) {
      MeanParams a = mu, b = mu;
      a.values[i] += step;
      b.values[i] -= step;
      if (in_domain(a) && in_domain(b)) {
        g[i] = (expectation(a) - expectation(b)) / (2.0 * step);
        break;
      }
      if (attempt == 1) throw DomainError("finite_diff_mean_grad: perturbation leaves the domain");
      step *= 0.1;
    }
  }
  return g;
}

GradEstimate mean_gradient(const ScalarFunction& f, const NatParams& q, GradientMode mode, int S, Rng& rng) {
  GradEstimate g;
  if (q.family.is_gaussian()) {
    g = mode == GradientMode::kExact ? gauss_grad_exact(f, q) : gauss_grad_mean(f, q, S, rng);
  } else {
    g = mode == GradientMode::kExact ? fisher_solve_grad_exact(f, q) : fisher_solve_grad(f, q, S, rng);
  }
  if (!g.g.allFinite()) throw NumericError("non-finite gradient estimate");
  return g;
}

double mc_expectation(const ScalarFunction& f, const NatParams& q, int S, Rng& rng) {
  require_scalar(q, "mc_expectation");
  if (S < 1) throw ShapeError("mc_expectation: S must be >= 1");
  const Eigen::MatrixXd z = sample(q, S, rng);
  double acc = 0.0;
  for (int s = 0; s < S; ++s) acc += checked(f.f(z(s, 0)), z(s, 0), "value");
  return acc / S;
}

double quad_expectation(const ScalarFunction& f, const NatParams& q) {
  require_scalar(q, "quad_expectation");
  if (q.family.tag == Family::kGaussianScalar) {
    if (f.gaussian_exact) {
      auto [m, v] = scalar_moments(q);
      return f.gaussian_exact(m, v).value;
    }
    auto [m, v] = scalar_moments(q);
    return quad::normal_expectation(f.f, m, v);
  }
  auto [a, b] = gamma_shape_rate(q);
  return quad::gamma_expectation(f.f, a, b);
}

}  // namespace cvi
